"""Selection primitives vs exhaustive subset enumeration and scalar formulas."""

import itertools
import math

import pytest

from jocot.selection import (
    SelectionSet,
    inner_consensus,
    load_selection,
    outer_consensus,
    remember_rate,
    save_selection,
    small_loss_select,
)


def min_sum_subset(pairs, k):
    """Exhaustive oracle: the minimum-total size-k subset, ties broken toward
    the lexicographically smallest index tuple."""
    loss = dict(pairs)
    best = None
    for combo in itertools.combinations(sorted(loss), k):
        key = (math.fsum(loss[i] for i in combo), combo)
        if best is None or key < best:
            best = key
    return set(best[1])


def test_remember_rate_at_epoch_zero():
    for tau in [0.0, 0.2, 0.8]:
        assert remember_rate(0, 10, tau) == 1.0


def test_remember_rate_midpoint():
    assert remember_rate(5, 10, 0.5) == 0.75


def test_remember_rate_clamps():
    assert remember_rate(300, 10, 0.4) == pytest.approx(0.6)
    assert remember_rate(10, 10, 0.4) == remember_rate(11, 10, 0.4)


def test_remember_rate_bit_exact_vs_scalar_formula():
    for tau in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]:
        for epoch in range(0, 21):
            expected = 1.0 - min(epoch * tau / 10, tau)
            assert remember_rate(epoch, 10, tau) == expected  # bitwise


def test_remember_rate_monotone_and_bounded():
    for tau in [0.1, 0.45, 0.8]:
        values = [remember_rate(e, 10, tau) for e in range(40)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert all(1.0 - tau <= v <= 1.0 for v in values)


def test_remember_rate_validation():
    with pytest.raises(ValueError):
        remember_rate(-1, 10, 0.2)
    with pytest.raises(ValueError):
        remember_rate(0, 0, 0.2)
    with pytest.raises(ValueError):
        remember_rate(0, 10, 1.0)


def test_small_loss_select_basic():
    sel = small_loss_select([(0, 0.1), (1, 5.0), (2, 0.2), (3, 3.0)], 0.5)
    assert sel.indices == (0, 2)


def test_small_loss_select_keep_all():
    sel = small_loss_select([(4, 1.0), (7, 2.0), (9, 0.5)], 1.0)
    assert sel.indices == (4, 7, 9)


def test_small_loss_select_at_least_one():
    sel = small_loss_select([(3, 9.0), (8, 1.0)], 0.01)
    assert sel.indices == (8,)


def test_small_loss_select_size_rule():
    import numpy as np
    rng = np.random.default_rng(0)
    for n in [1, 3, 7, 10, 128]:
        losses = list(enumerate(rng.random(n)))
        for kf in [0.05, 0.25, 0.5, 0.6, 0.75, 1.0]:
            got = len(small_loss_select(losses, kf))
            assert got == max(1, math.ceil(kf * n - 1e-12))


def test_small_loss_select_threshold_property():
    import numpy as np
    rng = np.random.default_rng(1)
    losses = list(enumerate(rng.random(30)))
    sel = small_loss_select(losses, 0.4)
    inside = {i: l for i, l in losses if i in sel.as_set()}
    outside = {i: l for i, l in losses if i not in sel.as_set()}
    assert max(inside.values()) <= min(outside.values())


def test_small_loss_select_tie_break_smaller_index():
    sel = small_loss_select([(5, 0.5), (2, 0.5), (9, 0.5), (1, 0.5)], 0.5)
    assert sel.indices == (1, 2)


def test_small_loss_select_matches_subset_oracle():
    import numpy as np
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(1, 11))
        indices = rng.choice(1000, size=n, replace=False)
        pairs = [(int(i), float(l)) for i, l in zip(indices, rng.random(n))]
        kf = float(rng.uniform(0.05, 1.0))
        sel = small_loss_select(pairs, kf)
        assert sel.as_set() == min_sum_subset(pairs, len(sel))


def test_small_loss_select_errors():
    with pytest.raises(ValueError, match="empty"):
        small_loss_select([], 0.5)
    with pytest.raises(ValueError, match="keep_fraction"):
        small_loss_select([(0, 1.0)], 0.0)
    with pytest.raises(ValueError, match="keep_fraction"):
        small_loss_select([(0, 1.0)], 1.2)
    with pytest.raises(ValueError, match="finite"):
        small_loss_select([(0, float("nan"))], 0.5)


def test_selection_set_normalizes_and_validates():
    s = SelectionSet((3, 1, 2), "batch")
    assert s.indices == (1, 2, 3)
    assert len(s) == 3
    assert 2 in s and 9 not in s
    with pytest.raises(ValueError, match="duplicate"):
        SelectionSet((1, 1, 2))
    with pytest.raises(ValueError, match="scope"):
        SelectionSet((1,), "weekly")


def test_inner_consensus_examples():
    a = SelectionSet((1, 2, 3))
    b = SelectionSet((2, 3, 4))
    assert inner_consensus(a, b).indices == (2, 3)
    assert inner_consensus(a, a).indices == a.indices
    assert inner_consensus(a, SelectionSet((7, 8))).indices == ()


def test_consensus_scope_mismatch():
    with pytest.raises(ValueError, match="scope"):
        inner_consensus(SelectionSet((1,), "batch"), SelectionSet((1,), "epoch"))


def test_outer_consensus_composition_example():
    p1, p2 = SelectionSet((1, 2, 3)), SelectionSet((2, 3))
    q1, q2 = SelectionSet((2, 3, 4)), SelectionSet((2, 4))
    i_p = inner_consensus(p1, p2)
    i_q = inner_consensus(q1, q2)
    assert i_p.indices == (2, 3)
    assert i_q.indices == (2, 4)
    assert outer_consensus(i_p, i_q).indices == (2,)


def test_outer_consensus_all_equal():
    s = SelectionSet((5, 6))
    assert outer_consensus(inner_consensus(s, s), inner_consensus(s, s)).indices == (5, 6)


def test_consensus_equals_four_way_intersection_random():
    import numpy as np
    rng = np.random.default_rng(3)
    for _ in range(100):
        sets = [SelectionSet(tuple(rng.choice(30, size=rng.integers(0, 20), replace=False)))
                for _ in range(4)]
        composed = outer_consensus(inner_consensus(sets[0], sets[1]),
                                   inner_consensus(sets[2], sets[3]))
        direct = sets[0].as_set() & sets[1].as_set() & sets[2].as_set() & sets[3].as_set()
        assert composed.as_set() == direct
        for s in sets:
            assert composed.as_set() <= s.as_set()


def test_selection_csv_round_trip(tmp_path):
    sel = SelectionSet(tuple(range(0, 50, 3)), "final")
    path = tmp_path / "sel.csv"
    save_selection(sel, path)
    loaded = load_selection(path, "final")
    assert loaded == sel
    assert path.read_text().splitlines()[0] == "0"


def test_selection_csv_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1\ntwo\n")
    with pytest.raises(ValueError, match="non-integer"):
        load_selection(path)
