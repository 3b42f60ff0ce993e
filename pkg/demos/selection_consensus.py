"""Walk through the clean-sample selection machinery on toy numbers.

Shows the remember-rate schedule, picks the small-loss subset of one
batch, and composes the four per-network selections into the inner and
outer consensus that defines the presumed-clean set.
"""

import argparse

from jocot.selection import (
    SelectionSet,
    inner_consensus,
    outer_consensus,
    remember_rate,
    small_loss_select,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tau", type=float, default=0.4)
    parser.add_argument("--gradual", type=int, default=10)
    args = parser.parse_args()

    print(f"remember rate, tau={args.tau}, ramp over {args.gradual} epochs:")
    for epoch in (0, 2, 5, args.gradual, args.gradual + 5):
        rate = remember_rate(epoch, args.gradual, args.tau)
        print(f"  epoch {epoch:>2}: keep {rate:.2f} of each batch")

    losses = [(10, 0.9), (11, 0.1), (12, 0.1), (13, 2.0), (14, 0.4)]
    kept = small_loss_select(losses, 0.6)
    print(f"\nbatch losses {losses}")
    print(f"keep 60% -> global indices {kept.indices} "
          "(ties break toward the smaller index)")

    # four selections for one batch: two per teacher module
    p1 = SelectionSet((10, 11, 12, 14), "batch")
    p2 = SelectionSet((11, 12, 13, 14), "batch")
    q1 = SelectionSet((10, 11, 12), "batch")
    q2 = SelectionSet((11, 12, 14), "batch")
    i_p = inner_consensus(p1, p2)
    i_q = inner_consensus(q1, q2)
    i_con = outer_consensus(i_p, i_q)
    print(f"\nmodule F selections {p1.indices} & {p2.indices} -> {i_p.indices}")
    print(f"module G selections {q1.indices} & {q2.indices} -> {i_q.indices}")
    print(f"consensus across modules -> {i_con.indices}")


if __name__ == "__main__":
    main()
