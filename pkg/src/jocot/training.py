"""Training paradigms and the two-teachers-one-student orchestration.

Four per-epoch procedures share the same skeleton (forward both peers,
rank per-sample losses, keep the presumed-clean fraction, Adam-update):

- coteaching_epoch: each peer updates on the OTHER peer's selection.
- jocor_epoch: both peers update on their own selection under the joint
  (1-lambda)*supervised + lambda*contrastive objective; no cross-update.
- coteachingplus_epoch: cross-update restricted to samples where the
  peers' argmax predictions disagree.
- train_student: plain cross-entropy on a trusted subset, checkpointed
  by validation accuracy.

train_teachers runs the joint-loss pair and the cross-update pair over a
shared batch schedule and intersects their per-batch selections into the
consensus clean set that feeds the student.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .data import LabeledDataset
from .losses import (
    ce_batch,
    jocor_batch,
    make_ce_loss_fn,
    make_joint_loss_fn,
    symmetric_kl_batch,
)
from .network import (
    ModelParams,
    OptimizerState,
    TrainConfig,
    adam_init,
    adam_step,
    forward,
    gradient,
    init_params,
    lr_at,
)
from .noise import NoiseMask, noisy_label_precision
from .selection import SelectionSet, inner_consensus, outer_consensus, remember_rate, small_loss_select

MODULE_KINDS = ("coteaching", "jocor", "coteachingplus")

# fixed spawn keys so every pipeline stage draws from its own independent
# stream; the student's streams do not depend on whether teachers ran
_ROLE_TEACHER_F = 0
_ROLE_TEACHER_G = 1
_ROLE_TEACHER_SHUFFLE = 2
_ROLE_STUDENT_INIT = 3
_ROLE_STUDENT_SHUFFLE = 4
_ROLE_MODULE_INIT = 5
_ROLE_MODULE_SHUFFLE = 6


def _role_rng(seed: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(role,)))


@dataclass
class PeerNet:
    """One peer network: parameters plus its Adam state."""

    params: ModelParams
    opt: OptimizerState


@dataclass
class TeacherState:
    """A co-trained pair of peer networks and its last epoch's selections."""

    module_kind: str
    net1: PeerNet
    net2: PeerNet
    epoch_selections: List[Tuple[SelectionSet, SelectionSet]] = field(default_factory=list)
    mean_selected_loss: Optional[float] = None

    def __post_init__(self):
        if self.module_kind not in MODULE_KINDS:
            raise ValueError(f"module_kind must be one of {MODULE_KINDS}")
        if self.net1.params.layer_dims != self.net2.params.layer_dims:
            raise ValueError("peer networks must share layer dimensions")


@dataclass
class EpochMetrics:
    """Per-epoch scalars; fields that do not apply to a phase stay None."""

    epoch: int
    test_accuracy: Optional[float] = None
    noisy_label_precision: Optional[float] = None
    remember_rate: Optional[float] = None
    mean_selected_loss: Optional[float] = None
    lr: Optional[float] = None
    val_accuracy: Optional[float] = None

    def __post_init__(self):
        for name in ("test_accuracy", "noisy_label_precision", "remember_rate",
                     "val_accuracy"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} {value} outside [0, 1]")


@dataclass
class TeachersResult:
    final_selection: SelectionSet
    metrics: List[EpochMetrics]
    jocor_state: TeacherState
    coteaching_state: TeacherState
    epoch_clean_sets: List[SelectionSet]


@dataclass
class ModuleResult:
    state: TeacherState
    metrics: List[EpochMetrics]
    final_selection: SelectionSet


@dataclass
class StudentResult:
    params: ModelParams
    metrics: List[EpochMetrics]
    best_epoch: int
    best_val_accuracy: float


def init_teacher_state(module_kind: str, layer_dims, rng: np.random.Generator) -> TeacherState:
    """Two independently initialized peers drawn from one RNG stream."""
    net1 = PeerNet(init_params(layer_dims, rng), None)
    net2 = PeerNet(init_params(layer_dims, rng), None)
    net1.opt = adam_init(net1.params)
    net2.opt = adam_init(net2.params)
    return TeacherState(module_kind, net1, net2)


def make_batches(n_samples: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches covering all samples; last batch may be short."""
    if n_samples < 1:
        raise ValueError("cannot batch an empty dataset")
    perm = rng.permutation(n_samples)
    return [perm[i:i + batch_size] for i in range(0, n_samples, batch_size)]


def evaluate(params: ModelParams, dataset: LabeledDataset) -> float:
    """Fraction of samples whose argmax class (ties to the smallest index)
    equals the label."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    preds = forward(params, dataset.features).argmax(axis=1)
    return float((preds == dataset.labels).mean())


def _update(net: PeerNet, features, labels_or_fn, lr: float) -> PeerNet:
    loss_fn = labels_or_fn if callable(labels_or_fn) else make_ce_loss_fn(labels_or_fn)
    grads = gradient(net.params, features, loss_fn)
    params, opt = adam_step(net.params, net.opt, grads, lr)
    return PeerNet(params, opt)


def coteaching_epoch(state: TeacherState, noisy_train: LabeledDataset,
                     keep_fraction: float, lr: float, batches) -> TeacherState:
    """Cross-update epoch: net1 trains on net2's small-loss picks and vice versa."""
    if state.module_kind != "coteaching":
        raise ValueError(f"expected a coteaching state, got {state.module_kind}")
    net1, net2 = state.net1, state.net2
    selections = []
    batch_losses = []
    for idx in batches:
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            warnings.warn("skipping empty batch", stacklevel=2)
            continue
        x = noisy_train.features[idx]
        y = noisy_train.labels[idx]
        losses1 = ce_batch(forward(net1.params, x), y)
        losses2 = ce_batch(forward(net2.params, x), y)
        sel1 = small_loss_select(zip(idx, losses1), keep_fraction)
        sel2 = small_loss_select(zip(idx, losses2), keep_fraction)
        pos = {int(g): i for i, g in enumerate(idx)}
        # cross-update: each peer learns from the other's selection
        idx2 = np.fromiter(sel2.indices, dtype=np.intp)
        idx1 = np.fromiter(sel1.indices, dtype=np.intp)
        batch_losses.append(0.5 * (losses1[[pos[g] for g in sel2.indices]].mean()
                                   + losses2[[pos[g] for g in sel1.indices]].mean()))
        net1 = _update(net1, noisy_train.features[idx2], noisy_train.labels[idx2], lr)
        net2 = _update(net2, noisy_train.features[idx1], noisy_train.labels[idx1], lr)
        selections.append((sel1, sel2))
    msl = float(np.mean(batch_losses)) if batch_losses else None
    return TeacherState("coteaching", net1, net2, selections, msl)


def jocor_epoch(state: TeacherState, noisy_train: LabeledDataset,
                keep_fraction: float, lr: float, lambda_weight: float,
                batches, shared_ranking: bool = False) -> TeacherState:
    """Joint-loss epoch: no cross-update; both peers step on the full joint
    objective over their own selection.

    Ranking is per network ((1-lambda)*own CE + lambda*contrastive) unless
    shared_ranking, which ranks the combined joint loss so both selections
    coincide.
    """
    if state.module_kind != "jocor":
        raise ValueError(f"expected a jocor state, got {state.module_kind}")
    net1, net2 = state.net1, state.net2
    selections = []
    batch_losses = []
    for idx in batches:
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            warnings.warn("skipping empty batch", stacklevel=2)
            continue
        x = noisy_train.features[idx]
        y = noisy_train.labels[idx]
        probs1 = forward(net1.params, x)
        probs2 = forward(net2.params, x)
        contrastive = symmetric_kl_batch(probs1, probs2)
        ce1 = ce_batch(probs1, y)
        ce2 = ce_batch(probs2, y)
        if shared_ranking:
            joint = (1.0 - lambda_weight) * (ce1 + ce2) + lambda_weight * contrastive
            rank1 = rank2 = joint
        else:
            rank1 = (1.0 - lambda_weight) * ce1 + lambda_weight * contrastive
            rank2 = (1.0 - lambda_weight) * ce2 + lambda_weight * contrastive
        sel1 = small_loss_select(zip(idx, rank1), keep_fraction)
        sel2 = small_loss_select(zip(idx, rank2), keep_fraction)
        pos = {int(g): i for i, g in enumerate(idx)}
        pos1 = [pos[g] for g in sel1.indices]
        pos2 = [pos[g] for g in sel2.indices]
        joint_all = (1.0 - lambda_weight) * (ce1 + ce2) + lambda_weight * contrastive
        batch_losses.append(0.5 * (joint_all[pos1].mean() + joint_all[pos2].mean()))
        # both gradients flow from the same pre-update prediction pair
        net1 = _update(net1, x[pos1],
                       make_joint_loss_fn(probs2[pos1], y[pos1], lambda_weight), lr)
        net2 = _update(net2, x[pos2],
                       make_joint_loss_fn(probs1[pos2], y[pos2], lambda_weight), lr)
        selections.append((sel1, sel2))
    msl = float(np.mean(batch_losses)) if batch_losses else None
    return TeacherState("jocor", net1, net2, selections, msl)


def coteachingplus_epoch(state: TeacherState, noisy_train: LabeledDataset,
                         keep_fraction: float, lr: float, batches) -> TeacherState:
    """Disagreement-gated cross-update: the co-teaching step runs inside the
    subset where the peers' argmax predictions differ (whole batch when they
    fully agree)."""
    net1, net2 = state.net1, state.net2
    selections = []
    batch_losses = []
    for idx in batches:
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            warnings.warn("skipping empty batch", stacklevel=2)
            continue
        x = noisy_train.features[idx]
        y = noisy_train.labels[idx]
        probs1 = forward(net1.params, x)
        probs2 = forward(net2.params, x)
        disagree = probs1.argmax(axis=1) != probs2.argmax(axis=1)
        active = np.flatnonzero(disagree) if disagree.any() else np.arange(idx.size)
        sub_idx = idx[active]
        losses1 = ce_batch(probs1[active], y[active])
        losses2 = ce_batch(probs2[active], y[active])
        sel1 = small_loss_select(zip(sub_idx, losses1), keep_fraction)
        sel2 = small_loss_select(zip(sub_idx, losses2), keep_fraction)
        pos = {int(g): i for i, g in enumerate(sub_idx)}
        idx2 = np.fromiter(sel2.indices, dtype=np.intp)
        idx1 = np.fromiter(sel1.indices, dtype=np.intp)
        batch_losses.append(0.5 * (losses1[[pos[g] for g in sel2.indices]].mean()
                                   + losses2[[pos[g] for g in sel1.indices]].mean()))
        net1 = _update(net1, noisy_train.features[idx2], noisy_train.labels[idx2], lr)
        net2 = _update(net2, noisy_train.features[idx1], noisy_train.labels[idx1], lr)
        selections.append((sel1, sel2))
    msl = float(np.mean(batch_losses)) if batch_losses else None
    return TeacherState(state.module_kind, net1, net2, selections, msl)


def _epoch_clean_union(selection_pairs, per_epoch: bool,
                       other_pairs=None) -> SelectionSet:
    """Combine per-batch peer selections into one epoch-scope clean set.

    With two modules (other_pairs given): per batch, inner consensus within
    each module then outer consensus across modules, unioned over batches.
    per_epoch instead unions each module's inner consensus first and
    intersects once. With one module: union of per-batch inner consensus.
    """
    if other_pairs is None:
        union = set()
        for s1, s2 in selection_pairs:
            union |= inner_consensus(s1, s2).as_set()
        return SelectionSet(tuple(union), "epoch")
    if len(selection_pairs) != len(other_pairs):
        raise ValueError("modules saw different batch counts")
    if per_epoch:
        i_p = set()
        i_q = set()
        for (p1, p2), (q1, q2) in zip(selection_pairs, other_pairs):
            i_p |= inner_consensus(p1, p2).as_set()
            i_q |= inner_consensus(q1, q2).as_set()
        return outer_consensus(SelectionSet(tuple(i_p), "epoch"),
                               SelectionSet(tuple(i_q), "epoch"))
    union = set()
    for (p1, p2), (q1, q2) in zip(selection_pairs, other_pairs):
        i_con = outer_consensus(inner_consensus(p1, p2), inner_consensus(q1, q2))
        for component in (p1, p2, q1, q2):
            if not i_con.as_set() <= component.as_set():
                raise AssertionError("consensus escaped a component selection")
        union |= i_con.as_set()
    return SelectionSet(tuple(union), "epoch")


def _complement_selection(clean: SelectionSet, n_total: int) -> SelectionSet:
    return SelectionSet(tuple(set(range(n_total)) - clean.as_set()), clean.scope)


def _precision_or_none(clean: SelectionSet, n_total: int,
                       mask: Optional[NoiseMask]) -> Optional[float]:
    if mask is None or mask.num_flipped == 0:
        return None
    return noisy_label_precision(_complement_selection(clean, n_total), mask)


def train_teachers(config: TrainConfig, noisy_train: LabeledDataset,
                   clean_val: Optional[LabeledDataset] = None, *,
                   test_set: Optional[LabeledDataset] = None,
                   noise_mask: Optional[NoiseMask] = None) -> TeachersResult:
    """Run both teacher modules over a shared batch schedule and return the
    consensus clean set from the final epoch.

    The joint-loss module and the cross-update module each own two peer
    networks; per batch their four selections are intersected (inner, then
    outer) and the final epoch's union becomes the student's training set.
    clean_val is accepted for interface symmetry; teachers never consult it.
    """
    if len(noisy_train) == 0:
        raise ValueError("noisy_train is empty")
    n = len(noisy_train)
    dims = [noisy_train.feature_dim, *config.hidden_dims, noisy_train.num_classes]
    f_state = init_teacher_state("jocor", dims, _role_rng(config.seed, _ROLE_TEACHER_F))
    g_state = init_teacher_state("coteaching", dims, _role_rng(config.seed, _ROLE_TEACHER_G))
    shuffle_rng = _role_rng(config.seed, _ROLE_TEACHER_SHUFFLE)

    metrics: List[EpochMetrics] = []
    epoch_clean_sets: List[SelectionSet] = []
    for epoch in range(config.total_epochs):
        rate = remember_rate(epoch, config.num_gradual_T, config.noise_rate_tau)
        lr = lr_at(epoch, config)
        batches = make_batches(n, config.batch_size, shuffle_rng)
        f_state = jocor_epoch(f_state, noisy_train, rate, lr, config.lambda_weight,
                              batches, config.jocor_shared_ranking)
        g_state = coteaching_epoch(g_state, noisy_train, rate, lr, batches)
        epoch_clean = _epoch_clean_union(f_state.epoch_selections, config.consensus_per_epoch,
                                         other_pairs=g_state.epoch_selections)
        epoch_clean_sets.append(epoch_clean)
        test_acc = None
        if test_set is not None:
            nets = [f_state.net1, f_state.net2, g_state.net1, g_state.net2]
            test_acc = float(np.mean([evaluate(p.params, test_set) for p in nets]))
        msl_parts = [s.mean_selected_loss for s in (f_state, g_state)
                     if s.mean_selected_loss is not None]
        metrics.append(EpochMetrics(
            epoch=epoch,
            test_accuracy=test_acc,
            noisy_label_precision=_precision_or_none(epoch_clean, n, noise_mask),
            remember_rate=rate,
            mean_selected_loss=float(np.mean(msl_parts)) if msl_parts else None,
            lr=lr,
        ))
    final = SelectionSet(epoch_clean_sets[-1].indices, "final")
    if len(final) == 0:
        raise RuntimeError(
            "consensus clean set is empty; lower the noise rate or train "
            "the teachers for more epochs")
    return TeachersResult(final, metrics, f_state, g_state, epoch_clean_sets)


def train_module(config: TrainConfig, module_kind: str, noisy_train: LabeledDataset, *,
                 test_set: Optional[LabeledDataset] = None,
                 noise_mask: Optional[NoiseMask] = None) -> ModuleResult:
    """Train one co-trained pair standalone (baseline methods).

    The pair's claimed-clean set per epoch is the union over batches of the
    two peers' selection intersection; test accuracy is the peer mean.
    """
    if module_kind not in MODULE_KINDS:
        raise ValueError(f"module_kind must be one of {MODULE_KINDS}")
    if len(noisy_train) == 0:
        raise ValueError("noisy_train is empty")
    n = len(noisy_train)
    dims = [noisy_train.feature_dim, *config.hidden_dims, noisy_train.num_classes]
    state = init_teacher_state(module_kind, dims, _role_rng(config.seed, _ROLE_MODULE_INIT))
    shuffle_rng = _role_rng(config.seed, _ROLE_MODULE_SHUFFLE)

    metrics: List[EpochMetrics] = []
    last_clean = None
    for epoch in range(config.total_epochs):
        rate = remember_rate(epoch, config.num_gradual_T, config.noise_rate_tau)
        lr = lr_at(epoch, config)
        batches = make_batches(n, config.batch_size, shuffle_rng)
        if module_kind == "coteaching":
            state = coteaching_epoch(state, noisy_train, rate, lr, batches)
        elif module_kind == "jocor":
            state = jocor_epoch(state, noisy_train, rate, lr, config.lambda_weight,
                                batches, config.jocor_shared_ranking)
        else:
            state = coteachingplus_epoch(state, noisy_train, rate, lr, batches)
        last_clean = _epoch_clean_union(state.epoch_selections, per_epoch=False)
        test_acc = None
        if test_set is not None:
            test_acc = float(np.mean([evaluate(state.net1.params, test_set),
                                      evaluate(state.net2.params, test_set)]))
        metrics.append(EpochMetrics(
            epoch=epoch,
            test_accuracy=test_acc,
            noisy_label_precision=_precision_or_none(last_clean, n, noise_mask),
            remember_rate=rate,
            mean_selected_loss=state.mean_selected_loss,
            lr=lr,
        ))
    return ModuleResult(state, metrics, SelectionSet(last_clean.indices, "final"))


def train_student(clean_train: LabeledDataset, clean_val: LabeledDataset,
                  config: TrainConfig, *,
                  test_set: Optional[LabeledDataset] = None) -> StudentResult:
    """Plain supervised training on a trusted subset; returns the parameter
    snapshot with the best validation accuracy (ties go to the earliest
    epoch)."""
    if len(clean_train) == 0:
        raise ValueError("clean_train is empty")
    if len(clean_val) == 0:
        raise ValueError("clean_val is empty")
    n = len(clean_train)
    dims = [clean_train.feature_dim, *config.hidden_dims, clean_train.num_classes]
    params = init_params(dims, _role_rng(config.seed, _ROLE_STUDENT_INIT))
    opt = adam_init(params)
    shuffle_rng = _role_rng(config.seed, _ROLE_STUDENT_SHUFFLE)

    metrics: List[EpochMetrics] = []
    best_params = params.copy()
    best_val = -1.0
    best_epoch = -1
    for epoch in range(config.total_epochs):
        lr = lr_at(epoch, config)
        batch_losses = []
        for idx in make_batches(n, config.batch_size, shuffle_rng):
            x = clean_train.features[idx]
            y = clean_train.labels[idx]
            batch_losses.append(float(ce_batch(forward(params, x), y).mean()))
            grads = gradient(params, x, make_ce_loss_fn(y))
            params, opt = adam_step(params, opt, grads, lr)
        val_acc = evaluate(params, clean_val)
        test_acc = evaluate(params, test_set) if test_set is not None else None
        if val_acc > best_val:
            best_params, best_val, best_epoch = params.copy(), val_acc, epoch
        metrics.append(EpochMetrics(
            epoch=epoch,
            test_accuracy=test_acc,
            mean_selected_loss=float(np.mean(batch_losses)),
            lr=lr,
            val_accuracy=val_acc,
        ))
    return StudentResult(best_params, metrics, best_epoch, best_val)


CHECKPOINT_VERSION = "jocot-checkpoint-1"


def save_checkpoint(path, params: ModelParams, opt: Optional[OptimizerState] = None,
                    rng_state: Optional[dict] = None) -> None:
    """Flat npz with a version header: layer arrays, optional Adam moments,
    optional JSON-encoded RNG state."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "n_layers": np.array(len(params.weights)),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    if opt is not None:
        arrays["step_count"] = np.array(opt.step_count)
        arrays["adam_hyper"] = np.array([opt.beta1, opt.beta2, opt.epsilon])
        for i in range(len(params.weights)):
            arrays[f"mw{i}"] = opt.m_weights[i]
            arrays[f"vw{i}"] = opt.v_weights[i]
            arrays[f"mb{i}"] = opt.m_biases[i]
            arrays[f"vb{i}"] = opt.v_biases[i]
    if rng_state is not None:
        arrays["rng_state"] = np.array(json.dumps(rng_state))
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (params, opt|None, rng_state|None)."""
    with np.load(path, allow_pickle=False) as data:
        version = str(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version!r}")
        n_layers = int(data["n_layers"])
        params = ModelParams([data[f"w{i}"] for i in range(n_layers)],
                             [data[f"b{i}"] for i in range(n_layers)])
        opt = None
        if "step_count" in data:
            b1, b2, eps = (float(v) for v in data["adam_hyper"])
            opt = OptimizerState(
                m_weights=[data[f"mw{i}"] for i in range(n_layers)],
                m_biases=[data[f"mb{i}"] for i in range(n_layers)],
                v_weights=[data[f"vw{i}"] for i in range(n_layers)],
                v_biases=[data[f"vb{i}"] for i in range(n_layers)],
                step_count=int(data["step_count"]),
                beta1=b1, beta2=b2, epsilon=eps,
            )
        rng_state = json.loads(str(data["rng_state"])) if "rng_state" in data else None
    return params, opt, rng_state
