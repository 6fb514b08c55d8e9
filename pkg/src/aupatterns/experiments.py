"""Subject-independent fold construction and the training pipelines.

All pipelines in one suite share a single FoldPlan built on subject ids, so
no person's frames ever appear on both sides of a split; that invariant is
asserted at runtime, not sampled. Metrics are always pooled over the
concatenated test predictions of all folds.

Pipelines:
  * multi-AU detection: one k-unit sigmoid detector per fold.
  * single-AU detection: an independent 1-unit detector per AU per fold,
    reusing the multi-AU architecture.
  * pattern pretraining: restrict to a min-count pattern codebook, then train
    (a) a direct multi-label detector, (b) a pattern-class softmax model, and
    (c) a frozen-feature split of (b) with a fresh dense(400)+sigmoid(12)
    head.
  * all-pattern training: direct detector and split-head detector (features
    reused frozen from a pattern-pretraining run) on the full table.
  * unseen-pattern evaluation: the pattern-class models decoded on frames
    whose patterns were never trainable classes.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from .annotations import AuRegistry, DatasetTable, FrameKey
from .metrics import FoldScores, MetricReport, pooled_report
from .mining import PatternCodebook, census, select_patterns_by_min_count, restrict
from .nn import (
    ModelSpec,
    ModelState,
    SigmoidHead,
    TrainConfig,
    forward,
    freeze_and_split,
    preset_compact_cnn,
    spec_digest,
    train,
)
from .synth import frame_key_string

__all__ = [
    "ProtocolViolation",
    "FoldPlan",
    "make_folds",
    "RunManifest",
    "ExperimentRun",
    "PatternPretrainResult",
    "decode_to_au",
    "run_multi_au",
    "run_single_au",
    "run_pattern_pretrain",
    "run_all_patterns",
    "eval_unseen",
    "default_spec_factory",
    "save_fold_scores",
    "load_fold_scores",
]


class ProtocolViolation(RuntimeError):
    """A subject appeared on both sides of a train/test split."""


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic partition of the subject set into k folds."""

    folds: tuple[tuple[str, ...], ...]
    seed: int

    def __post_init__(self):
        all_subjects = [s for fold in self.folds for s in fold]
        if len(all_subjects) != len(set(all_subjects)):
            raise ValueError("folds must be pairwise disjoint")
        if any(not fold for fold in self.folds):
            raise ValueError("folds must be non-empty")

    @property
    def k(self) -> int:
        return len(self.folds)

    def subjects(self) -> frozenset[str]:
        return frozenset(s for fold in self.folds for s in fold)

    def plan_hash(self) -> str:
        blob = json.dumps([list(f) for f in self.folds]).encode()
        return hashlib.sha256(blob).hexdigest()


def make_folds(subject_ids: Sequence[str], k: int = 3, seed: int = 0) -> FoldPlan:
    """Seeded shuffle into k near-equal folds (sizes differ by at most 1)."""
    subjects = sorted(set(subject_ids))
    if len(subjects) < k:
        raise ValueError(f"need at least {k} subjects, got {len(subjects)}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    n, rem = divmod(len(order), k)
    folds = []
    pos = 0
    for i in range(k):
        size = n + (1 if i < rem else 0)
        folds.append(tuple(sorted(order[pos : pos + size])))
        pos += size
    return FoldPlan(tuple(folds), seed)


@dataclass
class RunManifest:
    experiment_id: str
    seed: int
    config: dict
    spec_digests: dict[str, str]
    fold_subjects: list[list[str]]
    plan_hash: str
    codebook_bits: list[str] | None
    notes: list[str]
    created_at: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _new_manifest(experiment_id, cfg, plan, spec_digests, codebook=None, notes=()):
    return RunManifest(
        experiment_id=experiment_id,
        seed=cfg.seed,
        config=asdict(cfg),
        spec_digests=dict(spec_digests),
        fold_subjects=[list(f) for f in plan.folds],
        plan_hash=plan.plan_hash(),
        codebook_bits=codebook.describe() if codebook is not None else None,
        notes=list(notes),
        created_at=datetime.now(timezone.utc).isoformat(),
    )


@dataclass
class ExperimentRun:
    experiment_id: str
    plan: FoldPlan
    report: MetricReport
    folds: list[FoldScores]
    models: list[tuple[ModelSpec, ModelState]]
    manifest: RunManifest


@dataclass
class PatternPretrainResult:
    codebook: PatternCodebook
    plan: FoldPlan
    in_table: DatasetTable
    out_table: DatasetTable
    direct: ExperimentRun
    pattern: ExperimentRun
    split: ExperimentRun
    f1_binary_variance: dict[str, float]


# ---------------------------------------------------------------------------
# data plumbing

def _arrays(table: DatasetTable, images: dict[str, np.ndarray]):
    keys = table.keys()
    try:
        X = np.stack([images[frame_key_string(k)] for k in keys])
    except KeyError as e:
        raise KeyError(f"no image for frame {e}") from None
    X = X[:, None, :, :]  # single channel
    Y = table.pattern_matrix().astype(np.float64)
    return keys, X, Y


def _split_masks(keys: Sequence[FrameKey], plan: FoldPlan, fold_i: int):
    test_subjects = set(plan.folds[fold_i])
    train_subjects = plan.subjects() - test_subjects
    overlap = test_subjects & train_subjects
    if overlap:
        raise ProtocolViolation(f"subjects on both sides: {sorted(overlap)}")
    subs = np.array([k[0] for k in keys])
    test = np.isin(subs, sorted(test_subjects))
    train = np.isin(subs, sorted(train_subjects))
    if np.any(test & train):
        raise ProtocolViolation("a frame landed in both partitions")
    return train, test


def default_spec_factory(
    input_shape: tuple[int, int, int],
    seed: int = 0,
    conv_channels: Sequence[int] = (6, 12),
    dense_units: Sequence[int] = (32,),
    dropout_rate: float = 0.0,
) -> Callable[[str, int], ModelSpec]:
    """Architecture family used by the pipelines: same trunk, varying head."""

    def make(head: str, units: int) -> ModelSpec:
        return preset_compact_cnn(
            input_shape,
            units,
            head=head,
            conv_channels=conv_channels,
            dense_units=dense_units,
            dropout_rate=dropout_rate,
            seed=seed,
        )

    return make


def _train_eval_fold(spec, cfg, X, Y, keys, train_mask, test_mask, truth):
    """Train on the train side, score the test side; returns FoldScores and
    the trained state."""
    if not train_mask.any():
        raise ValueError("fold has no training frames")
    if not test_mask.any():
        raise ValueError("fold has no test frames")
    state, _ = train(spec, (X[train_mask], Y[train_mask]), cfg)
    probs = forward(spec, state, X[test_mask], mode="eval")
    fold_keys = tuple(k for k, m in zip(keys, test_mask) if m)
    return FoldScores(fold_keys, truth[test_mask].astype(np.uint8), probs), state


# ---------------------------------------------------------------------------
# multi-AU detection

def run_multi_au(
    table: DatasetTable,
    images: dict[str, np.ndarray],
    spec: ModelSpec,
    cfg: TrainConfig,
    plan: FoldPlan,
    experiment_id: str = "exp1",
) -> ExperimentRun:
    """Per fold, train a k-unit sigmoid detector on the other folds' subjects
    and score the held-out subjects; report pooled over all folds."""
    head = spec.head
    if not isinstance(head, SigmoidHead) or head.units != table.registry.k:
        raise ValueError(
            f"multi-AU detection needs a {table.registry.k}-unit sigmoid head"
        )
    keys, X, Y = _arrays(table, images)
    folds, models = [], []
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        fs, state = _train_eval_fold(spec, cfg, X, Y, keys, train_mask, test_mask, Y)
        folds.append(fs)
        models.append((spec, state))
    report = pooled_report(folds, table.registry, cfg.threshold, provenance=experiment_id)
    manifest = _new_manifest(experiment_id, cfg, plan, {"detector": spec_digest(spec)})
    return ExperimentRun(experiment_id, plan, report, folds, models, manifest)


# ---------------------------------------------------------------------------
# single-AU detection

def _single_au_head_spec(spec: ModelSpec) -> ModelSpec:
    if not isinstance(spec.head, SigmoidHead):
        raise ValueError("single-AU detection derives from a sigmoid-head spec")
    return ModelSpec(spec.input_shape, spec.layers[:-1] + (SigmoidHead(1),), spec.seed)


def _run_one_au(args):
    au_index, au_code, spec, cfg, X, Y, keys, plan = args
    y = Y[:, au_index : au_index + 1]
    folds, models = [], []
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        fs, state = _train_eval_fold(spec, cfg, X, y, keys, train_mask, test_mask, y)
        folds.append(fs)
        models.append((spec, state))
    return au_code, folds, models


def run_single_au(
    table: DatasetTable,
    images: dict[str, np.ndarray],
    base_spec: ModelSpec,
    cfg: TrainConfig,
    plan: FoldPlan,
    jobs: int = 1,
    experiment_id: str = "exp2",
) -> dict[int, ExperimentRun]:
    """One independent 1-unit detector per AU, same folds as multi-AU.

    Each per-AU model sees only its own AU's labels. Returns one pooled
    report per AU.
    """
    keys, X, Y = _arrays(table, images)
    spec1 = _single_au_head_spec(base_spec)
    registry = table.registry
    tasks = [
        (j, code, spec1, cfg, X, Y, keys, plan) for j, code in enumerate(registry.codes)
    ]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one_au, tasks))
    else:
        results = [_run_one_au(t) for t in tasks]
    out: dict[int, ExperimentRun] = {}
    for au_code, folds, models in results:
        single = AuRegistry((au_code,))
        report = pooled_report(folds, single, cfg.threshold, provenance=f"{experiment_id}:AU{au_code}")
        manifest = _new_manifest(
            experiment_id, cfg, plan, {"detector": spec_digest(spec1)},
            notes=[f"AU{au_code} detector"],
        )
        out[au_code] = ExperimentRun(experiment_id, plan, report, folds, models, manifest)
    return out


# ---------------------------------------------------------------------------
# pattern-class decoding

def decode_to_au(probs: np.ndarray, codebook: PatternCodebook):
    """Map pattern-class probabilities to per-AU labels and scores.

    Hard labels are the bits of the argmax class (ties resolve to the lowest
    class index); the per-AU score is the summed probability of all classes
    with that AU active (the marginal), which feeds AUC.
    """
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != len(codebook):
        raise ValueError(
            f"probabilities shape {probs.shape} does not match codebook size {len(codebook)}"
        )
    bits = codebook.bits_matrix()  # (K, k)
    hard = bits[probs.argmax(axis=1)].astype(np.uint8)
    marginals = probs @ bits
    return hard, marginals


# ---------------------------------------------------------------------------
# pattern pretraining

def run_pattern_pretrain(
    table: DatasetTable,
    images: dict[str, np.ndarray],
    cfg: TrainConfig,
    min_count: int,
    make_spec: Callable[[str, int], ModelSpec] | None = None,
    plan: FoldPlan | None = None,
    dense_units: int = 400,
    experiment_id: str = "exp3",
) -> PatternPretrainResult:
    """Restrict to the min-count codebook, then train the three roles.

    The codebook is built on the full table (recorded in the manifest); folds
    are subject-level over the full table so rare classes may be absent from
    a fold's training side, which is flagged in the notes rather than fatal.
    """
    k = table.registry.k
    codebook = select_patterns_by_min_count(census(table), min_count)
    if len(codebook) < 2:
        raise ValueError(f"min_count={min_count} keeps only {len(codebook)} pattern")
    in_table, out_table = restrict(table, codebook)
    if plan is None:
        plan = make_folds(table.subjects(), seed=cfg.seed)
    keys, X, Y = _arrays(in_table, images)
    class_of = {p: i for i, p in enumerate(codebook.patterns)}
    classes = np.array([class_of[f.pattern] for f in in_table.frames])
    notes = ["codebook built on the full table before fold restriction"]

    if make_spec is None:
        side = X.shape[-1]
        make_spec = default_spec_factory((1, side, side), seed=cfg.seed)

    # (a) direct multi-label detector on the restricted table
    direct_spec = make_spec("sigmoid", k)
    direct_folds, direct_models = [], []
    bce_cfg = replace(cfg, loss="bce")
    cce_cfg = replace(cfg, loss="cce")
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        fs, state = _train_eval_fold(direct_spec, bce_cfg, X, Y, keys, train_mask, test_mask, Y)
        direct_folds.append(fs)
        direct_models.append((direct_spec, state))
    direct_report = pooled_report(direct_folds, table.registry, cfg.threshold,
                                  provenance=f"{experiment_id}:direct")

    # (b) pattern-class softmax model
    pattern_spec = make_spec("softmax", len(codebook))
    pattern_folds, pattern_models = [], []
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        present = np.unique(classes[train_mask])
        missing = sorted(set(range(len(codebook))) - set(present.tolist()))
        if missing:
            notes.append(f"fold {i}: classes with no training instances: {missing}")
        state, _ = train(pattern_spec, (X[train_mask], classes[train_mask]), cce_cfg)
        probs = forward(pattern_spec, state, X[test_mask], mode="eval")
        hard, marginals = decode_to_au(probs, codebook)
        fold_keys = tuple(kk for kk, m in zip(keys, test_mask) if m)
        pattern_folds.append(
            FoldScores(fold_keys, Y[test_mask].astype(np.uint8), marginals, pred=hard)
        )
        pattern_models.append((pattern_spec, state))
    pattern_report = pooled_report(pattern_folds, table.registry, cfg.threshold,
                                   provenance=f"{experiment_id}:pattern")

    # (c) frozen-feature split of (b) retrained as a k-unit detector
    split_folds, split_models = [], []
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        sspec, sstate = freeze_and_split(
            pattern_spec, pattern_models[i][1], dense_units=dense_units, head_units=k
        )
        state, _ = train(sspec, (X[train_mask], Y[train_mask]), bce_cfg, state=sstate)
        probs = forward(sspec, state, X[test_mask], mode="eval")
        fold_keys = tuple(kk for kk, m in zip(keys, test_mask) if m)
        split_folds.append(FoldScores(fold_keys, Y[test_mask].astype(np.uint8), probs))
        split_models.append((sspec, state))
    split_report = pooled_report(split_folds, table.registry, cfg.threshold,
                                 provenance=f"{experiment_id}:split")

    from .analytics import variance

    f1_var = {
        "direct": variance(direct_report.values("f1_binary")),
        "pattern": variance(pattern_report.values("f1_binary")),
        "split": variance(split_report.values("f1_binary")),
    }
    digests = {
        "direct": spec_digest(direct_spec),
        "pattern": spec_digest(pattern_spec),
        "split": spec_digest(split_models[0][0]),
    }
    manifest = _new_manifest(experiment_id, cfg, plan, digests, codebook, notes)

    def to_run(rid, report, folds, models):
        return ExperimentRun(rid, plan, report, folds, models, manifest)

    return PatternPretrainResult(
        codebook=codebook,
        plan=plan,
        in_table=in_table,
        out_table=out_table,
        direct=to_run(f"{experiment_id}:direct", direct_report, direct_folds, direct_models),
        pattern=to_run(f"{experiment_id}:pattern", pattern_report, pattern_folds, pattern_models),
        split=to_run(f"{experiment_id}:split", split_report, split_folds, split_models),
        f1_binary_variance=f1_var,
    )


# ---------------------------------------------------------------------------
# all-pattern training

def run_all_patterns(
    table: DatasetTable,
    images: dict[str, np.ndarray],
    cfg: TrainConfig,
    pattern_models: Sequence[tuple[ModelSpec, ModelState]],
    plan: FoldPlan,
    codebook: PatternCodebook,
    make_spec: Callable[[str, int], ModelSpec] | None = None,
    experiment_id: str = "exp4",
) -> dict[str, ExperimentRun]:
    """Direct and split-head detectors on the full table.

    The split-head detector reuses, frozen, the convolutional weights of the
    pattern classifier trained by a pretraining run (fold by fold); the fold
    plan must be that run's plan. No pattern-class model is trained here:
    the full table's rare classes lack the instances for one.
    """
    if not pattern_models:
        raise ValueError("all-pattern training needs a pattern-pretraining run")
    if len(pattern_models) != plan.k:
        raise ValueError("need one pretrained pattern model per fold")
    if not plan.subjects() >= set(table.subjects()):
        raise ProtocolViolation("fold plan does not cover the table's subjects")
    k = table.registry.k
    keys, X, Y = _arrays(table, images)
    if make_spec is None:
        side = X.shape[-1]
        make_spec = default_spec_factory((1, side, side), seed=cfg.seed)
    bce_cfg = replace(cfg, loss="bce")

    direct_spec = make_spec("sigmoid", k)
    direct_folds, direct_models = [], []
    split_folds, split_models = [], []
    for i in range(plan.k):
        train_mask, test_mask = _split_masks(keys, plan, i)
        fs, state = _train_eval_fold(direct_spec, bce_cfg, X, Y, keys, train_mask, test_mask, Y)
        direct_folds.append(fs)
        direct_models.append((direct_spec, state))

        pspec, pstate = pattern_models[i]
        sspec, sstate = freeze_and_split(pspec, pstate, head_units=k)
        state, _ = train(sspec, (X[train_mask], Y[train_mask]), bce_cfg, state=sstate)
        probs = forward(sspec, state, X[test_mask], mode="eval")
        fold_keys = tuple(kk for kk, m in zip(keys, test_mask) if m)
        split_folds.append(FoldScores(fold_keys, Y[test_mask].astype(np.uint8), probs))
        split_models.append((sspec, state))

    direct_report = pooled_report(direct_folds, table.registry, cfg.threshold,
                                  provenance=f"{experiment_id}:direct")
    split_report = pooled_report(split_folds, table.registry, cfg.threshold,
                                 provenance=f"{experiment_id}:split")
    digests = {
        "direct": spec_digest(direct_spec),
        "split": spec_digest(split_models[0][0]),
    }
    manifest = _new_manifest(experiment_id, cfg, plan, digests, codebook,
                             notes=["split features reused frozen from pattern classifier"])
    return {
        "direct": ExperimentRun(f"{experiment_id}:direct", plan, direct_report,
                                direct_folds, direct_models, manifest),
        "split": ExperimentRun(f"{experiment_id}:split", plan, split_report,
                               split_folds, split_models, manifest),
    }


# ---------------------------------------------------------------------------
# unseen patterns

def eval_unseen(
    pattern_models: Sequence[tuple[ModelSpec, ModelState]],
    plan: FoldPlan,
    out_table: DatasetTable,
    images: dict[str, np.ndarray],
    codebook: PatternCodebook,
    cfg: TrainConfig,
    experiment_id: str = "unseen",
) -> ExperimentRun:
    """Score frames whose patterns were never trainable classes.

    Each fold's pattern classifier decodes only the held-out subjects' frames
    of the out-partition, keeping the protocol subject-independent; reports
    are pooled as usual.
    """
    if len(out_table) == 0:
        raise ValueError("out_table is empty: every pattern was a trainable class")
    for f in out_table.frames:
        if f.pattern in codebook:
            raise ValueError(f"frame {f.key} has a codebook pattern; not unseen")
    if len(pattern_models) != plan.k:
        raise ValueError("need one pattern model per fold")
    keys, X, Y = _arrays(out_table, images)
    folds = []
    for i in range(plan.k):
        _, test_mask = _split_masks(keys, plan, i)
        if not test_mask.any():
            continue
        pspec, pstate = pattern_models[i]
        probs = forward(pspec, pstate, X[test_mask], mode="eval")
        hard, marginals = decode_to_au(probs, codebook)
        fold_keys = tuple(kk for kk, m in zip(keys, test_mask) if m)
        folds.append(
            FoldScores(fold_keys, Y[test_mask].astype(np.uint8), marginals, pred=hard)
        )
    report = pooled_report(folds, out_table.registry, cfg.threshold, provenance=experiment_id)
    manifest = _new_manifest(experiment_id, cfg, plan,
                             {"pattern": spec_digest(pattern_models[0][0])},
                             codebook,
                             notes=["evaluation on non-codebook patterns only"])
    return ExperimentRun(experiment_id, plan, report, folds,
                         list(pattern_models), manifest)


# ---------------------------------------------------------------------------
# fold-score persistence (for bit-identical report recomputation)

def save_fold_scores(path, folds: Sequence[FoldScores]) -> None:
    arrays: dict[str, np.ndarray] = {"n_folds": np.array(len(folds))}
    for i, f in enumerate(folds):
        arrays[f"fold{i}_subject"] = np.array([k[0] for k in f.keys])
        arrays[f"fold{i}_task"] = np.array([k[1] for k in f.keys])
        arrays[f"fold{i}_frame"] = np.array([k[2] for k in f.keys])
        arrays[f"fold{i}_truth"] = f.truth
        arrays[f"fold{i}_scores"] = f.scores
        if f.pred is not None:
            arrays[f"fold{i}_pred"] = f.pred
    np.savez(path, **arrays)


def load_fold_scores(path) -> list[FoldScores]:
    data = np.load(path, allow_pickle=False)
    out = []
    for i in range(int(data["n_folds"])):
        keys = tuple(
            (str(s), str(t), int(fr))
            for s, t, fr in zip(
                data[f"fold{i}_subject"], data[f"fold{i}_task"], data[f"fold{i}_frame"]
            )
        )
        pred = data[f"fold{i}_pred"] if f"fold{i}_pred" in data else None
        out.append(FoldScores(keys, data[f"fold{i}_truth"], data[f"fold{i}_scores"], pred))
    return out
