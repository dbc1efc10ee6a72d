"""Physician twin: imitation and optimal treatment-decision heads.

A shared encoder embeds the 66-slot patient state with a learned position
token per decision stage (0=IC, 1=CC, 2=ND), then one transformer block
cross-attends to an encoded memory of the training cohort at that stage.
Two sigmoid heads read the resulting embedding: the imitation head is
trained on the decisions physicians actually made, the optimal head on
labels found by exhaustively simulating all eight treatment sequences and
scoring each with a weighted toxicity/survival objective.

Both heads train jointly with binary cross-entropy plus a triplet loss
that pulls patients treated with the same sequence together in embedding
space. The stored embeddings double as the similarity space used by the
neighbor-search module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from .cohort import (
    DLT_KINDS,
    STATE_WIDTH,
    CohortRecord,
    FeatureEncoder,
    PatientFeatures,
    TreatmentSequence,
)
from .nn.autodiff import (
    ConfigError,
    Tensor,
    UsageError,
    concat,
    dropout,
    matmul,
    mean,
    narrow,
    no_grad,
    relu,
    softplus,
    sqrt,
    sum_,
)
from .nn.layers import DropoutSpec, EncoderBlock, Linear, Module
from .simulator import (
    ALL_SEQUENCES,
    ENDPOINTS,
    SimulatorModels,
    _fit,
    _split_rows,
    mixture_median,
    rollout_batch,
)

__all__ = [
    "STAGES",
    "TripletConfig",
    "OptimalObjectiveWeights",
    "PolicyConfig",
    "PolicyModel",
    "PolicyOutput",
    "compute_optimal_labels",
    "fit_policy",
    "predict_policy",
    "sequence_outcomes",
    "shuffle_baseline_columns",
    "triplet_term",
]

STAGES = ("ic", "cc", "nd")
BINARY_OUTCOMES = ("ft", "aspiration") + DLT_KINDS

# slots 0..37 of the state vector are pre-treatment; decisions sit at 38-39
# and observed transitions at 40-65, and augmentation must never touch them
_BASELINE_SLOTS = 38


@dataclass(frozen=True)
class TripletConfig:
    """Weights for the dual loss: w1 scales BCE, w2 the triplet hinge."""

    w1: float = 1.0
    w2: float = 0.2
    margin: float = 1.0

    def __post_init__(self):
        for name in ("w1", "w2", "margin"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"triplet {name} must be >= 0")


@dataclass(frozen=True)
class OptimalObjectiveWeights:
    """User weights for the simulated objective.

    The objective for one sequence is
    w_tox * sum_z binary[z] * P(z=1) + w_s * sum_o temporal[o] / median(o),
    where z ranges over feeding tube, aspiration, and the five DLT kinds
    (probability of the DLT at either stage), and o over the time-to-event
    endpoints.
    """

    w_tox: float = 1.0
    w_s: float = 1.0
    binary: dict = field(default_factory=lambda: {k: 1.0 for k in BINARY_OUTCOMES})
    temporal: dict = field(default_factory=lambda: {e: 1.0 for e in ENDPOINTS})

    def __post_init__(self):
        if set(self.binary) != set(BINARY_OUTCOMES):
            unknown = sorted(set(self.binary) ^ set(BINARY_OUTCOMES))
            raise ConfigError(f"binary weight keys must be {BINARY_OUTCOMES}; "
                              f"mismatch on {unknown}")
        if set(self.temporal) != set(ENDPOINTS):
            unknown = sorted(set(self.temporal) ^ set(ENDPOINTS))
            raise ConfigError(f"temporal weight keys must be {ENDPOINTS}; "
                              f"mismatch on {unknown}")
        values = [self.w_tox, self.w_s, *self.binary.values(), *self.temporal.values()]
        if any(v < 0.0 for v in values):
            raise ConfigError("objective weights must be >= 0")
        if max(values) <= 0.0:
            raise ConfigError("at least one objective weight must be positive")


@dataclass(frozen=True)
class PolicyConfig:
    width: int = 1000
    heads: int = 4
    ffn_hidden: int = 1000
    head_hidden: int = 20
    lr: float = 1e-3
    weight_decay: float = 1e-3
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 64
    val_fraction: float = 0.2
    augment_prob: float = 0.25
    attention_orientation: str = "standard"
    dropout: DropoutSpec = field(default_factory=lambda: DropoutSpec(0.10, 0.25))
    triplet: TripletConfig = field(default_factory=TripletConfig)

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ConfigError(f"width {self.width} not divisible by {self.heads} heads")
        if self.attention_orientation not in ("standard", "paper"):
            raise ConfigError(
                f"attention_orientation {self.attention_orientation!r} "
                "must be 'standard' or 'paper'")
        if not 0.0 <= self.augment_prob <= 1.0:
            raise ConfigError(f"augment_prob {self.augment_prob} outside [0, 1]")


@dataclass
class PolicyOutput:
    probability: float
    stage: str
    strategy: str
    embedding: np.ndarray


class _Head(Module):
    """Linear(width -> 20) -> ReLU -> Linear(20 -> 1); callers apply sigmoid."""

    def __init__(self, width: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.fc = Linear(width, hidden, rng)
        self.out = Linear(hidden, 1, rng)

    def __call__(self, h: Tensor) -> Tensor:
        return self.out(relu(self.fc(h)))


class PolicyModel(Module):
    """Shared encoder with per-stage cohort memory and two decision heads."""

    def __init__(self, rng: np.random.Generator, config: PolicyConfig | None = None):
        super().__init__()
        self.config = config or PolicyConfig()
        width = self.config.width
        self.embed = Linear(STATE_WIDTH, width, rng)
        # small nonzero init so the stage token shifts the embedding from
        # the first step onward
        self.position = Tensor(rng.normal(0.0, 0.02, size=(3, width)),
                               requires_grad=True, name="position")
        self.block = EncoderBlock(width, self.config.heads,
                                  self.config.ffn_hidden, rng)
        self.imitation = _Head(width, self.config.head_hidden, rng)
        self.optimal = _Head(width, self.config.head_hidden, rng)
        self.memory_ic = np.zeros((0, width))
        self.memory_cc = np.zeros((0, width))
        self.memory_nd = np.zeros((0, width))
        self.encoder: FeatureEncoder | None = None
        self.trained = False

    def memory(self, stage: int) -> np.ndarray:
        return getattr(self, f"memory_{STAGES[stage]}")

    def set_memory(self, stage: int, encoded: np.ndarray):
        setattr(self, f"memory_{STAGES[stage]}", np.asarray(encoded, dtype=np.float64))

    def encode_states(self, states, stage: int,
                      mask_rng: np.random.Generator | None = None) -> Tensor:
        """Linear embedding plus the stage's position token (pre-attention).

        Accepts an array or an existing Tensor (attribution paths need the
        graph to reach back to their own input node).
        """
        if isinstance(states, Tensor):
            x = states
        else:
            x = Tensor(np.atleast_2d(np.asarray(states, dtype=np.float64)))
        if mask_rng is not None:
            x = dropout(x, self.config.dropout.input_rate, mask_rng, True)
        onehot = np.zeros((x.shape[0], 3))
        onehot[:, stage] = 1.0
        return self.embed(x) + matmul(Tensor(onehot), self.position)

    def embed_states(self, states: np.ndarray, stage: int,
                     mask_rng: np.random.Generator | None = None) -> Tensor:
        """Pre-head embedding after cross-attention over the cohort memory."""
        q = self.encode_states(states, stage, mask_rng)
        mem = self.memory(stage)
        if mem.shape[0] == 0:
            raise UsageError(f"cohort memory for stage {STAGES[stage]!r} is empty; "
                             "fit the model first")
        m = Tensor(mem)
        if self.config.attention_orientation == "standard":
            return self.block(q, m, m)
        # paper orientation: the stored cohort acts as the query and attends
        # to the single new patient; rows are then mean-pooled per patient
        rows = []
        for i in range(q.shape[0]):
            qi = narrow(q, 0, i, 1)
            rows.append(mean(self.block(m, qi, qi), axis=0, keepdims=True))
        return concat(rows, axis=0)

    def head_logits(self, states: np.ndarray, stage: int, strategy: str,
                    mask_rng: np.random.Generator | None = None) -> Tensor:
        h = self.embed_states(states, stage, mask_rng)
        if mask_rng is not None:
            h = dropout(h, self.config.dropout.penultimate_rate, mask_rng, True)
        head = self.imitation if strategy == "imitation" else self.optimal
        return head(h)

    def load_state_arrays(self, arrays: dict):
        # memory size depends on the training cohort, so rebuild those
        # buffers instead of copying into the (empty) placeholders
        for stage in STAGES:
            key = f"buffer.memory_{stage}"
            if key in arrays:
                setattr(self, f"memory_{stage}",
                        np.array(arrays[key], dtype=np.float64))
        rest = {k: v for k, v in arrays.items()
                if not k.startswith("buffer.memory_")}
        super().load_state_arrays(rest)


# ---------------------------------------------------------------------------
# Optimal-label search


def sequence_outcomes(models: SimulatorModels, base: np.ndarray,
                      sequence: tuple[int, int, int]) -> tuple[dict, dict]:
    """Expected-mode rollout summarized for the objective.

    Returns (binary probabilities keyed by BINARY_OUTCOMES, median months
    keyed by endpoint) for a single baseline vector.
    """
    raw = rollout_batch(models, np.atleast_2d(base), sequence, mode="expected")
    d1, d2 = raw["d1"][0], raw["d2"][0]
    either = 1.0 - (1.0 - d1) * (1.0 - d2)
    binary = {"ft": float(raw["tox"][0, 0]), "aspiration": float(raw["tox"][0, 1])}
    binary.update({k: float(either[i]) for i, k in enumerate(DLT_KINDS)})
    medians = {e: mixture_median(pi[0], mu[0], sig[0])
               for e, (pi, mu, sig) in raw["mixtures"].items()}
    return binary, medians


def _objective(weights: OptimalObjectiveWeights, binary: dict, medians: dict) -> float:
    tox = sum(weights.binary[k] * binary[k] for k in BINARY_OUTCOMES)
    surv = sum(weights.temporal[e] / medians[e] for e in ENDPOINTS)
    return weights.w_tox * tox + weights.w_s * surv


def compute_optimal_labels(models: SimulatorModels, patient: PatientFeatures,
                           weights: OptimalObjectiveWeights | None = None,
                           ) -> TreatmentSequence:
    """Sequence minimizing the simulated toxicity/survival objective.

    All eight sequences are rolled out in expected mode. Ties prefer fewer
    treatments, then no-before-yes in stage order IC, CC, ND.
    """
    weights = weights or OptimalObjectiveWeights()
    base = models.encoder.encode_baseline(patient).reshape(1, -1)
    best_key = None
    best_seq = None
    for seq in ALL_SEQUENCES:
        binary, medians = sequence_outcomes(models, base, seq)
        value = _objective(weights, binary, medians)
        if not np.isfinite(value):
            raise ValueError(f"objective for sequence {seq} is not finite")
        key = (value, sum(seq), seq)
        if best_key is None or key < best_key:
            best_key, best_seq = key, seq
    return TreatmentSequence(*best_seq, provenance=("optimal",) * 3)


def _optimal_labels_batch(models: SimulatorModels, records: list[CohortRecord],
                          weights: OptimalObjectiveWeights) -> np.ndarray:
    """compute_optimal_labels for a whole cohort, one rollout per sequence."""
    base = np.stack([models.encoder.encode_baseline(r.features) for r in records])
    n = len(records)
    values = np.zeros((n, len(ALL_SEQUENCES)))
    for j, seq in enumerate(ALL_SEQUENCES):
        raw = rollout_batch(models, base, seq, mode="expected")
        either = 1.0 - (1.0 - raw["d1"]) * (1.0 - raw["d2"])
        tox = (weights.binary["ft"] * raw["tox"][:, 0]
               + weights.binary["aspiration"] * raw["tox"][:, 1]
               + either @ np.array([weights.binary[k] for k in DLT_KINDS]))
        surv = np.zeros(n)
        for e, (pi, mu, sig) in raw["mixtures"].items():
            w = weights.temporal[e]
            if w == 0.0:
                continue
            surv += w / np.array([mixture_median(pi[i], mu[i], sig[i])
                                  for i in range(n)])
        values[:, j] = weights.w_tox * tox + weights.w_s * surv
        if not np.all(np.isfinite(values[:, j])):
            raise ValueError(f"objective for sequence {seq} is not finite")
    # scan in tie-break order, keeping strictly better values only
    order = sorted(range(len(ALL_SEQUENCES)),
                   key=lambda j: (sum(ALL_SEQUENCES[j]), ALL_SEQUENCES[j]))
    best_value = np.full(n, np.inf)
    best = np.zeros((n, 3))
    for j in order:
        better = values[:, j] < best_value
        best_value[better] = values[better, j]
        best[better] = ALL_SEQUENCES[j]
    return best


# ---------------------------------------------------------------------------
# Training


def shuffle_baseline_columns(base_block: np.ndarray, rng: np.random.Generator,
                             prob: float) -> np.ndarray:
    """Independently shuffle each pre-treatment column with the given probability.

    Returns a copy; the caller splices it back into the state matrices so
    decision and transition columns stay untouched.
    """
    out = np.array(base_block, dtype=np.float64)
    for j in range(out.shape[1]):
        if rng.random() < prob:
            out[:, j] = out[rng.permutation(out.shape[0]), j]
    return out


def triplet_term(d_pos: float, d_neg: float, margin: float = 1.0) -> float:
    """Hinge max(d(a,b) - d(a,c) + margin, 0) for scalar distances."""
    return max(d_pos - d_neg + margin, 0.0)


def _pairwise_distance(a: Tensor, b: Tensor) -> Tensor:
    diff = a - b
    return sqrt(sum_(diff * diff, axis=1) + 1e-12)


def _triplet_pairs(class_ids: np.ndarray, rng: np.random.Generator):
    """Per-row positive/negative indices; -1 marks rows without a positive."""
    n = len(class_ids)
    pos = np.full(n, -1)
    neg = np.full(n, -1)
    for c in np.unique(class_ids):
        members = np.where(class_ids == c)[0]
        others = np.where(class_ids != c)[0]
        if len(members) < 2 or len(others) == 0:
            continue
        for i in members:
            pos[i] = rng.choice(members[members != i])
            neg[i] = rng.choice(others)
    return pos, neg


def _bce_sum(logits: Tensor, targets: np.ndarray) -> Tensor:
    y = Tensor(targets.reshape(logits.shape))
    return sum_(softplus(logits) - logits * y)


def fit_policy(train_records: list[CohortRecord], simulator: SimulatorModels,
               seed: int, config: PolicyConfig | None = None,
               weights: OptimalObjectiveWeights | None = None,
               freeze_encoder: bool = False) -> PolicyModel:
    """Train both decision heads jointly against physician and optimal labels.

    The optimal labels come from `compute_optimal_labels` once up front
    (the simulator is frozen). Each epoch refreshes the per-stage cohort
    memory from the current embedding weights, resamples triplet pairs,
    and reshuffles augmented baseline columns for the optimal head. With
    ``freeze_encoder`` only the two heads receive updates.
    """
    config = config or PolicyConfig()
    weights = weights or OptimalObjectiveWeights()
    encoder = simulator.encoder
    rng = np.random.default_rng(seed)
    init_rng, split_rng, fit_rng, aug_rng, trip_rng = rng.spawn(5)

    model = PolicyModel(init_rng, config)
    model.encoder = encoder

    n = len(train_records)
    states = [np.stack([encoder.encode_record_state(r, s) for r in train_records])
              for s in range(3)]
    imit = np.array([[r.sequence.ic, r.sequence.cc, r.sequence.nd]
                     for r in train_records], dtype=np.float64)
    optimal = _optimal_labels_batch(simulator, train_records, weights)
    seq_index = {seq: i for i, seq in enumerate(ALL_SEQUENCES)}
    class_ids = np.array([seq_index[r.sequence.as_tuple()] for r in train_records])

    tr, va = _split_rows(n, config.val_fraction, split_rng)
    tr_states = [s[tr] for s in states]
    tr_imit, tr_opt = imit[tr], optimal[tr]
    tr_classes = class_ids[tr]

    epoch_state: dict = {}

    def refresh_memory(rows_states):
        with no_grad():
            for s in range(3):
                model.set_memory(s, model.encode_states(rows_states[s], s).data)

    def on_epoch(_epoch):
        refresh_memory(tr_states)
        aug = [m.copy() for m in tr_states]
        shuffled = shuffle_baseline_columns(aug[0][:, :_BASELINE_SLOTS], aug_rng,
                                            config.augment_prob)
        for m in aug:
            m[:, :_BASELINE_SLOTS] = shuffled
        epoch_state["aug"] = aug
        epoch_state["pairs"] = _triplet_pairs(tr_classes, trip_rng)

    w1, w2 = config.triplet.w1, config.triplet.w2

    def batch_loss(idx, mask_rng):
        total = None
        anchor = None
        for s in range(3):
            logit_im = model.head_logits(tr_states[s][idx], s, "imitation", mask_rng)
            term = _bce_sum(logit_im, tr_imit[idx, s])
            logit_op = model.head_logits(epoch_state["aug"][s][idx], s, "optimal",
                                         mask_rng)
            term = term + _bce_sum(logit_op, tr_opt[idx, s])
            total = term if total is None else total + term
            if s == 2:
                anchor = model.embed_states(tr_states[s][idx], s, mask_rng)
        total = total * w1
        pos, neg = epoch_state["pairs"]
        valid = pos[idx] >= 0
        if w2 > 0.0 and valid.any():
            # invalid rows point at themselves; the 0/1 mask removes their
            # constant-margin hinge from both the loss and the gradient
            p_rows = np.where(valid, pos[idx], idx)
            n_rows = np.where(valid, neg[idx], idx)
            h_pos = model.embed_states(tr_states[2][p_rows], 2, mask_rng)
            h_neg = model.embed_states(tr_states[2][n_rows], 2, mask_rng)
            d_ab = _pairwise_distance(anchor, h_pos)
            d_ac = _pairwise_distance(anchor, h_neg)
            hinge = relu(d_ab - d_ac + config.triplet.margin)
            masked = hinge * Tensor(valid.astype(np.float64))
            total = total + sum_(masked) * (w2 * len(idx) / valid.sum())
        return total * (1.0 / len(idx))

    def val_loss():
        with no_grad():
            total = 0.0
            for s in range(3):
                for strategy, labels in (("imitation", imit), ("optimal", optimal)):
                    logits = model.head_logits(states[s][va], s, strategy)
                    y = labels[va, s].reshape(-1, 1)
                    total += float(np.sum(np.logaddexp(0.0, logits.data)
                                          - logits.data * y))
        return total / len(va)

    frozen = []
    if freeze_encoder:
        for name, p in list(model.named_parameters()):
            if not (name.startswith("imitation") or name.startswith("optimal")):
                p.requires_grad = False
                frozen.append(p)
    try:
        _fit(model, batch_loss, val_loss, len(tr), config, fit_rng,
             on_epoch=on_epoch)
    finally:
        for p in frozen:
            p.requires_grad = True

    # serving memory covers the full training cohort under the final weights
    refresh_memory(states)
    model.trained = True
    return model


# ---------------------------------------------------------------------------
# Prediction


def stage_state(model: PolicyModel, features: PatientFeatures, stage: str, *,
                ic=None, post_ic=None, cc=None, post_cc=None):
    """Validate the stage context and encode one patient state row.

    Later stages need the earlier decisions and observed (or simulated)
    transitions; a missing piece raises a usage error naming it.
    Returns (stage index, state row).
    """
    if not model.trained:
        raise UsageError("policy model is untrained; call fit_policy first")
    if stage not in STAGES:
        raise ConfigError(f"stage {stage!r} must be one of {STAGES}")
    s = STAGES.index(stage)
    missing = []
    if s >= 1:
        missing += [name for name, v in (("ic", ic), ("post_ic", post_ic))
                    if v is None]
    if s >= 2:
        missing += [name for name, v in (("cc", cc), ("post_cc", post_cc))
                    if v is None]
    if missing:
        raise UsageError(f"stage {stage!r} prediction missing: {', '.join(missing)}")
    state = model.encoder.encode_state(features, ic=ic, cc=cc,
                                       post_ic=post_ic, post_cc=post_cc)
    return s, state


def predict_policy(model: PolicyModel, features: PatientFeatures, stage: str,
                   strategy: str = "imitation", *, ic=None, post_ic=None,
                   cc=None, post_cc=None,
                   mask_rng: np.random.Generator | None = None) -> PolicyOutput:
    """Probability that a physician (or the optimizer) would treat at a stage."""
    if strategy not in ("imitation", "optimal"):
        raise ConfigError(f"strategy {strategy!r} must be 'imitation' or 'optimal'")
    s, state = stage_state(model, features, stage, ic=ic, post_ic=post_ic,
                           cc=cc, post_cc=post_cc)
    if mask_rng is None:
        with no_grad():
            h = model.embed_states(state.reshape(1, -1), s)
            head = model.imitation if strategy == "imitation" else model.optimal
            logit = head(h)
    else:
        h = model.embed_states(state.reshape(1, -1), s, mask_rng)
        head = model.imitation if strategy == "imitation" else model.optimal
        logit = head(dropout(h, model.config.dropout.penultimate_rate,
                             mask_rng, True))
    return PolicyOutput(probability=float(_sp.expit(logit.data[0, 0])),
                        stage=stage, strategy=strategy,
                        embedding=h.data[0].copy())
