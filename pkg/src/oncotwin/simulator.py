"""The patient twin: stage transitions, static toxicity, and survival mixtures.

Three model families share one MLP skeleton (two hidden layers of 500,
dropout 10% at the input and 50% at the penultimate layer, treatment
decisions concatenated after the penultimate dropout so they are never
masked out):

* post-IC and post-CC transition models (two 4-way response heads + five
  DLT sigmoids),
* a static model for feeding-tube and aspiration risk at six months,
* a survival-mixture network (one hidden layer of 100) emitting, per
  endpoint, six log-normal components (softmax weight, location, softplus
  scale) trained by censored maximum likelihood: events contribute
  log f(t), censored records log S(t).

Prediction-time dropout is controlled by passing a mask RNG: ``None``
means deterministic evaluation, a generator enables Monte-Carlo dropout.
Models never flip a global training flag, so concurrent prediction is safe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .cohort import (
    BASELINE_WIDTH,
    STABLE,
    TRANSITION_WIDTH,
    CohortError,
    CohortRecord,
    FeatureEncoder,
    TransitionState,
    transition_block,
)
from .nn.autodiff import (
    ConfigError,
    Tensor,
    UsageError,
    clip_min,
    concat,
    dropout,
    erf,
    log_softmax,
    logsumexp,
    relu,
    sigmoid,
    softplus,
    sum_,
)
from .nn.layers import DropoutSpec, Linear, Module
from .nn.optim import Adam

__all__ = [
    "SimulatorConfig",
    "TransitionModel",
    "TransitionDistribution",
    "StaticOutcomeModel",
    "SurvivalMixtureModel",
    "SimulatorModels",
    "Trajectory",
    "PredictionWithCI",
    "ENDPOINTS",
    "fit_transition",
    "fit_outcome_models",
    "fit_simulator",
    "predict_transition",
    "survival_curve",
    "mixture_median",
    "predict_with_ci",
    "rollout_sequence",
    "rollout_batch",
    "ALL_SEQUENCES",
]

ENDPOINTS = ("os", "lrc", "fdm")
ALL_SEQUENCES = tuple((ic, cc, nd) for ic in (0, 1) for cc in (0, 1) for nd in (0, 1))

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_POST_IC_WIDTH = BASELINE_WIDTH
_POST_CC_WIDTH = BASELINE_WIDTH + 1 + TRANSITION_WIDTH
_OUTCOME_WIDTH = BASELINE_WIDTH + 2 * TRANSITION_WIDTH


@dataclass(frozen=True)
class SimulatorConfig:
    hidden: int = 500
    mixture_hidden: int = 100
    components: int = 6
    lr: float = 1e-3
    weight_decay: float = 1e-3
    max_epochs: int = 300
    patience: int = 10
    batch_size: int = 64
    val_fraction: float = 0.2
    dropout: DropoutSpec = field(default_factory=lambda: DropoutSpec(0.10, 0.50))


class _TwinMLP(Module):
    """Shared skeleton: dropout-in, two ReLU layers, dropout, decision concat."""

    def __init__(self, in_dim: int, concat_dim: int, out_dim: int,
                 rng: np.random.Generator, hidden: int, spec: DropoutSpec):
        super().__init__()
        self.fc1 = Linear(in_dim, hidden, rng)
        self.fc2 = Linear(hidden, hidden, rng)
        self.head = Linear(hidden + concat_dim, out_dim, rng)
        self.spec = spec

    def __call__(self, x: Tensor, decisions: Tensor,
                 mask_rng: np.random.Generator | None = None) -> Tensor:
        training = mask_rng is not None
        h = dropout(x, self.spec.input_rate, mask_rng, training) if training else x
        h = relu(self.fc1(h))
        h = relu(self.fc2(h))
        if training:
            h = dropout(h, self.spec.penultimate_rate, mask_rng, training)
        return self.head(concat([h, decisions], axis=1))


@dataclass
class TransitionDistribution:
    """Per-stage response distribution: categorical responses + DLT Bernoullis."""

    primary: np.ndarray
    nodal: np.ndarray
    dlt: np.ndarray

    def as_block(self) -> np.ndarray:
        return np.concatenate([self.primary, self.nodal, self.dlt])

    def sample(self, rng: np.random.Generator) -> TransitionState:
        return TransitionState(
            primary_response=int(rng.choice(4, p=self.primary / self.primary.sum())),
            nodal_response=int(rng.choice(4, p=self.nodal / self.nodal.sum())),
            dlt=tuple(int(rng.random() < p) for p in self.dlt),
        )


class TransitionModel(Module):
    """Response/DLT model for one stage; the IC stage carries the
    no-treatment-implies-stable constraint."""

    def __init__(self, stage: str, rng: np.random.Generator, config: SimulatorConfig):
        super().__init__()
        if stage not in ("post_ic", "post_cc"):
            raise ConfigError(f"unknown transition stage {stage!r}")
        self.stage = stage
        in_dim = _POST_IC_WIDTH if stage == "post_ic" else _POST_CC_WIDTH
        self.core = _TwinMLP(in_dim, 1, 13, rng, config.hidden, config.dropout)
        self.trained = False
        self.history: dict[str, list[float]] = {}

    def forward_batch(self, states: np.ndarray, decisions: np.ndarray,
                      mask_rng=None) -> tuple[Tensor, Tensor, Tensor]:
        out = self.core(Tensor(states), Tensor(decisions.reshape(-1, 1)), mask_rng)
        from .nn.autodiff import narrow, softmax

        primary = softmax(narrow(out, 1, 0, 4), axis=-1)
        nodal = softmax(narrow(out, 1, 4, 4), axis=-1)
        dlt = sigmoid(narrow(out, 1, 8, 5))
        return primary, nodal, dlt

    def logits_batch(self, states: np.ndarray, decisions: np.ndarray,
                     mask_rng=None) -> Tensor:
        return self.core(Tensor(states), Tensor(decisions.reshape(-1, 1)), mask_rng)

    def predict_batch(self, states: np.ndarray, decisions: np.ndarray,
                      mask_rng=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.trained:
            raise UsageError(f"{self.stage} transition model is not trained")
        states = np.atleast_2d(states)
        decisions = np.asarray(decisions, dtype=np.float64).reshape(-1)
        primary, nodal, dlt = self.forward_batch(states, decisions, mask_rng)
        p, n, d = primary.data.copy(), nodal.data.copy(), dlt.data.copy()
        if self.stage == "post_ic":
            off = decisions == 0.0
            # untreated stage: disease assumed stable, no treatment toxicity
            p[off] = 0.0
            p[off, STABLE] = 1.0
            n[off] = 0.0
            n[off, STABLE] = 1.0
            d[off] = 0.0
        return p, n, d


def predict_transition(model: TransitionModel, patient_state: np.ndarray,
                       decision: int, mask_rng=None) -> TransitionDistribution:
    p, n, d = model.predict_batch(np.atleast_2d(patient_state),
                                  np.array([decision], dtype=np.float64), mask_rng)
    return TransitionDistribution(p[0], n[0], d[0])


class StaticOutcomeModel(Module):
    """Binary feeding-tube / aspiration risks at six months."""

    def __init__(self, rng: np.random.Generator, config: SimulatorConfig):
        super().__init__()
        self.core = _TwinMLP(_OUTCOME_WIDTH, 3, 2, rng, config.hidden, config.dropout)
        self.trained = False
        self.history: dict[str, list[float]] = {}

    def logits_batch(self, states: np.ndarray, decisions: np.ndarray,
                     mask_rng=None) -> Tensor:
        return self.core(Tensor(states), Tensor(decisions), mask_rng)

    def predict_batch(self, states: np.ndarray, decisions: np.ndarray,
                      mask_rng=None) -> np.ndarray:
        if not self.trained:
            raise UsageError("static outcome model is not trained")
        out = sigmoid(self.logits_batch(np.atleast_2d(states),
                                        np.atleast_2d(decisions), mask_rng))
        return out.data.copy()


class SurvivalMixtureModel(Module):
    """One hidden layer -> per-endpoint log-normal mixture parameters."""

    def __init__(self, rng: np.random.Generator, config: SimulatorConfig):
        super().__init__()
        self.k = config.components
        self.fc1 = Linear(_OUTCOME_WIDTH, config.mixture_hidden, rng)
        self.heads = [Linear(config.mixture_hidden + 3, 3 * self.k, rng)
                      for _ in ENDPOINTS]
        self.spec = config.dropout
        self.trained = False
        self.history: dict[str, list[float]] = {}

    def params_batch(self, states: np.ndarray, decisions: np.ndarray,
                     mask_rng=None) -> dict[str, tuple[Tensor, Tensor, Tensor]]:
        from .nn.autodiff import narrow, softmax

        x = Tensor(np.atleast_2d(states))
        d = Tensor(np.atleast_2d(decisions))
        training = mask_rng is not None
        h = dropout(x, self.spec.input_rate, mask_rng, training) if training else x
        h = relu(self.fc1(h))
        if training:
            h = dropout(h, self.spec.penultimate_rate, mask_rng, training)
        h = concat([h, d], axis=1)
        out = {}
        for endpoint, head in zip(ENDPOINTS, self.heads):
            raw = head(h)
            pi = softmax(narrow(raw, 1, 0, self.k), axis=-1)
            mu = narrow(raw, 1, self.k, self.k)
            sig = softplus(narrow(raw, 1, 2 * self.k, self.k)) + 1e-3
            out[endpoint] = (pi, mu, sig)
        return out

    def predict_params(self, states: np.ndarray, decisions: np.ndarray,
                       mask_rng=None) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
        if not self.trained:
            raise UsageError("survival mixture model is not trained")
        params = self.params_batch(states, decisions, mask_rng)
        return {e: (pi.data.copy(), mu.data.copy(), sig.data.copy())
                for e, (pi, mu, sig) in params.items()}

    def loglik_rows(self, params, endpoint: str, months: np.ndarray,
                    events: np.ndarray) -> Tensor:
        """Per-record censored log-likelihood for one endpoint."""
        pi, mu, sig = params[endpoint]
        log_t = np.log(months).reshape(-1, 1)
        z = (Tensor(log_t) - mu) / sig
        from .nn.autodiff import log

        log_pi = log(clip_min(pi, 1e-12))
        # event rows: log mixture density of t
        log_phi = z * z * (-0.5) - log(sig) - _LOG_SQRT_2PI
        log_f = logsumexp(log_pi + log_phi, axis=-1) - Tensor(log_t.ravel())
        # censored rows: log mixture survival at t
        surv_k = clip_min((1.0 - erf(z * (1.0 / np.sqrt(2.0)))) * 0.5, 1e-15)
        log_s = logsumexp(log_pi + log(surv_k), axis=-1)
        ev = Tensor(events.astype(np.float64))
        return log_f * ev + log_s * (1.0 - ev)


def survival_curve(pi: np.ndarray, mu: np.ndarray, sigma: np.ndarray,
                   grid: np.ndarray) -> np.ndarray:
    """S(t) = sum_k pi_k * (1 - Phi((ln t - mu_k) / sigma_k)) on a positive grid."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(grid <= 0.0):
        raise ValueError("time grid must be strictly positive")
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise ValueError("time grid must be strictly increasing")
    z = (np.log(grid)[:, None] - mu[None, :]) / sigma[None, :]
    # mixture weights can sum to 1 + eps after softmax; keep S in [0, 1]
    return np.clip((pi[None, :] * special.ndtr(-z)).sum(axis=1), 0.0, 1.0)


def mixture_median(pi: np.ndarray, mu: np.ndarray, sigma: np.ndarray,
                   lo: float = 1e-6, hi: float = 1e5) -> float:
    """Time where S(t) crosses 0.5, clamped to the search bracket."""

    def s(t):
        return float(survival_curve(pi, mu, sigma, np.array([t]))[0])

    if s(hi) > 0.5:
        return hi
    if s(lo) < 0.5:
        return lo
    return float(optimize.brentq(lambda t: s(t) - 0.5, lo, hi, xtol=1e-6))


@dataclass
class PredictionWithCI:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    samples: int
    level: float


def predict_with_ci(sample_fn, samples: int = 20, level: float = 0.95,
                    rng: np.random.Generator | None = None) -> PredictionWithCI:
    """Monte-Carlo dropout interval: mean point, empirical quantile bounds.

    ``sample_fn(rng)`` must return one stochastic prediction (any array
    shape). Bounds are clipped to bracket the point estimate so the
    invariant lower <= point <= upper survives heavy skew.
    """
    if samples < 20:
        raise ConfigError(f"MC-dropout needs at least 20 samples, got {samples}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"CI level {level} outside (0, 1)")
    rng = rng if rng is not None else np.random.default_rng()
    draws = np.stack([np.asarray(sample_fn(rng), dtype=np.float64)
                      for _ in range(samples)])
    point = draws.mean(axis=0)
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    lower = np.quantile(draws, lo_q, axis=0)
    upper = np.quantile(draws, hi_q, axis=0)
    return PredictionWithCI(point=point, lower=np.minimum(lower, point),
                            upper=np.maximum(upper, point),
                            samples=samples, level=level)


# ---------------------------------------------------------------------------
# Training helpers


def _snapshot(params: list[Tensor]) -> list[np.ndarray]:
    return [p.data.copy() for p in params]


def _restore(params: list[Tensor], saved: list[np.ndarray]):
    for p, s in zip(params, saved):
        p.data = s.copy()


def _fit(model: Module, batch_loss, val_loss, n_rows: int,
         config, rng: np.random.Generator, on_epoch=None):
    """Minibatch Adam with early stopping on validation loss.

    ``batch_loss(idx, mask_rng)`` returns the mean loss over the given row
    indices; ``val_loss()`` evaluates the held-aside rows without dropout.
    ``on_epoch(epoch)``, when given, runs before each epoch (memory or
    augmentation refresh). The best-validation weights are restored at the
    end.
    """
    names = [n for n, _ in model.named_parameters()]
    params = model.parameters()
    opt = Adam(params, lr=config.lr, weight_decay=config.weight_decay, names=names)
    best = np.inf
    best_state = _snapshot(params)
    bad = 0
    history = {"train": [], "val": []}
    batch = max(1, min(config.batch_size, n_rows))
    for epoch in range(config.max_epochs):
        if on_epoch is not None:
            on_epoch(epoch)
        order = rng.permutation(n_rows)
        epoch_loss = 0.0
        for start in range(0, n_rows, batch):
            idx = order[start:start + batch]
            opt.zero_grad()
            loss = batch_loss(idx, rng)
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(idx)
        vl = float(val_loss())
        history["train"].append(epoch_loss / n_rows)
        history["val"].append(vl)
        if vl < best - 1e-9:
            best = vl
            best_state = _snapshot(params)
            bad = 0
        else:
            bad += 1
            if bad >= config.patience:
                break
    _restore(params, best_state)
    model.history = history


def _split_rows(n: int, val_fraction: float, rng: np.random.Generator):
    order = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    n_val = min(n_val, n - 1)
    return order[n_val:], order[:n_val]


def _onehot(values: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(values), width))
    out[np.arange(len(values)), values] = 1.0
    return out


def _transition_loss(model: TransitionModel, states, decisions, targets, mask_rng):
    primary_t, nodal_t, dlt_t = targets
    logits = model.logits_batch(states, decisions, mask_rng)
    from .nn.autodiff import narrow

    n = states.shape[0]
    loss_p = -sum_(log_softmax(narrow(logits, 1, 0, 4), axis=-1) * Tensor(primary_t))
    loss_n = -sum_(log_softmax(narrow(logits, 1, 4, 4), axis=-1) * Tensor(nodal_t))
    dlt_logits = narrow(logits, 1, 8, 5)
    loss_d = sum_(softplus(dlt_logits) - dlt_logits * Tensor(dlt_t))
    return (loss_p + loss_n + loss_d) * (1.0 / n)


def fit_transition(train_records: list[CohortRecord], stage: str, seed: int,
                   encoder: FeatureEncoder,
                   config: SimulatorConfig | None = None) -> TransitionModel:
    """Train one stage's transition model with early stopping.

    The post-IC model sees the baseline vector and the IC decision; the
    post-CC model additionally sees the observed post-IC state.
    """
    config = config or SimulatorConfig()
    rng = np.random.default_rng(seed)
    init_rng, split_rng, mask_rng = rng.spawn(3)
    model = TransitionModel(stage, init_rng, config)

    if stage == "post_ic":
        states = np.stack([encoder.encode_baseline(r.features) for r in train_records])
        decisions = np.array([r.sequence.ic for r in train_records], dtype=np.float64)
        target_state = [r.post_ic for r in train_records]
    else:
        states = np.stack([
            np.concatenate([encoder.encode_baseline(r.features),
                            [r.sequence.ic], transition_block(r.post_ic)])
            for r in train_records])
        decisions = np.array([r.sequence.cc for r in train_records], dtype=np.float64)
        target_state = [r.post_cc for r in train_records]

    primary = np.array([t.primary_response for t in target_state])
    nodal = np.array([t.nodal_response for t in target_state])
    for head, values in (("primary", primary), ("nodal", nodal)):
        missing = sorted(set(range(4)) - set(values.tolist()))
        if missing:
            warnings.warn(f"{stage} {head} head: classes {missing} absent from "
                          "training data", stacklevel=2)
    targets = (_onehot(primary, 4), _onehot(nodal, 4),
               np.array([t.dlt for t in target_state], dtype=np.float64))

    tr, va = _split_rows(len(train_records), config.val_fraction, split_rng)
    tr_states, tr_dec = states[tr], decisions[tr]
    tr_targets = tuple(t[tr] for t in targets)
    va_args = (states[va], decisions[va], tuple(t[va] for t in targets))

    def batch_loss(idx, mrng):
        sub = tuple(t[idx] for t in tr_targets)
        return _transition_loss(model, tr_states[idx], tr_dec[idx], sub, mrng)

    _fit(model, batch_loss,
         lambda: _transition_loss(model, *va_args, None).item(),
         len(tr), config, mask_rng)
    model.trained = True
    return model


def fit_outcome_models(train_records: list[CohortRecord], seed: int,
                       encoder: FeatureEncoder,
                       config: SimulatorConfig | None = None):
    """Train the static toxicity model and the survival mixture."""
    config = config or SimulatorConfig()
    rng = np.random.default_rng(seed)
    init_s, init_m, split_rng, mask_s, mask_m = rng.spawn(5)

    states = np.stack([
        np.concatenate([encoder.encode_baseline(r.features),
                        transition_block(r.post_ic), transition_block(r.post_cc)])
        for r in train_records])
    decisions = np.array([[r.sequence.ic, r.sequence.cc, r.sequence.nd]
                          for r in train_records], dtype=np.float64)
    tox = np.array([[r.outcomes.ft, r.outcomes.aspiration_post]
                    for r in train_records], dtype=np.float64)
    months = {e: np.array([getattr(r.outcomes, f"{e}_months") for r in train_records])
              for e in ENDPOINTS}
    events = {e: np.array([getattr(r.outcomes, f"{e}_event") for r in train_records])
              for e in ENDPOINTS}
    for e in ENDPOINTS:
        if events[e].sum() == 0:
            raise CohortError(f"endpoint {e} is fully censored; cannot fit mixture")

    tr, va = _split_rows(len(train_records), config.val_fraction, split_rng)

    static = StaticOutcomeModel(init_s, config)

    def static_loss(idx, mask_rng):
        logits = static.logits_batch(states[idx], decisions[idx], mask_rng)
        y = Tensor(tox[idx])
        return sum_(softplus(logits) - logits * y) * (1.0 / len(idx))

    _fit(static,
         lambda idx, mrng: static_loss(tr[idx], mrng),
         lambda: static_loss(va, None).item(),
         len(tr), config, mask_s)
    static.trained = True

    mixture = SurvivalMixtureModel(init_m, config)
    # seed each component's location at a quantile of the observed event
    # log-times; a zero start (median of one month) is too far off to reach
    for endpoint, head in zip(ENDPOINTS, mixture.heads):
        ev_log_t = np.log(months[endpoint][events[endpoint] == 1])
        qs = np.quantile(ev_log_t, (np.arange(mixture.k) + 0.5) / mixture.k)
        head.bias.data[mixture.k:2 * mixture.k] = qs

    def mixture_loss(idx, mask_rng):
        params = mixture.params_batch(states[idx], decisions[idx], mask_rng)
        total = None
        for e in ENDPOINTS:
            ll = sum_(mixture.loglik_rows(params, e, months[e][idx], events[e][idx]))
            total = ll if total is None else total + ll
        return total * (-1.0 / len(idx))

    _fit(mixture,
         lambda idx, mrng: mixture_loss(tr[idx], mrng),
         lambda: mixture_loss(va, None).item(),
         len(tr), config, mask_m)
    mixture.trained = True
    return static, mixture


@dataclass
class SimulatorModels:
    encoder: FeatureEncoder
    post_ic: TransitionModel
    post_cc: TransitionModel
    static: StaticOutcomeModel
    mixture: SurvivalMixtureModel


def fit_simulator(train_records: list[CohortRecord], seed: int,
                  config: SimulatorConfig | None = None,
                  encoder: FeatureEncoder | None = None) -> SimulatorModels:
    """Train all patient-twin components from one seed."""
    config = config or SimulatorConfig()
    encoder = encoder or FeatureEncoder().fit(train_records)
    post_ic = fit_transition(train_records, "post_ic", seed + 1, encoder, config)
    post_cc = fit_transition(train_records, "post_cc", seed + 2, encoder, config)
    static, mixture = fit_outcome_models(train_records, seed + 3, encoder, config)
    return SimulatorModels(encoder, post_ic, post_cc, static, mixture)


# ---------------------------------------------------------------------------
# Sequence rollout


@dataclass
class Trajectory:
    sequence: tuple[int, int, int]
    post_ic: TransitionDistribution | TransitionState
    post_cc: TransitionDistribution | TransitionState
    ft_prob: float
    asp_prob: float
    mixtures: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]

    def curve(self, endpoint: str, grid: np.ndarray) -> np.ndarray:
        return survival_curve(*self.mixtures[endpoint], grid)

    def median(self, endpoint: str) -> float:
        return mixture_median(*self.mixtures[endpoint])


def rollout_batch(models: SimulatorModels, base: np.ndarray,
                  sequence: tuple[int, int, int], mode: str = "expected",
                  rng: np.random.Generator | None = None, mask_rng=None) -> dict:
    """Roll one treatment sequence forward for a batch of baseline vectors.

    Expected mode feeds transition probabilities forward; sampled mode draws
    concrete states with ``rng``. Returns raw arrays for downstream reuse.
    """
    if mode not in ("expected", "sampled"):
        raise ConfigError(f"rollout mode {mode!r} unknown")
    if mode == "sampled" and rng is None:
        raise ConfigError("sampled rollout requires an rng")
    base = np.atleast_2d(base)
    n = base.shape[0]
    ic, cc, nd = sequence

    p1, n1, d1 = models.post_ic.predict_batch(
        base, np.full(n, float(ic)), mask_rng)
    if mode == "sampled":
        states1 = [TransitionDistribution(p1[i], n1[i], d1[i]).sample(rng)
                   for i in range(n)]
        block1 = np.stack([transition_block(s) for s in states1])
    else:
        states1 = None
        block1 = np.concatenate([p1, n1, d1], axis=1)

    x2 = np.concatenate([base, np.full((n, 1), float(ic)), block1], axis=1)
    p2, n2, d2 = models.post_cc.predict_batch(x2, np.full(n, float(cc)), mask_rng)
    if mode == "sampled":
        states2 = [TransitionDistribution(p2[i], n2[i], d2[i]).sample(rng)
                   for i in range(n)]
        block2 = np.stack([transition_block(s) for s in states2])
    else:
        states2 = None
        block2 = np.concatenate([p2, n2, d2], axis=1)

    x_out = np.concatenate([base, block1, block2], axis=1)
    dec = np.tile(np.array([[float(ic), float(cc), float(nd)]]), (n, 1))
    tox = models.static.predict_batch(x_out, dec, mask_rng)
    mixtures = models.mixture.predict_params(x_out, dec, mask_rng)
    return {
        "p1": p1, "n1": n1, "d1": d1, "p2": p2, "n2": n2, "d2": d2,
        "states1": states1, "states2": states2,
        "tox": tox, "mixtures": mixtures,
    }


def rollout_sequence(models: SimulatorModels, features, sequence,
                     mode: str = "expected",
                     rng: np.random.Generator | None = None,
                     mask_rng=None) -> Trajectory:
    """Simulate one patient through IC -> CC/RT -> outcomes for a sequence."""
    seq = sequence.as_tuple() if hasattr(sequence, "as_tuple") else tuple(sequence)
    base = models.encoder.encode_baseline(features).reshape(1, -1)
    raw = rollout_batch(models, base, seq, mode=mode, rng=rng, mask_rng=mask_rng)
    if mode == "sampled":
        post_ic, post_cc = raw["states1"][0], raw["states2"][0]
    else:
        post_ic = TransitionDistribution(raw["p1"][0], raw["n1"][0], raw["d1"][0])
        post_cc = TransitionDistribution(raw["p2"][0], raw["n2"][0], raw["d2"][0])
    mixtures = {e: (pi[0], mu[0], sig[0])
                for e, (pi, mu, sig) in raw["mixtures"].items()}
    return Trajectory(
        sequence=seq, post_ic=post_ic, post_cc=post_cc,
        ft_prob=float(raw["tox"][0, 0]), asp_prob=float(raw["tox"][0, 1]),
        mixtures=mixtures,
    )
