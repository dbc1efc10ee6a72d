"""Patient-twin tests: transition oracles, mixture likelihood, MC dropout."""

import numpy as np
import pytest
from scipy import special

from oncotwin.cohort import FeatureEncoder, TransitionState, stratified_split
from oncotwin.nn.autodiff import ConfigError, UsageError
from oncotwin.nn.layers import DropoutSpec
from oncotwin.simulator import (
    ALL_SEQUENCES,
    SimulatorConfig,
    SimulatorModels,
    TransitionModel,
    fit_outcome_models,
    fit_simulator,
    fit_transition,
    mixture_median,
    predict_transition,
    predict_with_ci,
    rollout_sequence,
    survival_curve,
)

from .synthcases import (
    lognormal_outcome_cohort,
    separable_toxicity_cohort,
    separable_transition_cohort,
)

FAST = SimulatorConfig(hidden=96, mixture_hidden=48, max_epochs=200, patience=12)

# enough rows and steps for the net to prefer the rule over memorizing the
# many patient-unique noise features
RULE = SimulatorConfig(hidden=96, lr=1e-2, max_epochs=600, patience=40)


@pytest.fixture(scope="module")
def separable_fit():
    cohort = separable_transition_cohort(1200, seed=21)
    train, held = cohort[:960], cohort[960:]
    enc = FeatureEncoder().fit(train)
    model = fit_transition(train, "post_cc", seed=1, encoder=enc, config=RULE)
    return enc, model, held


def test_separable_transition_accuracy(separable_fit):
    enc, model, held = separable_fit
    # true post-CC inputs: baseline + ic + observed post-IC block
    from oncotwin.cohort import transition_block
    states = np.stack([
        np.concatenate([enc.encode_baseline(r.features), [r.sequence.ic],
                        transition_block(r.post_ic)])
        for r in held])
    decisions = np.array([r.sequence.cc for r in held], dtype=np.float64)
    p, n, d = model.predict_batch(states, decisions)
    acc_p = np.mean(p.argmax(axis=1) == [r.post_cc.primary_response for r in held])
    acc_n = np.mean(n.argmax(axis=1) == [r.post_cc.nodal_response for r in held])
    assert acc_p >= 0.95
    assert acc_n >= 0.95


def test_transition_probabilities_sum_to_one(separable_fit):
    enc, model, held = separable_fit
    from oncotwin.cohort import transition_block
    states = np.stack([
        np.concatenate([enc.encode_baseline(r.features), [r.sequence.ic],
                        transition_block(r.post_ic)])
        for r in held[:20]])
    p, n, _ = model.predict_batch(states, np.ones(20))
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(n.sum(axis=1), 1.0, atol=1e-9)


def test_ic_stage_forced_stable_when_untreated():
    cohort = separable_transition_cohort(200, seed=3)
    enc = FeatureEncoder().fit(cohort)
    model = fit_transition(cohort, "post_ic", seed=5, encoder=enc,
                           config=SimulatorConfig(hidden=32, max_epochs=30))
    state = enc.encode_baseline(cohort[0].features)
    dist = predict_transition(model, state, decision=0)
    assert dist.primary[1] == 1.0 and dist.primary.sum() == 1.0
    assert dist.nodal[1] == 1.0
    assert np.all(dist.dlt == 0.0)
    treated = predict_transition(model, state, decision=1)
    assert treated.primary[1] < 1.0


def test_same_seed_identical_weights():
    cohort = separable_transition_cohort(150, seed=7)
    enc = FeatureEncoder().fit(cohort)
    cfg = SimulatorConfig(hidden=32, max_epochs=40)
    a = fit_transition(cohort, "post_cc", seed=9, encoder=enc, config=cfg)
    b = fit_transition(cohort, "post_cc", seed=9, encoder=enc, config=cfg)
    for (name, av), (_, bv) in zip(sorted(a.state_arrays().items()),
                                   sorted(b.state_arrays().items())):
        assert np.array_equal(av, bv), name


def test_untrained_model_raises():
    model = TransitionModel("post_ic", np.random.default_rng(0), FAST)
    with pytest.raises(UsageError):
        model.predict_batch(np.zeros((1, 38)), np.ones(1))


def test_missing_class_warns():
    cohort = separable_transition_cohort(100, seed=13)
    # force every nodal response to one class
    for r in cohort:
        r.post_cc.nodal_response = 2
    enc = FeatureEncoder().fit(cohort)
    with pytest.warns(UserWarning, match="nodal"):
        fit_transition(cohort, "post_cc", seed=1, encoder=enc,
                       config=SimulatorConfig(hidden=16, max_epochs=5))


@pytest.fixture(scope="module")
def outcome_fit():
    cohort = lognormal_outcome_cohort(450, seed=17, median=36.0, sigma=0.5)
    enc = FeatureEncoder().fit(cohort)
    static, mixture = fit_outcome_models(cohort, seed=23, encoder=enc, config=FAST)
    return enc, cohort, static, mixture


def test_generate_and_refit_recovers_median(outcome_fit):
    """True times are log-normal(ln 36, 0.5); the fitted median must land
    inside [30, 43] months."""
    enc, cohort, _, mixture = outcome_fit
    from oncotwin.cohort import transition_block
    medians = []
    for rec in cohort[:10]:
        state = np.concatenate([enc.encode_baseline(rec.features),
                                transition_block(rec.post_ic),
                                transition_block(rec.post_cc)])
        dec = np.array([[0.0, rec.sequence.cc, 0.0]])
        params = mixture.predict_params(state.reshape(1, -1), dec)
        pi, mu, sig = params["os"]
        medians.append(mixture_median(pi[0], mu[0], sig[0]))
    med = float(np.median(medians))
    assert 30.0 <= med <= 43.0, med


def test_mixture_weights_normalized(outcome_fit):
    enc, cohort, _, mixture = outcome_fit
    from oncotwin.cohort import transition_block
    state = np.concatenate([enc.encode_baseline(cohort[0].features),
                            transition_block(cohort[0].post_ic),
                            transition_block(cohort[0].post_cc)])
    params = mixture.predict_params(state.reshape(1, -1), np.array([[0.0, 1.0, 0.0]]))
    for e, (pi, _, sig) in params.items():
        assert np.allclose(pi.sum(axis=1), 1.0, atol=1e-9), e
        assert np.all(sig > 0.0), e


def test_survival_monotone_on_random_patients(outcome_fit):
    enc, cohort, _, mixture = outcome_fit
    from oncotwin.cohort import transition_block
    rng = np.random.default_rng(0)
    grid = np.linspace(0.6, 60.0, 60)
    for _ in range(100):
        rec = cohort[rng.integers(0, len(cohort))]
        state = np.concatenate([enc.encode_baseline(rec.features),
                                transition_block(rec.post_ic),
                                transition_block(rec.post_cc)])
        dec = rng.integers(0, 2, size=3).astype(float).reshape(1, 3)
        params = mixture.predict_params(state.reshape(1, -1), dec)
        pi, mu, sig = params["os"]
        s = survival_curve(pi[0], mu[0], sig[0], grid)
        assert np.all(np.diff(s) <= 1e-12)
        assert np.all((s >= 0.0) & (s <= 1.0))
        assert survival_curve(pi[0], mu[0], sig[0], np.array([0.001]))[0] > 0.999


def test_static_toxicity_separable_auc():
    cohort = separable_toxicity_cohort(1200, seed=31)
    train, held = cohort[:960], cohort[960:]
    enc = FeatureEncoder().fit(train)
    static, _ = fit_outcome_models(train, seed=3, encoder=enc, config=RULE)
    from oncotwin.cohort import transition_block
    states = np.stack([
        np.concatenate([enc.encode_baseline(r.features),
                        transition_block(r.post_ic), transition_block(r.post_cc)])
        for r in held])
    dec = np.array([[0.0, r.sequence.cc, 0.0] for r in held])
    probs = static.predict_batch(states, dec)[:, 0]
    labels = np.array([r.outcomes.ft for r in held])
    order = np.argsort(probs)
    ranks = np.empty(len(probs))
    ranks[order] = np.arange(1, len(probs) + 1)
    pos = labels == 1
    auc = (ranks[pos].sum() - pos.sum() * (pos.sum() + 1) / 2) / (pos.sum() * (~pos).sum())
    assert auc >= 0.9, auc


def test_all_censored_endpoint_rejected():
    cohort = lognormal_outcome_cohort(60, seed=41)
    for r in cohort:
        r.outcomes.lrc_event = 0
    enc = FeatureEncoder().fit(cohort)
    from oncotwin.cohort import CohortError
    with pytest.raises(CohortError, match="lrc"):
        fit_outcome_models(cohort, seed=1, encoder=enc,
                           config=SimulatorConfig(hidden=16, max_epochs=3))


def test_nll_non_increasing_early_epochs():
    cohort = lognormal_outcome_cohort(200, seed=47)
    enc = FeatureEncoder().fit(cohort)
    cfg = SimulatorConfig(hidden=32, mixture_hidden=24, max_epochs=30,
                          dropout=DropoutSpec(0.0, 0.0))
    _, mixture = fit_outcome_models(cohort, seed=2, encoder=enc, config=cfg)
    losses = mixture.history["train"][:6]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:])), losses


def test_survival_curve_closed_forms():
    pi = np.array([1.0])
    mu = np.array([np.log(24.0)])
    for sigma in (0.2, 0.7, 1.5):
        s = survival_curve(pi, mu, np.array([sigma]), np.array([24.0]))
        assert abs(s[0] - 0.5) < 1e-12
    s0 = survival_curve(pi, mu, np.array([0.5]), np.array([1e-9]))
    assert s0[0] > 1.0 - 1e-12

    pi2 = np.array([0.5, 0.5])
    mu2 = np.array([np.log(12.0), np.log(48.0)])
    sig2 = np.array([1.0, 1.0])
    s = survival_curve(pi2, mu2, sig2, np.array([24.0]))
    expected = 0.5 * (1 - special.ndtr(np.log(2.0))) + 0.5 * special.ndtr(np.log(2.0))
    assert abs(s[0] - expected) < 1e-12
    assert abs(s[0] - 0.5) < 1e-12


def test_survival_curve_domain_errors():
    pi, mu, sig = np.array([1.0]), np.array([3.0]), np.array([0.5])
    with pytest.raises(ValueError):
        survival_curve(pi, mu, sig, np.array([0.0]))
    with pytest.raises(ValueError):
        survival_curve(pi, mu, sig, np.array([-1.0, 2.0]))
    with pytest.raises(ValueError):
        survival_curve(pi, mu, sig, np.array([2.0, 1.0]))


def test_event_loglik_increases_below_mode():
    """Moving an event later increases its likelihood while the time stays
    below every component mode (the provably monotone region)."""
    pi = np.array([0.6, 0.4])
    mu = np.array([np.log(40.0), np.log(60.0)])
    sig = np.array([0.5, 0.4])
    modes = np.exp(mu - sig**2)

    def log_f(t):
        z = (np.log(t) - mu) / sig
        comps = pi * np.exp(-0.5 * z**2) / (t * sig * np.sqrt(2 * np.pi))
        return np.log(comps.sum())

    times = np.linspace(2.0, 0.95 * modes.min(), 25)
    values = [log_f(t) for t in times]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_mixture_median_closed_form():
    pi = np.array([1.0])
    mu = np.array([np.log(36.0)])
    sig = np.array([0.5])
    assert abs(mixture_median(pi, mu, sig) - 36.0) < 1e-3


def test_predict_with_ci_contracts():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        predict_with_ci(lambda r: 0.5, samples=19)

    # degenerate sampler: all draws equal, so the interval has zero width
    # (point may differ from the bounds by float-mean rounding only)
    ci = predict_with_ci(lambda r: np.array([0.4]), samples=25,
                         rng=np.random.default_rng(1))
    assert ci.upper[0] - ci.lower[0] <= 1e-15
    assert abs(ci.point[0] - 0.4) < 1e-12
    assert ci.lower[0] <= ci.point[0] <= ci.upper[0]

    ci = predict_with_ci(lambda r: r.normal(size=3), samples=40,
                         rng=np.random.default_rng(2))
    assert np.all(ci.lower <= ci.point) and np.all(ci.point <= ci.upper)

    a = predict_with_ci(lambda r: r.normal(size=3), samples=20,
                        rng=np.random.default_rng(3))
    b = predict_with_ci(lambda r: r.normal(size=3), samples=20,
                        rng=np.random.default_rng(3))
    assert np.array_equal(a.point, b.point)
    assert np.array_equal(a.lower, b.lower)


def test_ci_coverage_nested_mc(outcome_fit):
    """20-sample CIs from MC dropout should cover the long-run mean most of
    the time (loose 85-100% band)."""
    enc, cohort, static, _ = outcome_fit
    from oncotwin.cohort import transition_block
    rec = cohort[0]
    state = np.concatenate([enc.encode_baseline(rec.features),
                            transition_block(rec.post_ic),
                            transition_block(rec.post_cc)]).reshape(1, -1)
    dec = np.array([[0.0, 1.0, 0.0]])

    def sample(r):
        return static.predict_batch(state, dec, mask_rng=r)[0, 0]

    big = predict_with_ci(sample, samples=1000, rng=np.random.default_rng(5))
    grand_mean = big.point
    covered = 0
    reps = 100
    for i in range(reps):
        ci = predict_with_ci(sample, samples=20, rng=np.random.default_rng(100 + i))
        covered += int(ci.lower <= grand_mean <= ci.upper)
    assert 0.85 <= covered / reps <= 1.0, covered / reps


@pytest.fixture(scope="module")
def small_simulator():
    cohort = separable_transition_cohort(260, seed=55)
    # give outcomes some events so the mixture is trainable
    rng = np.random.default_rng(8)
    for r in cohort:
        t = float(np.exp(np.log(40.0) + 0.5 * rng.standard_normal()))
        censor = rng.uniform(48.0, 96.0)
        r.outcomes.os_event = int(t <= censor)
        r.outcomes.os_months = min(t, censor)
        r.outcomes.lrc_event = r.outcomes.os_event
        r.outcomes.lrc_months = r.outcomes.os_months
        r.outcomes.fdm_event = r.outcomes.os_event
        r.outcomes.fdm_months = r.outcomes.os_months
    cfg = SimulatorConfig(hidden=48, mixture_hidden=24, max_epochs=60)
    return fit_simulator(cohort, seed=77, config=cfg), cohort


def test_rollout_modes_and_constraint(small_simulator):
    models, cohort = small_simulator
    feats = cohort[0].features
    # expected mode is deterministic
    t1 = rollout_sequence(models, feats, (0, 1, 0))
    t2 = rollout_sequence(models, feats, (0, 1, 0))
    assert np.array_equal(t1.post_ic.as_block(), t2.post_ic.as_block())
    assert t1.ft_prob == t2.ft_prob
    # no-IC constraint under both modes
    assert t1.post_ic.primary[1] == 1.0
    sampled = rollout_sequence(models, feats, (0, 0, 0), mode="sampled",
                               rng=np.random.default_rng(4))
    assert isinstance(sampled.post_ic, TransitionState)
    assert sampled.post_ic.primary_response == 1
    assert sampled.post_ic.nodal_response == 1


def test_rollout_eight_sequences_distinct(small_simulator):
    models, cohort = small_simulator
    feats = cohort[1].features
    trajectories = [rollout_sequence(models, feats, seq) for seq in ALL_SEQUENCES]
    assert len(trajectories) == 8
    fingerprints = {(round(t.ft_prob, 12), round(t.asp_prob, 12),
                     round(float(t.mixtures["os"][1][0]), 10))
                    for t in trajectories}
    assert len(fingerprints) == 8


def test_rollout_sampled_requires_rng(small_simulator):
    models, cohort = small_simulator
    with pytest.raises(ConfigError):
        rollout_sequence(models, cohort[0].features, (1, 1, 1), mode="sampled")
    with pytest.raises(ConfigError):
        rollout_sequence(models, cohort[0].features, (1, 1, 1), mode="bogus")
