"""Policy-twin tests: optimal-label search, dual loss, decision heads."""

import numpy as np
import pytest

from oncotwin.cohort import (
    FeatureEncoder,
    PatientFeatures,
    generate_synthetic_cohort,
)
from oncotwin.nn.autodiff import ConfigError, UsageError
from oncotwin.policy import (
    BINARY_OUTCOMES,
    OptimalObjectiveWeights,
    PolicyConfig,
    PolicyModel,
    TripletConfig,
    compute_optimal_labels,
    fit_policy,
    predict_policy,
    shuffle_baseline_columns,
    triplet_term,
    _optimal_labels_batch,
)
from oncotwin.simulator import ALL_SEQUENCES, ENDPOINTS, SimulatorConfig, fit_simulator

from .synthcases import separable_policy_cohort

TINY_SIM = SimulatorConfig(hidden=24, mixture_hidden=16, components=2,
                           max_epochs=6, patience=3)


@pytest.fixture(scope="module")
def policy_setup():
    cohort = separable_policy_cohort(520, seed=13, noise=0.25)
    train, held = cohort[:400], cohort[400:]
    with pytest.warns(UserWarning):
        sim = fit_simulator(train, seed=3, config=TINY_SIM)
    cfg = PolicyConfig(width=48, heads=4, ffn_hidden=48, head_hidden=16,
                       lr=3e-3, max_epochs=60, patience=10, batch_size=64)
    model = fit_policy(train, sim, seed=5, config=cfg)
    return sim, model, train, held


def rank_auc(scores, labels):
    order = np.argsort(scores)
    ranks = np.empty(len(scores))
    ranks[order] = np.arange(1, len(scores) + 1)
    pos = labels == 1
    return (ranks[pos].sum() - pos.sum() * (pos.sum() + 1) / 2) / (
        pos.sum() * (~pos).sum())


def stage_kwargs(record, stage_index):
    kw = {}
    if stage_index >= 1:
        kw.update(ic=record.sequence.ic, post_ic=record.post_ic)
    if stage_index >= 2:
        kw.update(cc=record.sequence.cc, post_cc=record.post_cc)
    return kw


# ---------------------------------------------------------------------------
# Triplet arithmetic and config validation


def test_triplet_term_arithmetic():
    assert triplet_term(0.0, 2.0, margin=1.0) == 0.0
    assert triplet_term(1.5, 1.5, margin=1.0) == 1.0
    assert triplet_term(3.0, 1.0, margin=1.0) == 3.0
    # zero exactly when d(a,c) >= d(a,b) + margin
    assert triplet_term(1.0, 2.0, margin=1.0) == 0.0
    assert triplet_term(1.0, 1.999, margin=1.0) > 0.0


def test_triplet_config_rejects_negative_weights():
    with pytest.raises(ConfigError):
        TripletConfig(w1=-0.1)
    with pytest.raises(ConfigError):
        TripletConfig(w2=-1.0)


def test_objective_weights_validation():
    with pytest.raises(ConfigError):
        OptimalObjectiveWeights(w_tox=-1.0)
    zero_binary = {k: 0.0 for k in BINARY_OUTCOMES}
    zero_temporal = {e: 0.0 for e in ENDPOINTS}
    with pytest.raises(ConfigError):
        OptimalObjectiveWeights(w_tox=0.0, w_s=0.0, binary=zero_binary,
                                temporal=zero_temporal)
    with pytest.raises(ConfigError, match="nausea"):
        OptimalObjectiveWeights(binary={**zero_binary, "nausea": 1.0})


def test_policy_config_validation():
    with pytest.raises(ConfigError):
        PolicyConfig(width=30, heads=4)
    with pytest.raises(ConfigError):
        PolicyConfig(attention_orientation="sideways")


# ---------------------------------------------------------------------------
# Optimal-label search against hand-computed stubs


@pytest.fixture(scope="module")
def stub_encoder():
    cohort = generate_synthetic_cohort(seed=0, n=16)
    return FeatureEncoder().fit(cohort), cohort[0].features


class _StubModels:
    def __init__(self, encoder):
        self.encoder = encoder


def test_tiebreak_returns_all_no_on_constant_objective(stub_encoder, monkeypatch):
    encoder, patient = stub_encoder

    def constant(models, base, seq):
        return ({k: 0.3 for k in BINARY_OUTCOMES}, {e: 50.0 for e in ENDPOINTS})

    monkeypatch.setattr("oncotwin.policy.sequence_outcomes", constant)
    seq = compute_optimal_labels(_StubModels(encoder), patient)
    assert seq.as_tuple() == (0, 0, 0)
    assert seq.provenance == ("optimal",) * 3


def test_cc_chosen_when_it_halves_feeding_tube_risk(stub_encoder, monkeypatch):
    encoder, patient = stub_encoder

    def stub(models, base, seq):
        binary = {k: 0.0 for k in BINARY_OUTCOMES}
        binary["ft"] = 0.2 if seq[1] == 1 else 0.4
        return binary, {e: 50.0 for e in ENDPOINTS}

    monkeypatch.setattr("oncotwin.policy.sequence_outcomes", stub)
    weights = OptimalObjectiveWeights(
        w_s=0.0,
        binary={k: (1.0 if k == "ft" else 0.0) for k in BINARY_OUTCOMES})
    seq = compute_optimal_labels(_StubModels(encoder), patient, weights)
    # all four cc=1 sequences tie at 0.2; fewest treatments wins
    assert seq.as_tuple() == (0, 1, 0)


def test_returned_sequence_attains_enumerated_minimum(stub_encoder, monkeypatch):
    encoder, patient = stub_encoder
    values = {seq: 0.1 + 0.31 * seq[0] + 0.17 * seq[1] + 0.23 * seq[2]
              for seq in ALL_SEQUENCES}
    values[(1, 0, 1)] = 0.01  # force a non-trivial argmin

    def stub(models, base, seq):
        binary = {k: 0.0 for k in BINARY_OUTCOMES}
        binary["ft"] = values[seq]
        return binary, {e: 50.0 for e in ENDPOINTS}

    monkeypatch.setattr("oncotwin.policy.sequence_outcomes", stub)
    weights = OptimalObjectiveWeights(
        w_s=0.0,
        binary={k: (1.0 if k == "ft" else 0.0) for k in BINARY_OUTCOMES})
    seq = compute_optimal_labels(_StubModels(encoder), patient, weights)
    assert seq.as_tuple() == (1, 0, 1)
    assert values[seq.as_tuple()] <= min(values.values())


def test_nonfinite_objective_names_sequence(stub_encoder, monkeypatch):
    encoder, patient = stub_encoder

    def stub(models, base, seq):
        binary = {k: 0.1 for k in BINARY_OUTCOMES}
        if seq == (1, 1, 1):
            binary["ft"] = np.nan
        return binary, {e: 50.0 for e in ENDPOINTS}

    monkeypatch.setattr("oncotwin.policy.sequence_outcomes", stub)
    with pytest.raises(ValueError, match=r"\(1, 1, 1\)"):
        compute_optimal_labels(_StubModels(encoder), patient)


def test_batch_labels_match_single_patient_path(policy_setup):
    sim, _, train, _ = policy_setup
    subset = train[:12]
    batch = _optimal_labels_batch(sim, subset, OptimalObjectiveWeights())
    for i, rec in enumerate(subset):
        single = compute_optimal_labels(sim, rec.features)
        assert tuple(batch[i]) == single.as_tuple()


# ---------------------------------------------------------------------------
# Trained-model behavior


def test_imitation_heldout_auc(policy_setup):
    _, model, _, held = policy_setup
    for s, name in enumerate(("ic", "cc", "nd")):
        probs = np.array([
            predict_policy(model, r.features, name, **stage_kwargs(r, s)).probability
            for r in held])
        labels = np.array([getattr(r.sequence, name) for r in held])
        auc = rank_auc(probs, labels)
        assert auc >= 0.85, (name, auc)


def test_probabilities_inside_unit_interval(policy_setup):
    _, model, _, held = policy_setup
    for r in held[:10]:
        for strategy in ("imitation", "optimal"):
            out = predict_policy(model, r.features, "ic", strategy)
            assert 0.0 < out.probability < 1.0
            assert out.strategy == strategy and out.stage == "ic"
            assert out.embedding.shape == (model.config.width,)


def test_stage_embeddings_differ(policy_setup):
    _, model, _, held = policy_setup
    r = held[0]
    state = model.encoder.encode_state(r.features)
    e0 = model.encode_states(state.reshape(1, -1), 0).data
    e1 = model.encode_states(state.reshape(1, -1), 1).data
    assert not np.allclose(e0, e1)
    # and through the full prediction path
    a = predict_policy(model, r.features, "ic")
    b = predict_policy(model, r.features, "cc", ic=1, post_ic=r.post_ic)
    assert not np.allclose(a.embedding, b.embedding)


def test_zero_head_weights_give_half(policy_setup):
    _, model, _, held = policy_setup
    saved = (model.imitation.out.weight.data.copy(),
             model.imitation.out.bias.data.copy())
    model.imitation.out.weight.data = np.zeros_like(saved[0])
    model.imitation.out.bias.data = np.zeros_like(saved[1])
    try:
        out = predict_policy(model, held[0].features, "ic")
        assert out.probability == 0.5
    finally:
        model.imitation.out.weight.data = saved[0]
        model.imitation.out.bias.data = saved[1]


def test_missing_stage_context_errors(policy_setup):
    _, model, _, held = policy_setup
    r = held[0]
    with pytest.raises(UsageError, match="ic"):
        predict_policy(model, r.features, "cc")
    with pytest.raises(UsageError, match="post_cc"):
        predict_policy(model, r.features, "nd", ic=1, post_ic=r.post_ic, cc=1)
    with pytest.raises(ConfigError):
        predict_policy(model, r.features, "rt")
    with pytest.raises(ConfigError):
        predict_policy(model, r.features, "ic", strategy="oracle")
    untrained = PolicyModel(np.random.default_rng(0),
                            PolicyConfig(width=16, heads=4, ffn_hidden=16))
    with pytest.raises(UsageError, match="untrained"):
        predict_policy(untrained, r.features, "ic")


def test_tstage_sweep_moves_probability_monotonically(policy_setup):
    _, model, _, _ = policy_setup
    probs = []
    for t in (1, 2, 3, 4):
        p = PatientFeatures(
            age=60.0, is_male=1, hpv=1, smoking_status=1, pack_years=20.0,
            lymph_node_regions=(0,) * 14, t_stage=t, n_stage=2, ajcc_stage=2,
            pathological_grade=2, subsite=1, bilateral=0, total_dose=70.0,
            dose_fraction=2.0, aspiration_pre=0)
        probs.append(predict_policy(model, p, "ic").probability)
    # the fit rule raises treatment odds with t_stage
    assert all(b >= a for a, b in zip(probs, probs[1:])), probs
    assert probs[-1] > probs[0] + 0.2


def test_memory_covers_training_cohort(policy_setup):
    _, model, train, _ = policy_setup
    for s in range(3):
        mem = model.memory(s)
        assert mem.shape == (len(train), model.config.width)
        assert np.abs(mem).sum() > 0.0


# ---------------------------------------------------------------------------
# Training protocol guards


def test_augmentation_shuffles_only_requested_columns():
    rng = np.random.default_rng(7)
    block = rng.normal(size=(40, 38))
    same = shuffle_baseline_columns(block, np.random.default_rng(1), prob=0.0)
    assert np.array_equal(same, block)
    shuffled = shuffle_baseline_columns(block, np.random.default_rng(2), prob=1.0)
    assert not np.array_equal(shuffled, block)
    for j in range(38):
        assert np.array_equal(np.sort(shuffled[:, j]), np.sort(block[:, j]))


def test_freeze_encoder_head_training_reproducible(policy_setup):
    sim, _, train, held = policy_setup
    cfg = PolicyConfig(width=32, heads=4, ffn_hidden=32, head_hidden=8,
                       lr=3e-3, max_epochs=8, patience=8, batch_size=64)
    runs = [fit_policy(train[:120], sim, seed=17, config=cfg,
                       freeze_encoder=True) for _ in range(2)]
    for r in held[:8]:
        a = predict_policy(runs[0], r.features, "ic").probability
        b = predict_policy(runs[1], r.features, "ic").probability
        assert abs(a - b) <= 1e-6
    # the frozen encoder kept its init weights: both runs share them exactly
    for (na, pa), (nb, pb) in zip(runs[0].named_parameters(),
                                  runs[1].named_parameters()):
        assert na == nb
        if not (na.startswith("imitation") or na.startswith("optimal")):
            assert np.array_equal(pa.data, pb.data)
    # freezing is an argument of the fit call, not a lasting mode
    assert all(p.requires_grad for p in runs[0].parameters())


def test_triplet_loss_improves_auc_in_aggregate():
    cohort = separable_policy_cohort(310, seed=29, noise=0.3)
    train, held = cohort[:160], cohort[160:]
    with pytest.warns(UserWarning):
        sim = fit_simulator(train, seed=3, config=TINY_SIM)

    def mean_auc(model):
        vals = []
        for s, name in enumerate(("ic", "cc", "nd")):
            probs = np.array([
                predict_policy(model, r.features, name,
                               **stage_kwargs(r, s)).probability for r in held])
            labels = np.array([getattr(r.sequence, name) for r in held])
            if labels.min() == labels.max():
                continue
            vals.append(rank_auc(probs, labels))
        return float(np.mean(vals))

    scores = {0.2: [], 0.0: []}
    for seed in (100, 101, 102, 103, 104):
        for w2 in scores:
            cfg = PolicyConfig(width=96, heads=4, ffn_hidden=96, head_hidden=8,
                               lr=3e-3, max_epochs=15, patience=15,
                               batch_size=64, triplet=TripletConfig(w2=w2))
            scores[w2].append(mean_auc(fit_policy(train, sim, seed=seed,
                                                  config=cfg)))
    assert np.mean(scores[0.2]) >= np.mean(scores[0.0]), scores


def test_paper_attention_orientation_runs(policy_setup):
    sim, _, train, held = policy_setup
    cfg = PolicyConfig(width=32, heads=4, ffn_hidden=32, head_hidden=8,
                       lr=3e-3, max_epochs=4, patience=4, batch_size=64,
                       attention_orientation="paper")
    model = fit_policy(train[:80], sim, seed=23, config=cfg)
    out = predict_policy(model, held[0].features, "ic")
    assert 0.0 < out.probability < 1.0
    assert out.embedding.shape == (32,)
