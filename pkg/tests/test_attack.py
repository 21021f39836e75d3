import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sttleak.attack import (
    AttackConfig,
    AttackInference,
    attack_campaign,
    candidate_space,
    dpa_infer,
    spa_infer,
)
from sttleak.device import DeviceParams, ParameterError
from sttleak.encoding import NONE, PARITY1, EncodingScheme, encode
from sttleak.trace import (
    CONSTANT_CURRENT,
    CurrentTrace,
    Environment,
    Word,
    WriteTransaction,
    add_noise,
    synthesize_write_trace,
)

uA = 1e-6
RANDOM2 = EncodingScheme.parse("random2")


def trace_for(old: Word, new: Word, **kw) -> CurrentTrace:
    return synthesize_write_trace(WriteTransaction(old, new, **kw))


def brute_class_size(width, scheme, level):
    """Data words whose encoding can produce ``level`` (all random extensions tried)."""
    extra = scheme.overhead
    count = 0
    for v in range(2**width):
        w = bin(v).count("1")
        if scheme is NONE:
            reachable = {w}
        elif scheme == PARITY1:
            reachable = {w + (w % 2)}
        else:
            reachable = {w + sum(t) for t in itertools.product((0, 1), repeat=extra)}
        count += level in reachable
    return count


def test_config_levels_and_gap():
    cfg = AttackConfig(4)
    np.testing.assert_allclose(cfg.levels(), [600e-6, 525e-6, 450e-6, 375e-6, 300e-6])
    assert cfg.level_gap == pytest.approx(75 * uA)
    pre, post = cfg.windows()
    assert pre == pytest.approx((0.05 * 0.354e-9, 0.8 * 0.354e-9))
    assert post[0] == pytest.approx(1.2 * 0.59e-9) and post[1] == pytest.approx(1.18e-9)


def test_config_validation():
    with pytest.raises(ParameterError):
        AttackConfig(0)
    with pytest.raises(ParameterError):
        AttackConfig(4, pre_window=(0.8, 0.2))
    with pytest.raises(ParameterError):
        AttackConfig(4, post_start=0.9)


@pytest.mark.parametrize("width", [4, 8])
def test_spa_round_trip_exhaustive(width):
    cfg = AttackConfig(width)
    for a, b in itertools.product(range(2**width), repeat=2):
        old, new = Word.from_int(a, width), Word.from_int(b, width)
        inf = spa_infer(trace_for(old, new), cfg)
        assert (inf.hw_old_est, inf.hw_new_est) == (old.hamming_weight, new.hamming_weight)
        assert not inf.low_confidence


def test_spa_example_and_flat_word():
    inf = spa_infer(trace_for(Word.parse("0100"), Word.parse("1101")), AttackConfig(4))
    assert (inf.hw_old_est, inf.hw_new_est) == (1, 3)
    assert inf.residual_candidates == 4 * 4
    flat = trace_for(Word.parse("0101"), Word.parse("0101"))
    assert np.ptp(flat.samples) == 0
    inf = spa_infer(flat, AttackConfig(4))
    assert (inf.hw_old_est, inf.hw_new_est) == (2, 2) and inf.residual_candidates == 36


def test_spa_constant_current_unknown():
    cfg = AttackConfig(4, driver=CONSTANT_CURRENT)
    for a, b in [(0, 15), (5, 5), (9, 6)]:
        tr = trace_for(Word.from_int(a, 4), Word.from_int(b, 4), driver=CONSTANT_CURRENT)
        inf = spa_infer(tr, cfg)
        assert inf.unknown and inf.residual_candidates == 256 and inf.effort_bits == 8.0


def test_spa_rejects_mismatched_trace():
    tr = trace_for(Word.parse("0000"), Word.parse("1111"))
    with pytest.raises(ParameterError):
        spa_infer(tr, AttackConfig(8))
    with pytest.raises(ParameterError):
        spa_infer(tr, AttackConfig(4, driver=CONSTANT_CURRENT))


def test_effort_bits_is_log2_of_residual():
    assert AttackInference(1, 3, 16).effort_bits == 4.0
    with pytest.raises(ParameterError):
        AttackInference(0, 0, 0)


def test_dpa_single_trace_equals_spa():
    tr = trace_for(Word.parse("0110"), Word.parse("1110"))
    noisy = CurrentTrace(add_noise(tr.samples, 60 * uA, np.random.default_rng(1)),
                         tr.sample_rate, tr.t0, tr.width, tr.driver)
    cfg = AttackConfig(4)
    assert dpa_infer([noisy], cfg) == spa_infer(noisy, cfg)


def test_dpa_rejects_mismatched_shapes():
    a = trace_for(Word.parse("0110"), Word.parse("1110"))
    b = synthesize_write_trace(WriteTransaction(Word.parse("0110"), Word.parse("1110")),
                               sample_rate=20e9)
    with pytest.raises(ParameterError):
        dpa_infer([a, b], AttackConfig(4))


def test_candidate_space_examples():
    cfg = AttackConfig(4)
    inf = spa_infer(trace_for(Word.parse("0011"), Word.parse("1010")), cfg)
    assert candidate_space(inf, 4) == (36, pytest.approx(math.log2(36)))
    # under parity the level 4 class holds the 4 weight-3 words plus 1111
    inf = AttackInference(4, 4, 1)
    assert candidate_space(inf, 4, PARITY1)[0] == 5 * 5
    assert candidate_space(AttackInference(None, None, 256), 4)[0] == 256
    # an odd level cannot come from a parity encoder and carries no information
    assert candidate_space(AttackInference(3, 0, 1), 4, PARITY1)[0] == 16 * 1


@pytest.mark.parametrize("scheme", [NONE, PARITY1, RANDOM2])
@pytest.mark.parametrize("width", [1, 3, 4, 6])
def test_candidate_space_matches_brute_force(width, scheme):
    for lo in range(width + scheme.overhead + 1):
        for ln in (0, width + scheme.overhead):
            expected_o = brute_class_size(width, scheme, lo) or 2**width
            expected_n = brute_class_size(width, scheme, ln) or 2**width
            assert candidate_space(AttackInference(lo, ln, 1), width, scheme)[0] == expected_o * expected_n


@pytest.mark.parametrize("width", range(1, 9))
def test_defense_dominance(width):
    for v in range(2**width):
        w = Word.from_int(v, width)
        plain = AttackInference(w.hamming_weight, w.hamming_weight, 1)
        lvl = encode(w, PARITY1).hamming_weight
        parity = AttackInference(lvl, lvl, 1)
        assert candidate_space(parity, width, PARITY1)[0] >= candidate_space(plain, width)[0]
        for seed in range(3):
            lr = encode(w, RANDOM2, seed=seed).hamming_weight
            rnd = AttackInference(lr, lr, 1)
            assert candidate_space(rnd, width, RANDOM2)[0] >= candidate_space(plain, width)[0]
        unknown = AttackInference(None, None, 1)
        assert candidate_space(unknown, width, PARITY1)[0] == 4**width


def clean_pre_samples(cfg: AttackConfig) -> int:
    (a, b), _ = cfg.windows()
    t = np.arange(int(cfg.pulse * cfg.sample_rate) + 2) / cfg.sample_rate
    return int(np.count_nonzero((t >= a) & (t <= b)))


@pytest.mark.parametrize("envs", [
    [Environment(300.0), Environment(250.0), Environment(200.0)],
    [Environment(magnetic_tamper_factor=f) for f in (1.0, 1.3, 1.6)],
])
def test_wider_window_never_hurts(envs):
    counts, accuracies = [], []
    for env in envs:
        cfg = AttackConfig(4, env=env)
        counts.append(clean_pre_samples(cfg))
        hits = 0
        for a, b in itertools.product(range(16), repeat=2):
            old, new = Word.from_int(a, 4), Word.from_int(b, 4)
            inf = spa_infer(trace_for(old, new, env=env), cfg)
            hits += (inf.hw_old_est, inf.hw_new_est) == (old.hamming_weight, new.hamming_weight)
        accuracies.append(hits / 256)
    assert all(b > a for a, b in zip(counts, counts[1:]))
    assert all(b >= a for a, b in zip(accuracies, accuracies[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255), st.permutations(range(8)))
def test_effort_bits_permutation_invariant(a, b, perm):
    old, new = Word.from_int(a, 8), Word.from_int(b, 8)
    cfg = AttackConfig(8)
    base = spa_infer(trace_for(old, new), cfg)
    permuted = spa_infer(trace_for(Word(tuple(old.bits[i] for i in perm)),
                                   Word(tuple(new.bits[i] for i in perm))), cfg)
    assert permuted.effort_bits == base.effort_bits


def test_dpa_trend_over_seeds():
    cfg = AttackConfig(4)
    ks, accs = [], []
    for seed in range(3):
        for k in (1, 4, 16, 100):
            rep = attack_campaign(cfg, n_trials=300, noise_sigma=60 * uA, seed=seed,
                                  traces_per_trial=k)
            ks.append(k)
            accs.append(min(rep.accuracy_old, rep.accuracy_new))
    tau, p = stats.kendalltau(ks, accs, alternative="greater")
    assert tau > 0 and p < 0.01
    by_k = {k: np.mean([a for kk, a in zip(ks, accs) if kk == k]) for k in (1, 4, 16, 100)}
    assert by_k[1] < by_k[4] <= by_k[16] <= by_k[100]


@pytest.mark.parametrize("width", [1, 4, 8, 16])
def test_campaign_noiseless_uncoded_is_perfect(width):
    rep = attack_campaign(AttackConfig(width), n_trials=1000, seed=width)
    assert rep.accuracy_old == 1.0 and rep.accuracy_new == 1.0


def test_campaign_constant_current_is_chance():
    width = 4
    rep = attack_campaign(AttackConfig(width, driver=CONSTANT_CURRENT), n_trials=1000, seed=2)
    assert rep.mean_effort_bits == 2 * width
    # a uniform guess over 5 weights hits a binomial weight with prob. 1/5
    for acc in (rep.accuracy_old, rep.accuracy_new):
        assert abs(acc - 0.2) < 4 * math.sqrt(0.2 * 0.8 / 1000)


def test_campaign_parity_raises_effort():
    plain = attack_campaign(AttackConfig(4), NONE, n_trials=1000, seed=0)
    parity = attack_campaign(AttackConfig(4), PARITY1, n_trials=1000, seed=0)
    assert parity.accuracy_old == 1.0 and parity.accuracy_new == 1.0
    assert parity.mean_effort_bits > plain.mean_effort_bits


def test_campaign_exhaustive_effort_oracle():
    # exact expected effort over uniform data, uncoded width 4
    exact = sum(math.comb(4, w) / 16 * math.log2(math.comb(4, w)) for w in range(5)) * 2
    rep = attack_campaign(AttackConfig(4), n_trials=4000, seed=9)
    assert rep.mean_effort_bits == pytest.approx(exact, abs=0.1)


def test_campaign_deterministic_across_workers():
    cfg = AttackConfig(4)
    a = attack_campaign(cfg, RANDOM2, n_trials=200, noise_sigma=40 * uA, seed=5, traces_per_trial=3)
    b = attack_campaign(cfg, RANDOM2, n_trials=200, noise_sigma=40 * uA, seed=5, traces_per_trial=3,
                        workers=4)
    assert a.records == b.records and a.to_dict() == b.to_dict()


def test_campaign_preconditions():
    with pytest.raises(ParameterError):
        attack_campaign(AttackConfig(4), n_trials=0)
    with pytest.raises(ParameterError):
        attack_campaign(AttackConfig(4), traces_per_trial=0)


def test_campaign_with_process_variation_still_mostly_right():
    from sttleak.variation import PvModel, sample_devices
    devices = sample_devices(DeviceParams(), PvModel(), 8, seed=0)
    rep = attack_campaign(AttackConfig(8), n_trials=300, seed=0, devices=devices)
    assert rep.accuracy_old > 0.9 and rep.accuracy_new > 0.9
