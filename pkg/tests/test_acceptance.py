"""Acceptance criteria, each at its stated tolerance and runtime limit.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import json
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from qkdsec import cli
from qkdsec.coupling import (
    all_key_distributions,
    independent_coupling_check,
    maximal_coupling,
    mismatch_prob,
    otp_exhaustive_check,
    otp_secrecy_check,
)
from qkdsec.discrimination import Ensemble, best_guess_prob, guess_bound, helstrom
from qkdsec.metrics import epsilon_decomposition, fvg_bounds, trace_distance
from qkdsec.opalg import fidelity, partial_trace
from qkdsec.random_instances import make_rng, random_cq_state, random_density, random_distribution
from qkdsec.riskavg import (
    LogProb,
    RiskScenario,
    fatality_baseline,
    leak_rate,
    log2_compare,
    markov_cascade,
    markov_tail_demo,
    printed_exponent_check,
)
from qkdsec.states import make_state, sigma_avg
from qkdsec.toysim import Bb84Config, pipeline_report, simulate_bb84

F = Fraction
KET0 = np.array([1.0, 0.0])
KETPLUS = np.array([1.0, 1.0]) / math.sqrt(2)


@contextmanager
def time_limit(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f} s, limit {seconds} s"


@pytest.mark.criterion(1, "risk scenario: keys, leaks, fatality baseline, ratio")
def test_criterion_1_risk_scenario():
    with time_limit(1):
        scen = RiskScenario(key_rate_bits_per_sec=1e9, key_len_bits=10**6, epsilon_sec=LogProb(-50))
        r = leak_rate(scen)
        base = fatality_baseline(7.5e3, 7.9e7)
    assert r["keys_1sf"] == 3e10
    assert 2.5e-5 <= r["expected_leaks"] <= 3.5e-5
    assert abs(base - 9.5e-5) <= 0.1e-5
    ratio = r["expected_leaks"] / base
    assert 0.1 < ratio < 10


@pytest.mark.criterion(2, "binary symmetric state saturates the guessing bound")
def test_criterion_2_binary_saturation():
    with time_limit(1):
        s = make_state(1, [(0, 0, 0.5, np.outer(KET0, KET0)), (1, 1, 0.5, np.outer(KETPLUS, KETPLUS))])
        sigma = sigma_avg(s)
        eps_sec = epsilon_decomposition(s, sigma)["eps_sec"]
        opt = helstrom(Ensemble(((0.5, np.outer(KET0, KET0)), (0.5, np.outer(KETPLUS, KETPLUS)))))["p_guess"]
        gb = guess_bound(s, sigma)
    # 0.353553 and 0.853553 are six-digit renderings of sqrt(2)/4 and 1/2 + sqrt(2)/4;
    # the 1e-9 tolerance applies to those exact values
    assert abs(eps_sec - math.sqrt(2) / 4) <= 1e-9
    assert abs(opt - (0.5 + math.sqrt(2) / 4)) <= 1e-9
    assert round(eps_sec, 6) == 0.353553 and round(opt, 6) == 0.853553
    assert gb["bound"] - gb["best_guess"] <= 1e-9
    assert abs(gb["best_guess"] - opt) <= 1e-9


@pytest.mark.criterion(3, "guessing bound holds on 1000 random cq-states, exact path >= 99%")
def test_criterion_3_random_guess_bound():
    rng = make_rng(2024)
    exact = 0
    with time_limit(30):
        for _ in range(1000):
            s = random_cq_state(rng, max_bits=2, max_eve_dim=4)
            best = best_guess_prob(s)
            gb = guess_bound(s, sigma_avg(s))
            assert best["best_guess"] <= 2.0 ** -s.bits + gb["eps_sec"] + 1e-10
            exact += int(best["exact"])
    assert exact >= 990


@pytest.mark.criterion(4, "maximal coupling mismatch = SD; independent coupling strict")
def test_criterion_4_coupling_lemma():
    rng = make_rng(7)
    strict_checked = 0
    with time_limit(5):
        for _ in range(1000):
            n = int(rng.integers(1, 33))
            p, u = random_distribution(rng, n), random_distribution(rng, n)
            sd = 0.5 * float(np.abs(p - u).sum())
            assert abs(float(mismatch_prob(maximal_coupling(p, u))) - sd) <= 1e-12
            r = independent_coupling_check(p, u)
            if p.max() < 1.0 and u.max() < 1.0:
                assert r["mismatch_independent"] > r["sd"]
                strict_checked += 1
    assert strict_checked > 900


@pytest.mark.criterion(5, "fidelity bound and partial-trace monotonicity on 1000 instances")
def test_criterion_5_fidelity_chain():
    rng = make_rng(5)
    with time_limit(60):
        for _ in range(1000):
            da = int(rng.integers(1, 3))
            db = int(rng.integers(1, 8 // da + 1))
            rank_a = int(rng.integers(1, da * db + 1))
            rank_b = int(rng.integers(1, da * db + 1))
            a = random_density(rng, da * db, rank_a)
            b = random_density(rng, da * db, rank_b)
            r = fvg_bounds(a, b)
            assert r["D"] <= r["upper"] + 1e-10
            ra, rb = partial_trace(a, [da, db], [1]), partial_trace(b, [da, db], [1])
            assert trace_distance(ra, rb) <= r["D"] + 1e-10
            assert fidelity(ra, rb) >= r["F"] - 1e-10
        pure = fvg_bounds(np.outer(KET0, KET0), np.outer(KETPLUS, KETPLUS))
    assert abs(pure["D"] - math.sqrt(1 - pure["F"] ** 2)) <= 1e-10


@pytest.mark.criterion(6, "BB84 intercept-resend pipeline sweep")
def test_criterion_6_bb84():
    with time_limit(120):
        one = simulate_bb84(Bb84Config(rounds=1, intercept_prob=1))
        assert one.qber_exact == F(1, 4)
        assert one.eve_guess_exact == F(3, 4)
        for q in (F(0), F(1, 4), F(1, 2), F(3, 4), F(1)):
            for n in (1, 2, 3):
                r = pipeline_report(Bb84Config(rounds=n, intercept_prob=q))
                assert r["best_guess"] <= r["bound"] + 1e-10
                if q == 0:
                    assert r["eps_sec"] == 0.0
                    assert r["best_guess"] == 2.0 ** -n


@pytest.mark.criterion(7, "Markov cascade values and saturating tail demo")
def test_criterion_7_markov():
    with time_limit(1):
        one = markov_cascade(1e-6, 1)["bound"]
        two = markov_cascade(1e-6, 2)["bound"]
        eps, t = 0.01, 0.1
        demo = markov_tail_demo([t] * 10 + [0.0] * 90, t)
    assert one == 2 * (1e-6) ** (1 / 2)
    assert two == 3 * (1e-6) ** (1 / 3)
    assert one == pytest.approx(2e-3, rel=1e-12)
    assert two == pytest.approx(3e-2, rel=1e-12)
    assert abs(demo["tail"] - eps / t) <= 1e-12
    assert abs(demo["markov_bound"] - demo["tail"]) <= 1e-12


@pytest.mark.criterion(8, "2^-10^6 in the log domain; quoted exponent flagged")
def test_criterion_8_log_domain(capsys):
    with time_limit(1):
        tiny = LogProb.power_of_two(-10**6)
        cmp = log2_compare(tiny, LogProb.power_of_two(-50))
        flag = printed_exponent_check(10**6, cli.QUOTED_EXPONENT_2_POW_MINUS_1E6)
        code = cli.main(["risk"])
        emitted = json.loads(capsys.readouterr().out)
    assert abs(tiny.scientific(6)[1] - (-301030)) <= 1
    assert cmp["ordering"] == -1 and cmp["log2_ratio"] < 0
    assert flag["discrepancy_flag"] == 1.0
    assert flag["computed_log10_exponent"] == -301030
    assert code == 0
    assert "FLAGGED" in emitted["printed_log10_exponent"]["provenance"]
    assert emitted["computed_log10_exponent"]["value"] == -301030


@pytest.mark.criterion(9, "one-time pad: deviation 0 iff key uniform, exhaustive 1-3 bits")
def test_criterion_9_otp():
    with time_limit(1):
        reports = [otp_exhaustive_check(bits, 8) for bits in (1, 2, 3)]
        # the uniform key and one biased key through the general per-key path
        uniform = otp_secrecy_check([F(1, 8)] * 8, [F(i + 1, 36) for i in range(8)])
        biased = otp_secrecy_check([F(1, 4)] + [F(3, 28)] * 7, [F(i + 1, 36) for i in range(8)])
    assert [r["keys_checked"] for r in reports] == [9, 165, 6435]
    for r in reports:
        assert r["iff_holds"] == 1.0
        assert r["uniform_keys"] == 1 and r["zero_deviation_keys"] == 1
    assert uniform["deviation"] == 0 and uniform["key_uniform"] == 1.0
    assert biased["deviation"] > 0 and biased["key_uniform"] == 0.0
