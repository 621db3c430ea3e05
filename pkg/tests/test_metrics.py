import math

import numpy as np
import pytest

from qkdsec import InvariantError, ValidationError
from qkdsec.metrics import (
    epsilon_decomposition,
    fvg_bounds,
    koashi_chain_check,
    min_sigma_trace_distance,
    search_min_sigma,
    statistical_distance,
    statistical_distance_lb,
    trace_distance,
    trace_distance_dense,
)
from qkdsec.opalg import fidelity, partial_trace
from qkdsec.random_instances import make_rng, random_cq_state, random_density
from qkdsec.states import KeySpace, correctify, ideal_state, make_state, sigma_avg, to_density

P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])
PLUS = np.full((2, 2), 0.5)


def binary_state():
    return make_state(1, [(0, 0, 0.5, P0), (1, 1, 0.5, PLUS)])


def oracle_trace_distance(a, b):
    """Half the sum of absolute eigenvalues, straight from numpy."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def test_binary_example_secrecy():
    s = binary_state()
    r = epsilon_decomposition(s, sigma_avg(s))
    # ||P0 - PLUS||_1 = sqrt(2), each block carries a quarter of it
    assert r["eps_sec"] == pytest.approx(math.sqrt(2) / 4, abs=1e-12)
    assert r["eps_cor"] == 0.0
    assert r["eps_total"] == pytest.approx(r["eps_sec"], abs=1e-12)


def test_decomposition_with_mismatch():
    # Bob flips the key with probability 0.1, Eve holds nothing
    one = np.eye(1)
    s = make_state(1, [(0, 0, 0.45, one), (0, 1, 0.05, one), (1, 1, 0.45, one), (1, 0, 0.05, one)])
    r = epsilon_decomposition(s, one)
    assert r["eps_cor"] == pytest.approx(0.1, abs=1e-15)
    assert r["eps_sec"] == pytest.approx(0.0, abs=1e-15)
    assert r["eps_total"] == pytest.approx(0.1, abs=1e-15)
    assert r["rho_to_corrected"] == pytest.approx(0.1, abs=1e-15)


def test_blockwise_matches_dense_and_oracle():
    rng = make_rng(11)
    for _ in range(1000):
        s1 = random_cq_state(rng, max_bits=2, max_eve_dim=3)
        sigma = random_density(rng, s1.eve_dim)
        ideal = ideal_state(s1.keyspace, sigma)
        fast = trace_distance(s1, ideal)
        dense = trace_distance_dense(s1, ideal)
        assert abs(fast - dense) <= 1e-12
        assert abs(fast - oracle_trace_distance(to_density(s1), to_density(ideal))) <= 1e-12


def test_triangle_and_bound_on_random_states():
    rng = make_rng(12)
    for _ in range(300):
        s = random_cq_state(rng)
        r = epsilon_decomposition(s, sigma_avg(s))
        assert r["eps_total"] <= r["eps_cor"] + r["eps_sec"] + 1e-10
        assert r["rho_to_corrected"] == pytest.approx(r["eps_cor"], abs=1e-12)


def test_trace_distance_shape_mismatch():
    s = binary_state()
    t = make_state(2, [(0, 0, 1.0, P0)])
    with pytest.raises(ValidationError):
        trace_distance(s, t)
    with pytest.raises(ValidationError):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


def test_statistical_distance():
    assert statistical_distance([0.75, 0.25], [0.5, 0.5]) == 0.25
    with pytest.raises(ValidationError):
        statistical_distance([1.0], [0.5, 0.5])


def qubit_fidelity(a, b):
    """Closed form for 2x2 densities: F^2 = tr(AB) + 2 sqrt(det A det B)."""
    da = max(np.linalg.det(a).real, 0.0)
    db = max(np.linalg.det(b).real, 0.0)
    return math.sqrt(max(np.trace(a @ b).real + 2 * math.sqrt(da * db), 0.0))


def test_fvg_pure_pair_equality():
    r = fvg_bounds(P0, PLUS)
    assert r["F"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert r["D"] == pytest.approx(r["upper"], abs=1e-10)
    assert r["D"] == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_fvg_random_qubits_against_closed_form():
    rng = make_rng(13)
    for _ in range(500):
        a = random_density(rng, 2, rank=int(rng.integers(1, 3)))
        b = random_density(rng, 2, rank=int(rng.integers(1, 3)))
        r = fvg_bounds(a, b)
        assert r["F"] == pytest.approx(qubit_fidelity(a, b), abs=1e-7)
        assert r["lower"] - 1e-10 <= r["D"] <= r["upper"] + 1e-10


def test_trace_distance_monotone_under_partial_trace():
    rng = make_rng(14)
    for _ in range(300):
        da, db = int(rng.integers(1, 3)), int(rng.integers(1, 5))
        a = random_density(rng, da * db)
        b = random_density(rng, da * db)
        full = trace_distance(a, b)
        for keep in ([0], [1]):
            ra = partial_trace(a, [da, db], keep)
            rb = partial_trace(b, [da, db], keep)
            assert trace_distance(ra, rb) <= full + 1e-10


def test_statistical_lb_is_below_distance():
    rng = make_rng(15)
    for _ in range(300):
        s = random_cq_state(rng)
        sigma = random_density(rng, s.eve_dim)
        lb = statistical_distance_lb(s, sigma)
        assert lb <= trace_distance(correctify(s), ideal_state(s.keyspace, sigma)) + 1e-10


def test_statistical_lb_value():
    one = np.eye(1)
    s = make_state(1, [(0, 0, 0.75, one), (1, 1, 0.25, one)])
    assert statistical_distance_lb(s, one) == pytest.approx(0.25, abs=1e-15)


def test_koashi_chain_on_binary_example():
    s = binary_state()
    r = koashi_chain_check(s, sigma_avg(s))
    assert r["L15"] <= r["L13"] + 1e-10
    assert r["D"] <= r["L13"] + 1e-10
    assert r["D"] == pytest.approx(math.sqrt(2) / 4, abs=1e-12)


def test_koashi_chain_ideal_and_no_eve():
    """Without correlations to Eve both bounds reduce to sqrt(1 - <psi|tau|psi>) = sqrt(1 - 2^-bits)."""
    rng = make_rng(18)
    for bits in (1, 2):
        sigma = random_density(rng, 2)
        r = koashi_chain_check(ideal_state(KeySpace(bits), sigma), sigma)
        assert r["D"] == pytest.approx(0.0, abs=1e-12)
        assert r["L13"] == pytest.approx(math.sqrt(1 - 2.0 ** -bits), abs=1e-10)
        assert r["L15"] == pytest.approx(math.sqrt(1 - 2.0 ** -bits), abs=1e-10)
        assert r["gap"] == pytest.approx(0.0, abs=1e-10)
    # no Eve register, biased key: the overlap with psi is sum_k P(k) 2^-bits = 2^-bits
    one = np.eye(1)
    s = make_state(2, [(0, 0, 0.4, one), (1, 1, 0.3, one), (2, 2, 0.2, one), (3, 3, 0.1, one)])
    r = koashi_chain_check(s, one)
    assert r["L15"] == pytest.approx(math.sqrt(0.75), abs=1e-10)
    assert r["L15"] <= r["L13"] + 1e-10
    assert r["D"] == pytest.approx(statistical_distance([0.4, 0.3, 0.2, 0.1], [0.25] * 4), abs=1e-12)


def test_koashi_chain_random_and_rejects_mismatch():
    rng = make_rng(16)
    for _ in range(100):
        z = correctify(random_cq_state(rng))
        r = koashi_chain_check(z, random_density(rng, z.eve_dim))
        assert r["L15"] <= r["L13"] + 1e-10
    bad = make_state(1, [(0, 1, 1.0, P0)])
    with pytest.raises(ValidationError):
        koashi_chain_check(bad, P0)


def grid_minimum(s, step=0.01):
    """Brute-force the distance to the ideal key over real qubit sigmas on a Bloch grid.

    Eve's operators are real, so the objective is symmetric under complex
    conjugation and, being convex, has a real minimizer.
    """
    xs = np.arange(-1.0, 1.0 + step / 2, step)
    x, z = np.meshgrid(xs, xs)
    inside = x ** 2 + z ** 2 <= 1.0 + 1e-12
    x, z = x[inside], z[inside]
    w = 2.0 ** -s.bits
    total = np.zeros_like(x)
    blocks = s.blocks()
    for k in range(s.keyspace.size):
        blk = blocks.get((k, k), np.zeros((2, 2)))
        a = blk[0, 0].real - w * (1 + z) / 2
        c = blk[1, 1].real - w * (1 - z) / 2
        b = blk[0, 1].real - w * x / 2
        tr, det = a + c, a * c - b * b
        disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
        total += np.abs(tr / 2 + disc) + np.abs(tr / 2 - disc)
    for (ka, kb), blk in blocks.items():
        if ka != kb:
            total += np.trace(blk).real
    return 0.5 * float(total.min())


def test_min_sigma_against_grid():
    v0 = np.array([math.cos(0.3), math.sin(0.3)])
    v1 = np.array([math.cos(1.2), math.sin(1.2)])
    cases = [
        binary_state(),
        make_state(1, [(0, 0, 0.7, np.outer(v0, v0)), (1, 1, 0.3, np.outer(v1, v1))]),
        make_state(1, [(0, 0, 0.6, np.diag([0.9, 0.1])), (1, 1, 0.4, PLUS)]),
    ]
    for s in cases:
        best, sigma = search_min_sigma(s, restarts=4, seed=0)
        grid = grid_minimum(s)
        assert best <= grid + 1e-9
        # the grid point nearest the optimum is within 0.01 in trace norm
        assert best >= grid - 0.01
        r = min_sigma_trace_distance(s, restarts=4, seed=0)
        assert r["min_over_sigma"] <= r["at_sigma_avg"] + 1e-12
        assert r["min_over_sigma"] >= r["statistical_lb"] - 1e-10


def test_min_sigma_beats_average_when_keys_are_biased():
    s = make_state(1, [(0, 0, 0.7, P0), (1, 1, 0.3, P1)])
    r = min_sigma_trace_distance(s, restarts=3, seed=1)
    assert r["improvement"] >= 0
    assert r["min_over_sigma"] == pytest.approx(grid_minimum(s), abs=0.01)


def test_min_sigma_deterministic():
    rng = make_rng(17)
    s = random_cq_state(rng, max_bits=1, max_eve_dim=3)
    a = search_min_sigma(s, restarts=3, seed=5)
    b = search_min_sigma(s, restarts=3, seed=5)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    with pytest.raises(ValidationError):
        search_min_sigma(s, restarts=0)
