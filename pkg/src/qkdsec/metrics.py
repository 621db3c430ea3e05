"""Distance and fidelity security quantities for cq-states.

Trace distances between cq-states that are block diagonal in the key register
are evaluated block by block, which is exact and avoids forming the
``size**2 * eve_dim`` dense operator.
"""

from __future__ import annotations

import math

import numpy as np

from . import opalg
from .errors import InvariantError, ValidationError
from .report import MetricReport
from .states import (
    CqState,
    KeySpace,
    correctify,
    ideal_state,
    key_marginal,
    key_register_dims,
    max_entangled_ket,
    sigma_avg,
    to_density,
)

SLACK = 1e-10


def _blockwise_distance(s1: CqState, s2: CqState) -> float:
    if s1.keyspace != s2.keyspace or s1.eve_dim != s2.eve_dim:
        raise ValidationError(
            f"cq-states differ in shape: bits {s1.bits}/{s2.bits}, eve_dim {s1.eve_dim}/{s2.eve_dim}"
        )
    b1, b2 = s1.blocks(), s2.blocks()
    total = 0.0
    zero = np.zeros((s1.eve_dim, s1.eve_dim), dtype=complex)
    for key in set(b1) | set(b2):
        diff = b1.get(key, zero) - b2.get(key, zero)
        total += opalg.trace_norm((diff + diff.conj().T) / 2)
    return 0.5 * total


def trace_distance(s1, s2) -> float:
    """Half the trace norm of ``s1 - s2`` (cq-states or density matrices)."""
    if isinstance(s1, CqState) and isinstance(s2, CqState):
        return _blockwise_distance(s1, s2)
    a = to_density(s1) if isinstance(s1, CqState) else opalg.as_operator(s1)
    b = to_density(s2) if isinstance(s2, CqState) else opalg.as_operator(s2)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch {a.shape} vs {b.shape}")
    return 0.5 * opalg.trace_norm(a - b)


def trace_distance_dense(s1: CqState, s2: CqState) -> float:
    """Dense-path trace distance, for cross-checking the blockwise route."""
    return 0.5 * opalg.trace_norm(to_density(s1) - to_density(s2))


def statistical_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"support mismatch {p.shape} vs {q.shape}")
    return 0.5 * float(np.sum(np.abs(p - q)))


def epsilon_decomposition(rho: CqState, sigma) -> MetricReport:
    """Split the distance to the ideal key into correctness and secrecy parts.

    ``eps_cor`` is the probability that the keys disagree, ``eps_sec`` the
    distance of the corrected state from the ideal one. The triangle
    inequality ``total <= eps_cor + eps_sec`` is checked.
    """
    ideal = ideal_state(rho.keyspace, sigma)
    zeta = correctify(rho)
    eps_cor = rho.mismatch_prob()
    to_zeta = trace_distance(rho, zeta)
    eps_sec = trace_distance(zeta, ideal)
    total = trace_distance(rho, ideal)
    if total > to_zeta + eps_sec + SLACK:
        raise InvariantError(f"triangle inequality violated: {total} > {to_zeta} + {eps_sec}")
    if total > eps_cor + eps_sec + SLACK:
        raise InvariantError(f"total distance {total} exceeds eps_cor + eps_sec = {eps_cor + eps_sec}")
    r = MetricReport()
    r.add("eps_cor", eps_cor, "epsilon_decomposition: Pr[k_A != k_B] from branch probabilities")
    r.add("eps_sec", eps_sec, "epsilon_decomposition: trace_distance(correctify(rho), ideal(sigma))")
    r.add("eps_total", total, "epsilon_decomposition: trace_distance(rho, ideal(sigma))")
    r.add("rho_to_corrected", to_zeta, "epsilon_decomposition: trace_distance(rho, correctify(rho))")
    r.add("eps_cor_plus_sec", eps_cor + eps_sec, "epsilon_decomposition: eps_cor + eps_sec (upper bound on eps_total)")
    return r


def statistical_distance_lb(s: CqState, sigma) -> float:
    """Classical lower bound: distance of Alice's key marginal from uniform."""
    zeta = correctify(s)
    p = key_marginal(zeta, "A").as_array()
    lb = statistical_distance(p, np.full(p.size, 2.0 ** -s.bits))
    d = trace_distance(zeta, ideal_state(s.keyspace, sigma))
    if lb > d + SLACK:
        raise InvariantError(f"statistical lower bound {lb} exceeds trace distance {d}")
    return lb


def fvg_bounds(s1, s2) -> MetricReport:
    """Trace distance bracketed by fidelity: ``1 - F <= D <= sqrt(1 - F**2)``."""
    a = opalg.validate_density(s1, "first state")
    b = opalg.validate_density(s2, "second state")
    d = trace_distance(a, b)
    f = opalg.fidelity(a, b)
    upper = math.sqrt(max(0.0, 1.0 - f * f))
    lower = 1.0 - f
    if d > upper + SLACK:
        raise InvariantError(f"trace distance {d} exceeds fidelity upper bound {upper}")
    if lower > d + SLACK:
        raise InvariantError(f"fidelity lower bound {lower} exceeds trace distance {d}")
    r = MetricReport()
    r.add("D", d, "fvg_bounds: trace_distance")
    r.add("F", f, "fvg_bounds: root fidelity tr sqrt(sqrt(A) B sqrt(A))")
    r.add("upper", upper, "fvg_bounds: sqrt(1 - F^2)")
    r.add("lower", lower, "fvg_bounds: 1 - F (extension: standard companion bound)")
    return r


def koashi_chain_check(zeta: CqState, sigma) -> MetricReport:
    """Check the fidelity chain that bounds the secrecy distance via ``|psi>``.

    ``L13`` uses the fidelity with ``|psi><psi| (x) sigma``, ``L15`` the
    overlap of Eve-traced ``zeta`` with ``|psi>``. Both orderings
    ``L15 <= L13`` and ``D <= L13`` are asserted; whether the two square-root
    expressions coincide is only recorded.
    """
    if any(br.ka != br.kb for br in zeta.branches):
        raise ValidationError("koashi_chain_check requires k_A == k_B on every branch")
    sigma = opalg.validate_density(sigma, "sigma")
    ks = zeta.keyspace
    psi = max_entangled_ket(ks)
    psi_proj = opalg.projector(psi)
    dense = to_density(zeta)
    f13 = opalg.fidelity(dense, opalg.tensor(psi_proj, sigma))
    l13 = math.sqrt(max(0.0, 1.0 - f13 * f13))
    ab = opalg.partial_trace(dense, key_register_dims(zeta), keep=[0, 1])
    overlap = float(np.real(psi.conj() @ ab @ psi))
    l15 = math.sqrt(max(0.0, 1.0 - overlap))
    d = trace_distance(zeta, ideal_state(ks, sigma))
    if l15 > l13 + SLACK:
        raise InvariantError(f"monotonicity violated: {l15} > {l13}")
    if d > l13 + SLACK:
        raise InvariantError(f"trace distance {d} exceeds fidelity bound {l13}")
    r = MetricReport()
    r.add("D", d, "koashi_chain_check: trace_distance(zeta, ideal(sigma))")
    r.add("L13", l13, "koashi_chain_check: sqrt(1 - F(zeta, |psi><psi| x sigma)^2)")
    r.add("L15", l15, "koashi_chain_check: sqrt(1 - <psi| tr_E zeta |psi>)")
    r.add("gap", l13 - l15, "koashi_chain_check: L13 - L15")
    r.add("equal", abs(l13 - l15) <= 1e-8, "koashi_chain_check: 1 if L13 == L15 within 1e-8")
    return r


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u * idx > css - 1)[0][-1]
    theta = (css[rho] - 1) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _hermitian_generators(d: int) -> list[np.ndarray]:
    gens = []
    for j in range(d):
        for k in range(j + 1, d):
            g = np.zeros((d, d), dtype=complex)
            g[j, k] = g[k, j] = 1.0
            gens.append(g)
            g = np.zeros((d, d), dtype=complex)
            g[j, k], g[k, j] = -1j, 1j
            gens.append(g)
    return gens


def _sigma_objective(s: CqState):
    blocks = s.blocks()
    w = 2.0 ** -s.bits
    size = s.keyspace.size

    def f(sigma: np.ndarray) -> float:
        total = 0.0
        for (ka, kb), blk in blocks.items():
            diff = blk - w * sigma if ka == kb else blk
            total += opalg.trace_norm((diff + diff.conj().T) / 2)
        missing = size - sum(1 for ka, kb in blocks if ka == kb)
        # diagonal keys with no branch contribute w * tr(sigma) each
        return 0.5 * (total + missing * w)

    return f


def _local_search(f, lam: np.ndarray, u: np.ndarray, tol: float = 1e-9, max_iter: int = 500):
    d = lam.size
    gens = _hermitian_generators(d)
    rot = {}

    def build(lam, u):
        return (u * lam) @ u.conj().T

    best = f(build(lam, u))
    step = 0.25
    for _ in range(max_iter):
        start = best
        for i in range(d):
            for sign in (1.0, -1.0):
                trial = lam.copy()
                trial[i] += sign * step
                trial = _project_simplex(trial)
                val = f(build(trial, u))
                if val < best:
                    lam, best = trial, val
        for gi, g in enumerate(gens):
            for sign in (1.0, -1.0):
                key = (gi, sign, step)
                if key not in rot:
                    w, v = np.linalg.eigh(g)
                    rot[key] = (v * np.exp(1j * sign * step * w)) @ v.conj().T
                trial_u = u @ rot[key]
                val = f(build(lam, trial_u))
                if val < best:
                    u, best = trial_u, val
        if start - best < tol:
            if step < 1e-6:
                break
            step /= 2
    return best, build(lam, u)


def search_min_sigma(s: CqState, restarts: int = 4, seed: int = 0) -> tuple[float, np.ndarray]:
    """Local search for the Eve state minimizing the distance to the ideal key.

    The search is a coordinate descent over eigenvalues (projected onto the
    simplex) and unitary rotations of sigma. The first start is the average
    state itself, the rest are seeded random states, so the result is never
    above the average-state value.
    """
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    f = _sigma_objective(s)
    avg = sigma_avg(s)
    rng = np.random.Generator(np.random.Philox(seed))
    d = s.eve_dim
    best, best_sigma = math.inf, avg
    for r in range(restarts):
        if r == 0:
            w, v = np.linalg.eigh(avg)
            lam, u = _project_simplex(w.real), v
        else:
            z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            u, _ = np.linalg.qr(z)
            lam = rng.dirichlet(np.ones(d))
        val, sig = _local_search(f, lam, u)
        if val < best:
            best, best_sigma = val, sig
    return best, best_sigma


def min_sigma_trace_distance(s: CqState, restarts: int = 4, seed: int = 0) -> MetricReport:
    """Compare the distance at Eve's average state with a searched minimum over sigma.

    The minimum comes from :func:`search_min_sigma`; being a local minimum it
    is an upper bound on the true minimum over sigma.
    """
    best, _ = search_min_sigma(s, restarts, seed)
    avg = sigma_avg(s)
    at_avg = trace_distance(s, ideal_state(s.keyspace, avg))
    best = min(best, at_avg)
    if best > at_avg + 1e-9:
        raise InvariantError("search minimum exceeds value at the average state")
    lb = statistical_distance_lb(s, avg)
    r = MetricReport()
    r.add("at_sigma_avg", at_avg, "min_sigma_trace_distance: trace_distance(rho, ideal(sigma_avg)) (fixed sigma)")
    r.add("min_over_sigma", best, "min_sigma_trace_distance: local minimum over sigma, upper bound on the true minimum")
    r.add("improvement", at_avg - best, "min_sigma_trace_distance: at_sigma_avg - min_over_sigma")
    r.add("statistical_lb", lb, "min_sigma_trace_distance: sigma-independent classical lower bound")
    r.add("restarts", restarts, "min_sigma_trace_distance: number of starts")
    return r
