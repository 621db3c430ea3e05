"""Seeded random operators, cq-states and distributions for property sweeps.

All draws come from ``numpy.random.Philox`` (a counter-based generator), so a
seed reproduces the same instances on any platform.
"""

from __future__ import annotations

import numpy as np

from .discrimination import Povm
from .states import Branch, CqState, KeySpace


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_distribution(rng: np.random.Generator, n: int, zero_prob: float = 0.2) -> np.ndarray:
    p = rng.exponential(size=n)
    p[rng.random(n) < zero_prob] = 0.0
    if p.sum() == 0:
        p[rng.integers(n)] = 1.0
    return p / p.sum()


def random_cq_state(rng: np.random.Generator, max_bits: int = 2, max_eve_dim: int = 4,
                    commuting: bool | None = None) -> CqState:
    """Random cq-state with possibly mismatched keys.

    For more than two keys the Eve operators share one random eigenbasis
    unless ``commuting`` is False, so the exact MAP optimum applies.
    """
    bits = int(rng.integers(1, max_bits + 1))
    d = int(rng.integers(1, max_eve_dim + 1))
    ks = KeySpace(bits)
    if commuting is None:
        commuting = ks.size > 2
    pairs = [(a, b) for a in range(ks.size) for b in range(ks.size)]
    n_branch = int(rng.integers(1, len(pairs) + 1))
    chosen = rng.choice(len(pairs), size=n_branch, replace=False)
    # bias toward correlated keys, as a real protocol would be
    weights = np.array([3.0 if pairs[i][0] == pairs[i][1] else 1.0 for i in chosen]) * rng.exponential(size=n_branch)
    probs = weights / weights.sum()
    u = random_unitary(rng, d)
    branches = []
    for i, p in zip(chosen, probs):
        if commuting:
            lam = rng.dirichlet(np.ones(d))
            op = (u * lam) @ u.conj().T
        else:
            op = random_density(rng, d, rank=int(rng.integers(1, d + 1)))
        branches.append(Branch(pairs[i][0], pairs[i][1], float(p), (op + op.conj().T) / 2))
    # renormalize so probabilities sum to one to full precision
    total = sum(b.p for b in branches)
    branches = [b._replace(p=b.p / total) for b in branches]
    return CqState(ks, d, tuple(branches))


def random_povm(rng: np.random.Generator, d: int, n: int) -> Povm:
    """Random ``n``-outcome POVM: ``S^{-1/2} G_k S^{-1/2}`` for random positive ``G_k``."""
    gs = []
    for _ in range(n):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        gs.append(g @ g.conj().T)
    s = sum(gs)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    elements = [inv_sqrt @ g @ inv_sqrt for g in gs]
    elements = [(e + e.conj().T) / 2 for e in elements]
    resid = np.eye(d) - sum(elements)
    elements[0] = elements[0] + (resid + resid.conj().T) / 2
    return Povm(d, tuple(enumerate(elements)))


def random_effect(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random operator ``0 <= G <= I``."""
    u = random_unitary(rng, d)
    return (u * rng.random(d)) @ u.conj().T
