"""Eve's side: discriminating her conditional states to guess Alice's key.

Eve is credited for guessing ``k_A``. Her optimal success probability is
computed exactly for two keys (Helstrom) and for commuting conditional
states (MAP in the shared eigenbasis). Anything else falls back to the
pretty-good measurement, which is only a lower bound on the optimum.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import NamedTuple, Sequence

import numpy as np

from . import opalg
from .config import get_config
from .errors import InvariantError, ValidationError
from .metrics import SLACK, trace_distance
from .report import MetricReport
from .states import CqState, KeySpace, correctify, ideal_state, to_density


@dataclasses.dataclass(frozen=True)
class Povm:
    """Labeled positive operators summing to the identity."""

    dim: int
    elements: tuple[tuple[int, np.ndarray], ...]

    def __post_init__(self):
        tol = get_config().povm_tol
        total = np.zeros((self.dim, self.dim), dtype=complex)
        checked = []
        labels = set()
        for label, op in self.elements:
            op = opalg.as_operator(op, f"POVM element {label}")
            if op.shape[0] != self.dim:
                raise ValidationError(f"POVM element {label} has dim {op.shape[0]}, expected {self.dim}")
            if label in labels:
                raise ValidationError(f"duplicate POVM label {label}")
            labels.add(label)
            if opalg.eigvalsh(op)[-1] < -tol:
                raise ValidationError(f"POVM element {label} is not positive semidefinite")
            total += op
            checked.append((int(label), op))
        if np.max(np.abs(total - np.eye(self.dim))) > tol:
            raise ValidationError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(checked))

    def element(self, label: int) -> np.ndarray:
        for lab, op in self.elements:
            if lab == label:
                return op
        return np.zeros((self.dim, self.dim), dtype=complex)

    @property
    def labels(self) -> list[int]:
        return [lab for lab, _ in self.elements]

    def to_doc(self) -> list:
        return [{"label": lab, "op": opalg.matrix_to_doc(op)} for lab, op in self.elements]

    @classmethod
    def from_doc(cls, doc: list) -> "Povm":
        try:
            elements = tuple((int(e["label"]), opalg.matrix_from_doc(e["op"])) for e in doc)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed POVM document: {exc}") from exc
        if not elements:
            raise ValidationError("POVM document has no elements")
        return cls(elements[0][1].shape[0], elements)


@dataclasses.dataclass(frozen=True)
class Ensemble:
    items: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        items = tuple((float(p), opalg.validate_density(rho, f"ensemble state {i}"))
                      for i, (p, rho) in enumerate(self.items))
        probs = [p for p, _ in items]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > get_config().prob_sum_tol * max(1, len(probs)):
            raise ValidationError(f"ensemble priors {probs} are not a probability vector")
        if len({rho.shape for _, rho in items}) > 1:
            raise ValidationError("ensemble states have different dimensions")
        object.__setattr__(self, "items", items)


def helstrom(e: Ensemble) -> MetricReport:
    """Optimal probability of telling two weighted states apart."""
    if len(e.items) != 2:
        raise ValidationError(f"helstrom needs exactly two states, got {len(e.items)}")
    (p0, r0), (p1, r1) = e.items
    delta = p0 * r0 - p1 * r1
    p_guess = 0.5 + 0.5 * opalg.trace_norm(delta)
    meas = helstrom_measurement(delta)
    m0, m1 = meas.element(0), meas.element(1)
    achieved = p0 * np.trace(m0 @ r0).real + p1 * np.trace(m1 @ r1).real
    if abs(achieved - p_guess) > SLACK:
        raise InvariantError(f"Helstrom measurement achieves {achieved}, expected {p_guess}")
    r = MetricReport()
    r.add("p_guess", p_guess, "helstrom: 1/2 + 1/2 tr|p0 rho0 - p1 rho1|")
    r.add("p_achieved", achieved, "helstrom: success of the positive-eigenspace projective measurement")
    r.add("trace_norm", 2 * p_guess - 1, "helstrom: tr|p0 rho0 - p1 rho1|")
    r.add("rank_m0", round(np.trace(m0).real), "helstrom: rank of the projector onto the positive eigenspace")
    return r


def helstrom_measurement(delta) -> Povm:
    """Projector onto the positive eigenspace of ``delta`` (label 0) and its complement."""
    spec = opalg.eig_hermitian(delta)
    pos = spec.eigenvectors[:, spec.eigenvalues > 0]
    m0 = pos @ pos.conj().T
    d = m0.shape[0]
    return Povm(d, ((0, m0), (1, np.eye(d) - m0)))


def povm_guess_prob(s: CqState, m: Povm) -> float:
    """Probability that Eve's outcome equals Alice's key."""
    if m.dim != s.eve_dim:
        raise ValidationError(f"POVM dim {m.dim} does not match Eve dim {s.eve_dim}")
    missing = set(range(s.keyspace.size)) - set(m.labels)
    extra = set(m.labels) - set(range(s.keyspace.size))
    if missing or extra:
        raise ValidationError(f"POVM labels must cover the key space exactly (missing {sorted(missing)}, extra {sorted(extra)})")
    return float(sum(br.p * np.trace(m.element(br.ka) @ br.eve_op).real for br in s.branches))


def build_gamma(m: Povm, ks: KeySpace) -> np.ndarray:
    """``sum_k |k,k><k,k| (x) M_k`` on the A (x) B (x) E space."""
    size, d = ks.size, m.dim
    opalg.check_dim(size * size * d, "Gamma operator")
    missing = set(range(size)) - set(m.labels)
    if missing:
        raise ValidationError(f"POVM labels miss keys {sorted(missing)}")
    g = np.zeros((size * size * d,) * 2, dtype=complex)
    for k in range(size):
        off = (k * size + k) * d
        g[off:off + d, off:off + d] = m.element(k)
    mixed = ideal_state(ks, np.eye(d) / d)
    val = np.trace(g @ to_density(mixed)).real
    if abs(val - 2.0 ** -ks.bits) > SLACK:
        raise InvariantError(f"tr[Gamma ideal] = {val}, expected {2.0 ** -ks.bits}")
    return g


def _guess_operators(s: CqState) -> list[np.ndarray]:
    """``A_k = sum_{k_B} Pr(k, k_B) rho_E(k, k_B)``, one per Alice key."""
    d = s.eve_dim
    ops = [np.zeros((d, d), dtype=complex) for _ in range(s.keyspace.size)]
    for br in s.branches:
        ops[br.ka] += br.p * br.eve_op
    return [(a + a.conj().T) / 2 for a in ops]


class GuessResult(NamedTuple):
    value: float
    method: str  # "helstrom", "map" or "pgm"
    exact: bool
    povm: Povm


def _commuting_basis(ops: Sequence[np.ndarray]) -> np.ndarray | None:
    tol = get_config().commute_tol
    if all(not np.any(a - np.diag(np.diag(a))) for a in ops):
        return np.eye(ops[0].shape[0], dtype=complex)
    for a, b in itertools.combinations(ops, 2):
        if np.linalg.norm(a @ b - b @ a) >= tol:
            return None
    # generic real weights split degeneracies of the individual operators
    weights = [1.0 + np.sqrt(2.0) * k + np.pi * k * k for k in range(len(ops))]
    combo = sum(w * a for w, a in zip(weights, ops))
    v = opalg.eig_hermitian((combo + combo.conj().T) / 2).eigenvectors
    for a in ops:
        t = v.conj().T @ a @ v
        if np.linalg.norm(t - np.diag(np.diag(t))) >= tol:
            return None
    return v


def pretty_good_measurement(ops: Sequence[np.ndarray]) -> Povm:
    """PGM for unnormalized weighted states ``ops``; label = list position.

    The identity deficit outside the support of the average state is added to
    the element for the smallest key.
    """
    d = ops[0].shape[0]
    total = sum(ops)
    spec = opalg.eig_hermitian((total + total.conj().T) / 2)
    w, v = spec.eigenvalues, spec.eigenvectors
    keep = w > get_config().pinv_tol
    inv_sqrt = (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].conj().T
    support = v[:, keep] @ v[:, keep].conj().T
    elements = []
    for k, a in enumerate(ops):
        mk = inv_sqrt @ a @ inv_sqrt
        mk = (mk + mk.conj().T) / 2
        if k == 0:
            mk = mk + (np.eye(d) - support)
        elements.append((k, mk))
    # absorb rounding so the elements sum to the identity exactly enough to validate
    resid = np.eye(d) - sum(op for _, op in elements)
    elements[0] = (0, elements[0][1] + (resid + resid.conj().T) / 2)
    return Povm(d, tuple(elements))


def optimal_guess(s: CqState) -> GuessResult:
    ops = _guess_operators(s)
    d = s.eve_dim
    if len(ops) == 2:
        delta = ops[0] - ops[1]
        value = 0.5 * (np.trace(ops[0] + ops[1]).real + opalg.trace_norm(delta))
        return GuessResult(float(value), "helstrom", True, helstrom_measurement(delta))
    basis = _commuting_basis(ops)
    if basis is not None:
        diag = np.array([np.real(np.sum(basis.conj() * (a @ basis), axis=0)) for a in ops])
        # argmax picks the first maximum, i.e. the smallest key index on ties
        winner = np.argmax(diag, axis=0)
        value = float(np.sum(diag[winner, np.arange(d)]))
        elements = []
        for k in range(len(ops)):
            cols = basis[:, winner == k]
            elements.append((k, cols @ cols.conj().T))
        return GuessResult(value, "map", True, Povm(d, tuple(elements)))
    pgm = pretty_good_measurement(ops)
    value = float(sum(np.trace(op @ ops[k]).real for k, op in pgm.elements))
    return GuessResult(value, "pgm", False, pgm)


def best_guess_prob(s: CqState) -> MetricReport:
    res = optimal_guess(s)
    desc = {
        "helstrom": "exact optimum via two-key Helstrom measurement",
        "map": "exact optimum via MAP in the common eigenbasis of commuting states",
        "pgm": "pretty-good measurement, lower bound on the optimum (non-optimal)",
    }[res.method]
    r = MetricReport()
    r.add("best_guess", res.value, f"best_guess_prob: {desc}")
    r.add("exact", res.exact, f"best_guess_prob: 1 if exact optimum ({res.method})")
    r.add("uniform_floor", 2.0 ** -s.bits, "best_guess_prob: 2^-|K|, guessing without information")
    return r


def guess_bound(s: CqState, sigma) -> MetricReport:
    """Guessing bound ``2^-|K| + eps_sec`` and the optimum it caps."""
    eps_sec = trace_distance(correctify(s), ideal_state(s.keyspace, sigma))
    floor = 2.0 ** -s.bits
    bound = floor + eps_sec
    best = optimal_guess(s)
    if best.value > bound + SLACK:
        raise InvariantError(f"guessing probability {best.value} exceeds bound {bound}")
    r = MetricReport()
    r.add("bound", bound, "guess_bound: 2^-|K| + trace_distance(correctify(s), ideal(sigma))")
    r.add("eps_sec", eps_sec, "guess_bound: trace_distance(correctify(s), ideal(sigma))")
    r.add("uniform_floor", floor, "guess_bound: 2^-|K|")
    r.add("best_guess", best.value, f"guess_bound: optimal_guess ({best.method})")
    r.add("gap", bound - best.value, "guess_bound: bound - best_guess")
    return r
