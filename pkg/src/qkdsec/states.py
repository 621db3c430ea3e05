"""Classical-quantum key states.

A :class:`CqState` is a list of branches ``(k_A, k_B, p, rho_E)``: with
probability ``p`` Alice holds key ``k_A``, Bob holds ``k_B`` and Eve holds the
density operator ``rho_E``. Keys are integers ``0 .. 2**bits - 1`` whose
binary expansion is big-endian (bit 0 of the key string is the most
significant bit of the integer).

The dense joint operator orders registers as ``(A, B, E)``, leftmost most
significant.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import opalg
from .config import get_config
from .errors import ResourceError, ValidationError


@dataclasses.dataclass(frozen=True)
class KeySpace:
    bits: int

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or self.bits < 1:
            raise ValidationError(f"key length must be a positive integer, got {self.bits!r}")
        if 2 ** self.bits > get_config().dim_cap:
            raise ResourceError(f"key space 2**{self.bits} exceeds cap {get_config().dim_cap}")

    @property
    def size(self) -> int:
        return 2 ** self.bits

    def key_bits(self, k: int) -> tuple[int, ...]:
        """Big-endian bit tuple of key index ``k``."""
        return tuple((k >> (self.bits - 1 - i)) & 1 for i in range(self.bits))


@dataclasses.dataclass(frozen=True)
class ClassicalDistribution:
    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("distribution must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > get_config().prob_sum_tol * max(1, p.size):
            raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @property
    def support(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs)

    @classmethod
    def uniform(cls, size: int) -> "ClassicalDistribution":
        return cls(tuple([1.0 / size] * size))


class Branch(NamedTuple):
    ka: int
    kb: int
    p: float
    eve_op: np.ndarray


@dataclasses.dataclass(frozen=True)
class CqState:
    keyspace: KeySpace
    eve_dim: int
    branches: tuple[Branch, ...]

    def __post_init__(self):
        cfg = get_config()
        if self.eve_dim < 1:
            raise ValidationError(f"eve_dim must be positive, got {self.eve_dim}")
        size = self.keyspace.size
        checked = []
        seen = set()
        total = 0.0
        for br in self.branches:
            ka, kb, p, op = br
            ka, kb, p = int(ka), int(kb), float(p)
            if not (0 <= ka < size and 0 <= kb < size):
                raise ValidationError(f"branch keys ({ka}, {kb}) outside key space of size {size}")
            if (ka, kb) in seen:
                raise ValidationError(f"duplicate branch for keys ({ka}, {kb})")
            seen.add((ka, kb))
            if p < 0 or not np.isfinite(p):
                raise ValidationError(f"branch ({ka}, {kb}) has invalid probability {p!r}")
            op = opalg.as_operator(op, f"Eve operator of branch ({ka}, {kb})")
            if op.shape[0] != self.eve_dim:
                raise ValidationError(
                    f"Eve operator of branch ({ka}, {kb}) has dim {op.shape[0]}, expected {self.eve_dim}"
                )
            if abs(np.trace(op).real - 1.0) > cfg.eve_trace_tol:
                raise ValidationError(f"Eve operator of branch ({ka}, {kb}) does not have unit trace")
            if opalg.eigvalsh(op)[-1] < -cfg.psd_tol:
                raise ValidationError(f"Eve operator of branch ({ka}, {kb}) is not positive semidefinite")
            total += p
            checked.append(Branch(ka, kb, p, op))
        if abs(total - 1.0) > cfg.prob_sum_tol * max(1, len(checked)):
            raise ValidationError(f"branch probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "branches", tuple(checked))

    @property
    def bits(self) -> int:
        return self.keyspace.bits

    @property
    def dim(self) -> int:
        return self.keyspace.size ** 2 * self.eve_dim

    def block(self, ka: int, kb: int) -> np.ndarray:
        """Unnormalized block ``p * rho_E`` for keys ``(ka, kb)``; zero if absent."""
        for br in self.branches:
            if br.ka == ka and br.kb == kb:
                return br.p * br.eve_op
        return np.zeros((self.eve_dim, self.eve_dim), dtype=complex)

    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        return {(br.ka, br.kb): br.p * br.eve_op for br in self.branches}

    def mismatch_prob(self) -> float:
        """Pr[k_A != k_B], read off the branch probabilities."""
        return float(sum(br.p for br in self.branches if br.ka != br.kb))

    def to_doc(self) -> dict:
        return {
            "bits": self.bits,
            "eve_dim": self.eve_dim,
            "branches": [
                {"ka": br.ka, "kb": br.kb, "p": br.p, "eve_op": opalg.matrix_to_doc(br.eve_op)}
                for br in self.branches
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CqState":
        try:
            return cls(
                KeySpace(int(doc["bits"])),
                int(doc["eve_dim"]),
                tuple(
                    Branch(int(b["ka"]), int(b["kb"]), float(b["p"]), opalg.matrix_from_doc(b["eve_op"]))
                    for b in doc["branches"]
                ),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed cq-state document: {exc}") from exc


def make_state(bits: int, branches: Iterable[Sequence], eve_dim: int | None = None) -> CqState:
    """Convenience constructor from ``(ka, kb, p, eve_op)`` tuples."""
    branches = [Branch(int(ka), int(kb), float(p), np.asarray(op, dtype=complex)) for ka, kb, p, op in branches]
    if eve_dim is None:
        if not branches:
            raise ValidationError("cannot infer eve_dim from an empty branch list")
        eve_dim = branches[0].eve_op.shape[0]
    return CqState(KeySpace(bits), eve_dim, tuple(branches))


def to_density(s: CqState) -> np.ndarray:
    """Dense joint operator on A (x) B (x) E."""
    size = s.keyspace.size
    opalg.check_dim(s.dim, "cq-state")
    out = np.zeros((s.dim, s.dim), dtype=complex)
    d = s.eve_dim
    for br in s.branches:
        off = (br.ka * size + br.kb) * d
        out[off:off + d, off:off + d] += br.p * br.eve_op
    return out


def ideal_state(ks: KeySpace, sigma) -> CqState:
    """Uniform, perfectly correlated key, independent of Eve's state ``sigma``."""
    sigma = opalg.validate_density(sigma, "sigma")
    p = 2.0 ** -ks.bits
    return CqState(ks, sigma.shape[0], tuple(Branch(k, k, p, sigma) for k in range(ks.size)))


def correctify(s: CqState) -> CqState:
    """Overwrite Bob's key with Alice's, keeping Eve's conditional operators.

    Branches that collide on ``(k_A, k_A)`` are merged into their
    probability-weighted mixture.
    """
    groups: dict[int, list[Branch]] = {}
    for br in s.branches:
        groups.setdefault(br.ka, []).append(br)
    branches = []
    for ka in sorted(groups):
        group = groups[ka]
        if len(group) == 1:
            # a lone branch passes through unchanged, which keeps this idempotent
            branches.append(Branch(ka, ka, group[0].p, group[0].eve_op))
            continue
        w = sum(br.p for br in group)
        if w > 0:
            op = sum(br.p * br.eve_op for br in group) / w
        else:
            op = group[0].eve_op
        branches.append(Branch(ka, ka, w, op))
    return CqState(s.keyspace, s.eve_dim, tuple(branches))


def sigma_avg(s: CqState) -> np.ndarray:
    """Eve's marginal state: probability-weighted average of her conditional operators."""
    out = np.zeros((s.eve_dim, s.eve_dim), dtype=complex)
    for br in s.branches:
        out += br.p * br.eve_op
    return (out + out.conj().T) / 2


def key_marginal(s: CqState, side: str = "A") -> ClassicalDistribution:
    side = side.upper()
    if side not in ("A", "B"):
        raise ValidationError(f"side must be 'A' or 'B', got {side!r}")
    probs = np.zeros(s.keyspace.size)
    for br in s.branches:
        probs[br.ka if side == "A" else br.kb] += br.p
    return ClassicalDistribution(tuple(probs))


def max_entangled_ket(ks: KeySpace) -> np.ndarray:
    """``sum_k 2**(-bits/2) |k, k>`` on the A (x) B register."""
    size = ks.size
    opalg.check_dim(size * size, "maximally entangled vector")
    v = np.zeros(size * size, dtype=complex)
    v[np.arange(size) * size + np.arange(size)] = 2.0 ** (-ks.bits / 2)
    return v


def key_register_dims(s: CqState) -> list[int]:
    return [s.keyspace.size, s.keyspace.size, s.eve_dim]
