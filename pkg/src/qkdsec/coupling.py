"""Couplings of key distributions and the one-time-pad secrecy check.

When every input probability is a dyadic rational with a modest denominator
(the usual case for bit-level distributions) the tables are built in exact
rational arithmetic; otherwise in floating point.
"""

from __future__ import annotations

import dataclasses
import math
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .config import get_config
from .errors import InvariantError, ValidationError
from .report import MetricReport
from .states import ClassicalDistribution

# largest denominator still treated as "dyadic" for exact arithmetic
_EXACT_DENOMINATOR = 2 ** 32


def _as_probs(d) -> list:
    if isinstance(d, ClassicalDistribution):
        d = d.probs
    vals = list(d)
    if not vals:
        raise ValidationError("distribution must be non-empty")
    if all(isinstance(v, Fraction) for v in vals):
        if any(v < 0 for v in vals) or not _sums_to_one(vals):
            raise ValidationError("exact distribution must be nonnegative and sum to exactly 1")
        return vals
    vals = [float(v) for v in vals]
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise ValidationError("probabilities must be finite and nonnegative")
    if abs(math.fsum(vals) - 1.0) > get_config().prob_sum_tol * max(1, len(vals)):
        raise ValidationError(f"probabilities sum to {math.fsum(vals)!r}, expected 1")
    return vals


def _exactify(p: list, q: list) -> tuple[list, list, bool]:
    """Return exact Fractions if every entry is dyadic with a small denominator.

    Inputs that are already Fractions are kept exact whatever their denominator.
    """
    if all(isinstance(v, Fraction) for v in p + q):
        # _as_probs already checked that exact inputs sum to exactly one
        return p, q, True
    fp = [Fraction(v) for v in p]
    fq = [Fraction(v) for v in q]
    ok = all(f.denominator <= _EXACT_DENOMINATOR and f.denominator & (f.denominator - 1) == 0
             for f in fp + fq)
    if ok and _sums_to_one(fp) and _sums_to_one(fq):
        return fp, fq, True
    return p, q, False


def _sums_to_one(fracs: list) -> bool:
    # integer arithmetic over the common denominator; Fraction.__add__ is slow in bulk
    den = math.lcm(*(f.denominator for f in fracs))
    return sum(f.numerator * (den // f.denominator) for f in fracs) == den


@dataclasses.dataclass(frozen=True)
class CouplingTable:
    """Joint distribution ``joint[k, k']`` with row marginal ``p`` and column marginal ``u``."""

    joint: tuple[tuple, ...]
    p: tuple
    u: tuple
    exact: bool = False

    def __post_init__(self):
        n = len(self.p)
        if len(self.u) != n or len(self.joint) != n or any(len(row) != n for row in self.joint):
            raise ValidationError("coupling table shape does not match its marginals")
        tol = 0 if self.exact else 1e-10
        total = sum(sum(row) for row in self.joint)
        if abs(total - 1) > (0 if self.exact else 1e-12):
            raise InvariantError(f"coupling entries sum to {float(total)!r}")
        for k in range(n):
            if abs(sum(self.joint[k]) - self.p[k]) > tol:
                raise InvariantError(f"row {k} sum does not match the first marginal")
            if abs(sum(row[k] for row in self.joint) - self.u[k]) > tol:
                raise InvariantError(f"column {k} sum does not match the second marginal")

    @property
    def size(self) -> int:
        return len(self.p)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.joint])


def statistical_distance(p, u):
    p, u = _as_probs(p), _as_probs(u)
    if len(p) != len(u):
        raise ValidationError(f"support mismatch {len(p)} vs {len(u)}")
    half = Fraction(1, 2) if isinstance(p[0], Fraction) and isinstance(u[0], Fraction) else 0.5
    return half * sum(abs(a - b) for a, b in zip(p, u))


def maximal_coupling(p, u) -> CouplingTable:
    """Coupling with ``Pr[K != K'] = SD(p, u)``.

    The diagonal carries ``min(p, u)``; leftover mass ``S = p - min`` and
    ``T = u - min`` is placed off the diagonal as ``S(k) T(k') / SD``.
    """
    p, u = _as_probs(p), _as_probs(u)
    if len(p) != len(u) or not p:
        raise ValidationError(f"support mismatch {len(p)} vs {len(u)}")
    p, u, exact = _exactify(p, u)
    n = len(p)
    diag = [min(a, b) for a, b in zip(p, u)]
    s = [a - m for a, m in zip(p, diag)]
    t = [b - m for b, m in zip(u, diag)]
    sd = statistical_distance(p, u)
    zero = Fraction(0) if exact else 0.0
    joint = [[diag[k] if k == j else zero for j in range(n)] for k in range(n)]
    if sd > 0:
        for k in range(n):
            if s[k] == 0:
                continue
            for j in range(n):
                if t[j]:
                    joint[k][j] += s[k] * t[j] / sd
    elif any(s) or any(t):
        raise InvariantError("zero statistical distance with nonzero leftover mass")
    return CouplingTable(tuple(tuple(r) for r in joint), tuple(p), tuple(u), exact)


def independent_coupling(p, u) -> CouplingTable:
    p, u = _as_probs(p), _as_probs(u)
    if len(p) != len(u):
        raise ValidationError(f"support mismatch {len(p)} vs {len(u)}")
    p, u, exact = _exactify(p, u)
    joint = tuple(tuple(a * b for b in u) for a in p)
    return CouplingTable(joint, tuple(p), tuple(u), exact)


def mismatch_prob(t: CouplingTable):
    """``1 - sum_k joint[k, k]``: probability the coupled keys differ."""
    return 1 - sum(t.joint[k][k] for k in range(t.size))


def _is_point_mass(p) -> bool:
    return max(p) == 1


def independent_coupling_check(p, u) -> MetricReport:
    """Compare the mismatch of the product coupling with the statistical distance.

    The product coupling is valid but not maximal: its mismatch is at least the
    statistical distance and strictly above it unless one side is a point mass.
    """
    p, u = _as_probs(p), _as_probs(u)
    sd = statistical_distance(p, u)
    m_max = mismatch_prob(maximal_coupling(p, u))
    m_ind = mismatch_prob(independent_coupling(p, u))
    if abs(float(sd) - float(m_max)) > 1e-12:
        raise InvariantError(f"maximal coupling mismatch {float(m_max)} differs from SD {float(sd)}")
    if float(sd) > float(m_ind) + 1e-12:
        raise InvariantError(f"independent mismatch {float(m_ind)} below SD {float(sd)}")
    r = MetricReport()
    r.add("sd", sd, "independent_coupling_check: 1/2 sum |P - U|")
    r.add("mismatch_maximal", m_max, "independent_coupling_check: mismatch_prob(maximal_coupling)")
    r.add("mismatch_independent", m_ind, "independent_coupling_check: mismatch_prob(P x U)")
    r.add("strict", float(m_ind) > float(sd), "independent_coupling_check: 1 if independent mismatch > SD")
    r.add("point_mass", _is_point_mass(p), "independent_coupling_check: 1 if P is a point mass")
    return r


def otp_secrecy_check(key_dist, plaintext_dist) -> MetricReport:
    """Enumerate ``C = X xor K`` and measure how far ``Pr(x|c)`` strays from ``Pr(x)``.

    Ciphertexts of probability zero have no conditional distribution and are
    left out of the maximum; their count is reported.
    """
    k = _as_probs(key_dist)
    x = _as_probs(plaintext_dist)
    n = len(k)
    if len(x) != n or n & (n - 1):
        raise ValidationError(f"key and plaintext must both range over 2**bits values (got {len(k)}, {len(x)})")
    k, x, exact = _exactify(k, x)
    if exact:
        dev, skipped = _otp_deviation_exact(k, x)
    else:
        pc = [sum(x[xi] * k[xi ^ c] for xi in range(n)) for c in range(n)]
        dev, skipped = 0.0, 0
        for c in range(n):
            if pc[c] == 0:
                skipped += 1
                continue
            for xi in range(n):
                dev = max(dev, abs(x[xi] * k[xi ^ c] / pc[c] - x[xi]))
    uniform = all(v == k[0] for v in k) if exact else max(k) - min(k) <= 1e-15
    r = MetricReport()
    r.add("deviation", dev, "otp_secrecy_check: max over (x, c) of |Pr(x|c) - Pr(x)|")
    r.add("key_uniform", uniform, "otp_secrecy_check: 1 if the key distribution is uniform")
    r.add("zero_prob_ciphertexts", skipped, "otp_secrecy_check: ciphertexts excluded (conditional undefined)")
    r.add("exact", exact, "otp_secrecy_check: 1 if evaluated in exact rational arithmetic")
    return r


def _otp_deviation_exact(k: list, x: list) -> tuple[Fraction, int]:
    """Exact OTP deviation using integer numerators over one common denominator.

    With ``k = K / D`` and ``x = X / D``, ``|Pr(x|c) - Pr(x)|`` equals
    ``|X K D - X PC| / (PC D)`` where ``PC = sum X K``; only one Fraction is
    formed. Small denominators use int64 arrays, larger ones Python integers.
    """
    n = len(k)
    den = math.lcm(*(f.denominator for f in k + x))
    kk = [f.numerator * (den // f.denominator) for f in k]
    xx = [f.numerator * (den // f.denominator) for f in x]
    if den <= 2 ** 18 and n <= 2 ** 8:
        # den**3 * n stays below 2**63
        idx = np.arange(n)[:, None] ^ np.arange(n)[None, :]
        xa = np.array(xx, dtype=np.int64)
        kc = np.array(kk, dtype=np.int64)[idx]
        pc = kc @ xa
        worst = np.max(np.abs(xa[None, :] * kc * den - xa[None, :] * pc[:, None]), axis=1)
        rows = [(int(w), int(c)) for w, c in zip(worst, pc)]
    else:
        rows = []
        for c in range(n):
            pc_c = sum(xx[i] * kk[i ^ c] for i in range(n))
            w = max(abs(xx[i] * kk[i ^ c] * den - xx[i] * pc_c) for i in range(n)) if pc_c else 0
            rows.append((w, pc_c))
    best_num, best_den = 0, 1
    skipped = 0
    for w, pc_c in rows:
        if pc_c == 0:
            skipped += 1
            continue
        # compare w / (pc * den) with the running maximum without forming a Fraction
        if w * best_den > best_num * pc_c * den:
            best_num, best_den = w, pc_c * den
    return Fraction(best_num, best_den), skipped


def otp_exhaustive_check(bits: int, denominator: int, plaintext_dist=None) -> MetricReport:
    """Check "deviation 0 iff key uniform" for every key distribution on a grid.

    Keys range over all distributions on ``2**bits`` values whose
    probabilities are multiples of ``1/denominator``. The plaintext defaults
    to the full-support, non-uniform ``(1, 2, ..., n) / sum``. All keys are
    tested at once in integer arithmetic, so the answer is exact.
    """
    n = 2 ** bits
    if plaintext_dist is None:
        plaintext_dist = [Fraction(i + 1, n * (n + 1) // 2) for i in range(n)]
    x = [Fraction(v) for v in _as_probs(plaintext_dist)]
    if len(x) != n:
        raise ValidationError(f"plaintext must range over {n} values, got {len(x)}")
    xden = math.lcm(*(f.denominator for f in x))
    den = math.lcm(xden, denominator)
    if den > 2 ** 18 or n > 2 ** 8:
        raise ValidationError("grid too fine for exact int64 evaluation")
    xa = np.array([f.numerator * (den // f.denominator) for f in x], dtype=np.int64)
    keys = np.array(list(_compositions(denominator, n)), dtype=np.int64) * (den // denominator)
    idx = np.arange(n)[:, None] ^ np.arange(n)[None, :]
    kc = keys[:, idx]  # kc[m, c, x] = K_m(x xor c)
    pc = kc @ xa
    # Pr(x|c) = Pr(x) for every x and every ciphertext of positive probability
    diff = xa * kc * den - xa * pc[:, :, None]
    zero_dev = np.all((diff == 0) | (pc[:, :, None] == 0), axis=(1, 2))
    uniform = np.all(keys == keys[:, :1], axis=1)
    r = MetricReport()
    r.add("keys_checked", len(keys), f"otp_exhaustive_check: distributions on {n} keys in steps of 1/{denominator}")
    r.add("uniform_keys", int(uniform.sum()), "otp_exhaustive_check: uniform key distributions on the grid")
    r.add("zero_deviation_keys", int(zero_dev.sum()), "otp_exhaustive_check: keys with Pr(x|c) = Pr(x) everywhere")
    r.add("iff_holds", bool(np.array_equal(zero_dev, uniform)),
          "otp_exhaustive_check: 1 if deviation is zero exactly for the uniform key")
    return r


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def sinkhorn_coupling(p: Sequence[float], u: Sequence[float], seed_table: np.ndarray,
                      iters: int = 2000, tol: float = 1e-14) -> CouplingTable:
    """Rescale a positive table to the marginals ``p`` and ``u`` (a generic valid coupling)."""
    a = np.array(seed_table, dtype=float)
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    for _ in range(iters):
        rows = a.sum(axis=1)
        a *= np.divide(p, rows, out=np.zeros_like(p), where=rows > 0)[:, None]
        cols = a.sum(axis=0)
        a *= np.divide(u, cols, out=np.zeros_like(u), where=cols > 0)[None, :]
        if np.max(np.abs(a.sum(axis=1) - p)) < tol:
            break
    return CouplingTable(tuple(map(tuple, a)), tuple(p), tuple(u))


def all_key_distributions(bits: int, denominator: int) -> Iterator[tuple[Fraction, ...]]:
    """Every distribution on ``2**bits`` keys with probabilities in multiples of ``1/denominator``."""
    n = 2 ** bits
    return (tuple(Fraction(c, denominator) for c in comp) for comp in _compositions(denominator, n))
