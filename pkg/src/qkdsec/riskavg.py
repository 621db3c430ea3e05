"""Operational risk arithmetic with probabilities far below double range.

Probabilities such as ``2**-1_000_000`` are carried as base-2 logarithms;
sums use log-sum-exp with the dominant term factored out.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .errors import InvariantError, ValidationError
from .report import MetricReport

LOG10_2 = math.log10(2.0)
SECONDS_PER_YEAR = 365 * 24 * 3600  # 3.1536e7


@dataclasses.dataclass(frozen=True, order=True)
class LogProb:
    """A probability stored as its base-2 logarithm (``-inf`` for zero)."""

    log2_value: float

    @classmethod
    def from_prob(cls, p: float) -> "LogProb":
        if p < 0:
            raise ValidationError(f"probability must be nonnegative, got {p!r}")
        return cls(math.log2(p) if p > 0 else -math.inf)

    @classmethod
    def power_of_two(cls, exponent: float) -> "LogProb":
        """``2**exponent``."""
        return cls(float(exponent))

    @property
    def value(self) -> float:
        """Plain float value; underflows to 0.0 below double range."""
        if self.log2_value == -math.inf:
            return 0.0
        try:
            return 2.0 ** self.log2_value
        except OverflowError:
            return math.inf

    @property
    def log10_value(self) -> float:
        return self.log2_value * LOG10_2

    def __add__(self, other: "LogProb") -> "LogProb":
        hi, lo = max(self.log2_value, other.log2_value), min(self.log2_value, other.log2_value)
        if hi == -math.inf:
            return LogProb(-math.inf)
        return LogProb(hi + math.log2(1.0 + 2.0 ** (lo - hi)))

    def __mul__(self, other) -> "LogProb":
        if isinstance(other, LogProb):
            return LogProb(self.log2_value + other.log2_value)
        if other < 0:
            raise ValidationError("cannot scale a probability by a negative factor")
        if other == 0:
            return LogProb(-math.inf)
        return LogProb(self.log2_value + math.log2(other))

    __rmul__ = __mul__

    def scientific(self, digits: int = 1) -> tuple[float, int]:
        """``(mantissa, exponent)`` with ``1 <= mantissa < 10`` after rounding to ``digits`` significant figures."""
        if self.log2_value == -math.inf:
            return 0.0, 0
        l10 = self.log10_value
        exp = math.floor(l10)
        mant = round(10.0 ** (l10 - exp), max(digits - 1, 0))
        if mant >= 10.0:
            mant, exp = mant / 10.0, exp + 1
        return mant, exp

    def render(self, digits: int = 1) -> str:
        mant, exp = self.scientific(digits)
        return f"{mant:.{max(digits - 1, 0)}f}e{exp}"


def _as_logprob(x) -> LogProb:
    return x if isinstance(x, LogProb) else LogProb.from_prob(float(x))


def one_sig_fig(x: float) -> float:
    """Round to one significant figure, the precision of the quoted risk figures."""
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.0e}")


def log2_compare(a, b) -> MetricReport:
    """Order two probabilities in the log domain.

    ``ordering`` is -1, 0 or 1 as ``a`` is below, equal to or above ``b``;
    ``log2_ratio`` is ``log2(a / b)``.
    """
    a, b = _as_logprob(a), _as_logprob(b)
    order = (a.log2_value > b.log2_value) - (a.log2_value < b.log2_value)
    ratio = a.log2_value - b.log2_value if math.isfinite(a.log2_value) or math.isfinite(b.log2_value) else 0.0
    r = MetricReport()
    r.add("ordering", order, "log2_compare: sign of log2(a) - log2(b)")
    r.add("log2_a", a.log2_value, "log2_compare: base-2 logarithm of a")
    r.add("log2_b", b.log2_value, "log2_compare: base-2 logarithm of b")
    r.add("log2_ratio", ratio, "log2_compare: log2(a / b)")
    r.add("log10_a", a.log10_value, f"log2_compare: base-10 logarithm of a, a ~ {a.render(4)}")
    r.add("log10_b", b.log10_value, f"log2_compare: base-10 logarithm of b, b ~ {b.render(4)}")
    r.add("log10_exponent_a", a.scientific(4)[1], "log2_compare: decimal exponent of a")
    r.add("log10_exponent_b", b.scientific(4)[1], "log2_compare: decimal exponent of b")
    return r


def printed_exponent_check(key_bits: int, printed_log10_exponent: int) -> MetricReport:
    """Compare an externally quoted decimal exponent for ``2**-key_bits`` with the computed one.

    A mismatch is reported as a flagged note; the quoted figure is never
    used in further arithmetic.
    """
    computed = LogProb.power_of_two(-key_bits).scientific(6)[1]
    mismatch = computed != printed_log10_exponent
    r = MetricReport()
    r.add("computed_log10_exponent", computed, f"printed_exponent_check: floor(log10(2^-{key_bits}))")
    note = ("FLAGGED: quoted exponent disagrees with computation; not adopted"
            if mismatch else "quoted exponent agrees with computation")
    r.add("printed_log10_exponent", printed_log10_exponent, f"printed_exponent_check: {note}")
    r.add("discrepancy_flag", mismatch, "printed_exponent_check: 1 if quoted and computed exponents differ")
    return r


def guess_bound_log(key_bits: int, eps_sec) -> LogProb:
    """``2**-key_bits + eps_sec`` for key lengths beyond double range."""
    return LogProb.power_of_two(-key_bits) + _as_logprob(eps_sec)


@dataclasses.dataclass(frozen=True)
class RiskScenario:
    key_rate_bits_per_sec: float
    key_len_bits: int
    duration_sec: float = SECONDS_PER_YEAR
    epsilon_sec: LogProb | float = LogProb(-50.0)

    def __post_init__(self):
        eps = _as_logprob(self.epsilon_sec)
        if self.key_rate_bits_per_sec <= 0 or self.key_len_bits <= 0 or self.duration_sec <= 0:
            raise ValidationError("key rate, key length and duration must be positive")
        if eps.log2_value > 0:
            raise ValidationError("epsilon_sec must be a probability")
        object.__setattr__(self, "epsilon_sec", eps)


def leak_rate(r: RiskScenario) -> MetricReport:
    """Expected number of keys Eve guesses over the scenario's duration."""
    keys = r.key_rate_bits_per_sec * r.duration_sec / r.key_len_bits
    per_key = guess_bound_log(r.key_len_bits, r.epsilon_sec)
    leaks = per_key * keys
    out = MetricReport()
    out.add("keys", keys, "leak_rate: key_rate * duration / key_len")
    out.add("keys_1sf", one_sig_fig(keys), "leak_rate: keys rounded to one significant figure")
    out.add("log2_per_key_guess", per_key.log2_value, "leak_rate: log2(eps_sec + 2^-key_len)")
    out.add("expected_leaks", leaks.value, "leak_rate: keys * (eps_sec + 2^-key_len), log-domain")
    out.add("expected_leaks_1sf", one_sig_fig(leaks.value),
            "leak_rate: expected_leaks rounded to one significant figure")
    out.add("log2_expected_leaks", leaks.log2_value, "leak_rate: log2 of expected_leaks")
    return out


def fatality_baseline(fatalities: float, fleet: float) -> float:
    """Fatal accidents per vehicle per year."""
    if fleet <= 0:
        raise ValidationError("fleet size must be positive")
    if fatalities < 0:
        raise ValidationError("fatality count must be nonnegative")
    return fatalities / fleet


def markov_cascade(avg_bound: float, layers: int) -> MetricReport:
    """Bound on an individual (unaveraged) distance after ``layers`` Markov splits.

    With ``m`` layers the thresholds ``eps**(m/(m+1)), eps**((m-1)/(m+1)), ...``
    make every exception probability and the final conditional bound equal to
    ``eps**(1/(m+1))``; the union gives ``(m+1) * eps**(1/(m+1))``.
    """
    if not (0 < avg_bound < 1):
        raise ValidationError(f"avg_bound must lie in (0, 1), got {avg_bound!r}")
    if int(layers) != layers or layers < 0:
        raise ValidationError(f"layers must be a nonnegative integer, got {layers!r}")
    m = int(layers)
    per_term = avg_bound ** (1.0 / (m + 1))
    value = (m + 1) * per_term
    r = MetricReport()
    r.add("bound", value, f"markov_cascade: (layers+1) * eps^(1/(layers+1)) with layers={m}")
    r.add("per_term", per_term, "markov_cascade: eps^(1/(layers+1)), each exception probability and the final bound")
    for j in range(1, m + 1):
        r.add(f"threshold_{j}", avg_bound ** ((m + 1 - j) / (m + 1)),
              f"markov_cascade: Markov threshold at layer {j}")
    return r


def markov_tail_demo(samples: Sequence[float], threshold: float) -> MetricReport:
    """Empirical tail ``Pr[x >= t]`` next to the Markov bound ``mean / t``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValidationError("markov_tail_demo needs at least one sample")
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    if np.any(x < 0):
        raise ValidationError("samples must be nonnegative")
    mean = float(np.mean(x))
    tail = float(np.count_nonzero(x >= threshold)) / x.size
    bound = mean / threshold
    if tail > bound + 1e-12:
        raise InvariantError(f"empirical tail {tail} exceeds Markov bound {bound}")
    r = MetricReport()
    r.add("mean", mean, "markov_tail_demo: empirical mean")
    r.add("tail", tail, "markov_tail_demo: empirical Pr[x >= threshold]")
    r.add("markov_bound", bound, "markov_tail_demo: mean / threshold")
    r.add("slack", bound - tail, "markov_tail_demo: markov_bound - tail")
    return r
