"""Toy BB84 with an intercept-resend eavesdropper, by exact enumeration.

Every round is enumerated over Alice's bit and basis, Eve's intercept
decision, basis and outcome, and Bob's basis and outcome. Probabilities are
kept as :class:`fractions.Fraction`, so they are exact dyadic rationals times
powers of ``q`` and ``1 - q``.

Eve's record per round is one of five symbols: ``0`` (not intercepted) or
``1 + 2*basis + outcome``. Her conditional operator is diagonal in the record
basis, with records of successive rounds combined big-endian (base 5).
"""

from __future__ import annotations

import dataclasses
import itertools
from collections import defaultdict
from fractions import Fraction

import numpy as np

from .config import get_config
from .discrimination import best_guess_prob, guess_bound
from .errors import InvariantError, ResourceError, ValidationError
from .metrics import epsilon_decomposition
from .report import MetricReport
from .states import Branch, CqState, KeySpace, sigma_avg

EVE_SYMBOLS = 5
HALF = Fraction(1, 2)


@dataclasses.dataclass(frozen=True)
class Bb84Config:
    rounds: int = 1
    intercept_prob: float | Fraction = 1
    sift: bool = True
    pa_mode: str = "none"  # "none" or "parity"

    def __post_init__(self):
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValidationError(f"rounds must be a positive integer, got {self.rounds!r}")
        q = Fraction(self.intercept_prob)
        if not (0 <= q <= 1):
            raise ValidationError(f"intercept_prob must lie in [0, 1], got {self.intercept_prob!r}")
        if self.pa_mode not in ("none", "parity"):
            raise ValidationError(f"pa_mode must be 'none' or 'parity', got {self.pa_mode!r}")
        object.__setattr__(self, "rounds", int(self.rounds))

    @property
    def q(self) -> Fraction:
        return Fraction(self.intercept_prob)

    @property
    def key_bits(self) -> int:
        return 1 if self.pa_mode == "parity" else self.rounds


@dataclasses.dataclass(frozen=True)
class SimOutcome:
    state: CqState
    qber: float
    sifted_fraction: float
    qber_exact: Fraction
    key_probs: dict  # (k_A, k_B) -> exact Fraction
    eve_guess_exact: Fraction


def round_table(c: Bb84Config) -> dict[tuple[int, int, int], Fraction]:
    """Exact distribution of ``(alice_bit, bob_bit, eve_symbol)`` for one round.

    With sifting on, Bob's basis is conditioned to equal Alice's.
    """
    q = c.q
    table: dict[tuple[int, int, int], Fraction] = defaultdict(Fraction)

    def bob_outcomes(state_basis, state_bit, bob_basis):
        if state_basis == bob_basis:
            return [(state_bit, Fraction(1))]
        return [(0, HALF), (1, HALF)]

    bob_bases = (lambda ba: [(ba, Fraction(1))]) if c.sift else (lambda ba: [(0, HALF), (1, HALF)])
    for a, ba in itertools.product((0, 1), (0, 1)):
        w = HALF * HALF
        for bb, wb in bob_bases(ba):
            if q < 1:
                for b, wo in bob_outcomes(ba, a, bb):
                    table[(a, b, 0)] += w * wb * (1 - q) * wo
            if q > 0:
                for be in (0, 1):
                    for o, we in bob_outcomes(ba, a, be):
                        for b, wo in bob_outcomes(be, o, bb):
                            table[(a, b, 1 + 2 * be + o)] += w * wb * q * HALF * we * wo
    return dict(table)


def _check_caps(c: Bb84Config) -> None:
    cap = get_config().dim_cap
    eve_dim = EVE_SYMBOLS ** c.rounds
    if eve_dim > cap:
        raise ResourceError(f"Eve register dimension {eve_dim} (5**{c.rounds}) exceeds cap {cap}")
    if 2 ** c.key_bits > cap:
        raise ResourceError(f"key space 2**{c.key_bits} exceeds cap {cap}")


def _compress(bits: tuple[int, ...], pa_mode: str) -> int:
    if pa_mode == "parity":
        return sum(bits) % 2
    k = 0
    for bit in bits:
        k = (k << 1) | bit
    return k


def key_distribution_exact(c: Bb84Config) -> dict[tuple[int, int], Fraction]:
    """Exact ``Pr(k_A, k_B)``, marginalizing Eve round by round (cheap for many rounds)."""
    per_round: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    for (a, b, _), p in round_table(c).items():
        per_round[(a, b)] += p
    out: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    for combo in itertools.product(per_round.items(), repeat=c.rounds):
        p = Fraction(1)
        for _, w in combo:
            p *= w
        ka = _compress(tuple(ab[0] for ab, _ in combo), c.pa_mode)
        kb = _compress(tuple(ab[1] for ab, _ in combo), c.pa_mode)
        out[(ka, kb)] += p
    return dict(out)


def joint_table(c: Bb84Config) -> dict[tuple[int, int, int], Fraction]:
    """Exact ``Pr(k_A, k_B, eve_record)`` over all rounds."""
    rt = list(round_table(c).items())
    out: dict[tuple[int, int, int], Fraction] = defaultdict(Fraction)
    for combo in itertools.product(rt, repeat=c.rounds):
        p = Fraction(1)
        e = 0
        for (_, _, sym), w in combo:
            p *= w
            e = e * EVE_SYMBOLS + sym
        ka = _compress(tuple(k[0] for k, _ in combo), c.pa_mode)
        kb = _compress(tuple(k[1] for k, _ in combo), c.pa_mode)
        out[(ka, kb, e)] += p
    return dict(out)


def simulate_bb84(c: Bb84Config) -> SimOutcome:
    _check_caps(c)
    joint = joint_table(c)
    eve_dim = EVE_SYMBOLS ** c.rounds
    key_probs: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
    eve_given: dict[tuple[int, int], dict[int, Fraction]] = defaultdict(lambda: defaultdict(Fraction))
    guess_by_record: dict[int, dict[int, Fraction]] = defaultdict(lambda: defaultdict(Fraction))
    for (ka, kb, e), p in joint.items():
        key_probs[(ka, kb)] += p
        eve_given[(ka, kb)][e] += p
        guess_by_record[e][ka] += p
    n_branches = sum(1 for p in key_probs.values() if p)
    budget = get_config().dim_cap ** 2
    if n_branches * eve_dim ** 2 > budget:
        raise ResourceError(
            f"{n_branches} Eve operators of dim {eve_dim} exceed the storage budget dim_cap**2 = {budget}"
        )
    total = sum(key_probs.values())
    if total != 1:
        raise InvariantError(f"enumerated probabilities sum to {total}, expected exactly 1")

    branches = []
    for (ka, kb) in sorted(key_probs):
        p = key_probs[(ka, kb)]
        if p == 0:
            continue
        diag = np.zeros(eve_dim)
        for e, w in eve_given[(ka, kb)].items():
            diag[e] = float(w / p)
        branches.append(Branch(ka, kb, float(p), np.diag(diag).astype(complex)))
    state = CqState(KeySpace(c.key_bits), eve_dim, tuple(branches))

    rt = round_table(c)
    qber = sum((p for (a, b, _), p in rt.items() if a != b), Fraction(0))
    guess = sum((max(col.values()) for col in guess_by_record.values()), Fraction(0))
    return SimOutcome(
        state=state,
        qber=float(qber),
        sifted_fraction=0.5 if c.sift else 1.0,
        qber_exact=qber,
        key_probs=dict(key_probs),
        eve_guess_exact=guess,
    )


def pipeline_report(c: Bb84Config) -> MetricReport:
    """Simulate, then evaluate the secrecy decomposition and Eve's guessing bound."""
    out = simulate_bb84(c)
    s = out.state
    sigma = sigma_avg(s)
    r = MetricReport()
    r.add("rounds", c.rounds, "pipeline_report: config")
    r.add("intercept_prob", float(c.q), "pipeline_report: config")
    r.add("key_bits", c.key_bits, "pipeline_report: sifted key length after compression")
    r.add("eve_dim", s.eve_dim, "pipeline_report: Eve record dimension 5**rounds")
    r.add("qber", out.qber, "simulate_bb84: exact Pr[alice bit != bob bit] per round")
    r.add("sifted_fraction", out.sifted_fraction, "simulate_bb84: expected fraction of rounds kept by sifting")
    r.merge(epsilon_decomposition(s, sigma))
    gb = guess_bound(s, sigma)
    best = best_guess_prob(s)
    r.add("bound", gb["bound"], gb.provenance("bound") + " with sigma = sigma_avg")
    r.add("best_guess", best["best_guess"], best.provenance("best_guess"))
    r.add("best_guess_exact_enum", out.eve_guess_exact, "simulate_bb84: MAP guess in exact rational arithmetic")
    r.add("exact", best["exact"], best.provenance("exact"))
    r.add("gap", gb["bound"] - best["best_guess"], "pipeline_report: bound - best_guess")
    if best["best_guess"] > gb["bound"] + 1e-10:
        raise InvariantError("guessing probability exceeds its bound")
    return r
