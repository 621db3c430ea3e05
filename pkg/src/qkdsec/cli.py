"""Scenario runner and command-line entry point.

A scenario document is JSON::

    {"version": "v1", "kind": "risk", "params": {...}, "seed": 0,
     "output": {"path": "out.json", "format": "json"}}

A batch document is ``{"version": "v1", "scenarios": [...]}``. Every
randomized step draws from ``numpy.random.Philox`` keyed by the scenario seed,
so the same document always produces byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import coupling, discrimination, metrics, riskavg, states, toysim
from .config import using_config
from .errors import QkdsecError, ValidationError
from .opalg import matrix_from_doc
from .report import MetricReport, emit_report

log = logging.getLogger("qkdsec")

SCHEMA_VERSION = "v1"
KINDS = ("metrics", "coupling", "helstrom", "guess", "bb84", "risk", "averaging")
EXIT_IO = 5

# externally quoted decimal exponent for 2**-10**6, checked (not adopted) by the risk scenario
QUOTED_EXPONENT_2_POW_MINUS_1E6 = -326228


def _matrix(x, name: str) -> np.ndarray:
    if isinstance(x, dict):
        return matrix_from_doc(x)
    try:
        return np.asarray(x, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"params.{name} is not a matrix: {exc}") from exc


def _binary_example() -> states.CqState:
    plus = np.full((2, 2), 0.5)
    return states.make_state(1, [(0, 0, 0.5, np.diag([1.0, 0.0])), (1, 1, 0.5, plus)])


def _state_param(params: dict) -> states.CqState:
    if "state" in params:
        return states.CqState.from_doc(params["state"])
    return _binary_example()


def _sigma_param(params: dict, s: states.CqState) -> np.ndarray:
    if params.get("sigma") is not None:
        return _matrix(params["sigma"], "sigma")
    return states.sigma_avg(s)


def _run_metrics(params: dict, seed: int) -> MetricReport:
    s = _state_param(params)
    sigma = _sigma_param(params, s)
    r = MetricReport()
    r.merge(metrics.epsilon_decomposition(s, sigma))
    r.add("statistical_lb", metrics.statistical_distance_lb(s, sigma), "statistical_distance_lb")
    r.merge(metrics.koashi_chain_check(states.correctify(s), sigma), prefix="chain_")
    r.merge(metrics.min_sigma_trace_distance(s, int(params.get("restarts", 4)), seed), prefix="sigma_")
    return r


def _run_coupling(params: dict, seed: int) -> MetricReport:
    p = params.get("P", [0.75, 0.25])
    u = params.get("U", [0.5] * len(p))
    r = MetricReport()
    r.merge(coupling.independent_coupling_check(p, u))
    table = coupling.maximal_coupling(p, u)
    arr = table.as_array()
    for i in range(table.size):
        for j in range(table.size):
            r.add(f"R[{i},{j}]", arr[i, j], "maximal_coupling: joint table entry")
    if "key" in params:
        plain = params.get("plaintext", [1.0 / len(params["key"])] * len(params["key"]))
        r.merge(coupling.otp_secrecy_check(params["key"], plain), prefix="otp_")
    return r


def _run_helstrom(params: dict, seed: int) -> MetricReport:
    priors = params.get("priors", [0.5, 0.5])
    mats = params.get("states", [[[1, 0], [0, 0]], [[0.5, 0.5], [0.5, 0.5]]])
    if len(priors) != len(mats):
        raise ValidationError("params.priors and params.states differ in length")
    e = discrimination.Ensemble(tuple((p, _matrix(m, f"states[{i}]")) for i, (p, m) in enumerate(zip(priors, mats))))
    return discrimination.helstrom(e)


def _run_guess(params: dict, seed: int) -> MetricReport:
    s = _state_param(params)
    sigma = _sigma_param(params, s)
    r = discrimination.guess_bound(s, sigma)
    best = discrimination.best_guess_prob(s)
    r.add("exact", best["exact"], best.provenance("exact"))
    if "povm" in params:
        m = discrimination.Povm.from_doc(params["povm"])
        r.add("povm_guess", discrimination.povm_guess_prob(s, m), "povm_guess_prob")
    return r


def _run_bb84(params: dict, seed: int) -> MetricReport:
    q = params.get("intercept_prob", 1)
    if isinstance(q, str):
        q = Fraction(q)
    c = toysim.Bb84Config(
        rounds=int(params.get("rounds", 1)),
        intercept_prob=q,
        sift=bool(params.get("sift", True)),
        pa_mode=params.get("pa_mode", "none"),
    )
    return toysim.pipeline_report(c)


def _logprob_param(x) -> riskavg.LogProb:
    if isinstance(x, dict):
        if "log2" not in x:
            raise ValidationError("params.epsilon_sec object needs a 'log2' field")
        return riskavg.LogProb(float(x["log2"]))
    return riskavg.LogProb.from_prob(float(x))


def _run_risk(params: dict, seed: int) -> MetricReport:
    scen = riskavg.RiskScenario(
        key_rate_bits_per_sec=float(params.get("key_rate_bits_per_sec", 1e9)),
        key_len_bits=int(params.get("key_len_bits", 10**6)),
        duration_sec=float(params.get("duration_sec", riskavg.SECONDS_PER_YEAR)),
        epsilon_sec=_logprob_param(params.get("epsilon_sec", {"log2": -50})),
    )
    r = riskavg.leak_rate(scen)
    base = riskavg.fatality_baseline(float(params.get("fatalities", 7.5e3)), float(params.get("fleet", 7.9e7)))
    r.add("fatality_baseline", base, "fatality_baseline: fatalities / fleet")
    r.add("fatality_baseline_1sf", riskavg.one_sig_fig(base), "fatality_baseline: one significant figure")
    r.add("leaks_to_fatality_ratio", r["expected_leaks"] / base if base else float("inf"),
          "risk: expected_leaks / fatality_baseline")
    r.merge(riskavg.log2_compare(riskavg.LogProb.power_of_two(-scen.key_len_bits), scen.epsilon_sec),
            prefix="floor_vs_eps_")
    printed = params.get("printed_log10_exponent",
                         QUOTED_EXPONENT_2_POW_MINUS_1E6 if scen.key_len_bits == 10**6 else None)
    if printed is not None:
        r.merge(riskavg.printed_exponent_check(scen.key_len_bits, int(printed)))
    return r


def _run_averaging(params: dict, seed: int) -> MetricReport:
    r = MetricReport()
    eps = float(params.get("avg_bound", 1e-6))
    layers = params.get("layers", [0, 1, 2])
    if not isinstance(layers, list):
        layers = [layers]
    for m in layers:
        r.merge(riskavg.markov_cascade(eps, int(m)), prefix=f"layers{int(m)}_")
    if "samples" in params:
        r.merge(riskavg.markov_tail_demo(params["samples"], float(params["threshold"])), prefix="tail_")
    return r


_DISPATCH = {
    "metrics": _run_metrics,
    "coupling": _run_coupling,
    "helstrom": _run_helstrom,
    "guess": _run_guess,
    "bb84": _run_bb84,
    "risk": _run_risk,
    "averaging": _run_averaging,
}


def validate_scenario(doc) -> dict:
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object")
    if doc.get("version") != SCHEMA_VERSION:
        raise ValidationError(f"field 'version' must be {SCHEMA_VERSION!r}, got {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"field 'kind' must be one of {', '.join(KINDS)}; got {kind!r}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ValidationError("field 'params' must be an object")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ValidationError("field 'seed' must be a nonnegative integer")
    output = doc.get("output") or {}
    fmt = output.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ValidationError(f"field 'output.format' must be json or csv, got {fmt!r}")
    return {"kind": kind, "params": params, "seed": seed, "path": output.get("path"), "format": fmt}


def run_scenario(doc: dict) -> tuple[MetricReport, int]:
    """Validate and run one scenario; write its report if it names an output path.

    Returns the report (empty on failure) and the exit status.
    """
    try:
        sc = validate_scenario(doc)
        report = _DISPATCH[sc["kind"]](sc["params"], sc["seed"])
    except QkdsecError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return MetricReport(), exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        log.error("invalid params: %s", exc)
        return MetricReport(), ValidationError.exit_code
    if sc["path"]:
        try:
            Path(sc["path"]).write_bytes(emit_report(report, sc["format"]))
        except OSError as exc:
            log.error("cannot write %s: %s", sc["path"], exc)
            return report, EXIT_IO
    return report, 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdsec", description="Evaluate QKD security quantities on small exact instances.")
    p.add_argument("kind", nargs="?", choices=KINDS, help="scenario kind to run with --params")
    p.add_argument("--params", default="{}", help="kind-specific parameters as a JSON object, or @file")
    p.add_argument("--scenario", help="JSON file holding a scenario or a batch {'scenarios': [...]}")
    p.add_argument("--output", help="output file (single scenario) or directory (batch)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized steps (default 0)")
    p.add_argument("--dim-cap", type=int, default=None, help="maximum total operator dimension")
    return p


def _load_json(text_or_ref: str):
    if text_or_ref.startswith("@"):
        text_or_ref = Path(text_or_ref[1:]).read_text()
    return json.loads(text_or_ref)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if (args.kind is None) == (args.scenario is None):
        log.error("give exactly one of a scenario kind or --scenario")
        return ValidationError.exit_code
    overrides = {"dim_cap": args.dim_cap} if args.dim_cap else {}
    try:
        if args.scenario:
            doc = _load_json("@" + args.scenario)
        else:
            doc = {"version": SCHEMA_VERSION, "kind": args.kind, "params": _load_json(args.params)}
    except OSError as exc:
        log.error("cannot read input: %s", exc)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        log.error("invalid JSON: %s", exc)
        return ValidationError.exit_code

    docs = doc["scenarios"] if isinstance(doc, dict) and "scenarios" in doc else [doc]
    if isinstance(doc, dict) and "scenarios" in doc and doc.get("version") != SCHEMA_VERSION:
        log.error("field 'version' must be %r", SCHEMA_VERSION)
        return ValidationError.exit_code
    status = 0
    with using_config(**overrides):
        for i, d in enumerate(docs):
            if not isinstance(d, dict):
                log.error("scenario %d is not an object", i)
                status = status or ValidationError.exit_code
                continue
            d = dict(d)
            d.setdefault("version", doc.get("version") if isinstance(doc, dict) else None)
            if args.seed is not None:
                d["seed"] = args.seed
            out = dict(d.get("output") or {})
            out.setdefault("format", args.format)
            if args.output and "path" not in out:
                if len(docs) == 1:
                    out["path"] = args.output
                else:
                    Path(args.output).mkdir(parents=True, exist_ok=True)
                    out["path"] = str(Path(args.output) / f"{i:03d}_{d.get('kind')}.{out['format']}")
            d["output"] = out
            report, code = run_scenario(d)
            if code == 0 and not out.get("path"):
                sys.stdout.write(emit_report(report, out["format"]).decode())
            status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
