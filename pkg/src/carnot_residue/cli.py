"""Command-line experiment runner.

Usage::

    carnot-residue VERB [-c CONFIG] [key=value ...]

``CONFIG`` is a plain-text file of ``key=value`` lines (``#`` starts a
comment). It may hold keys for any verb; command-line overrides must apply to
the chosen verb. Every artifact records a hash of the explicit settings
(file plus overrides; the verb, paths and ``threads`` excluded), so the artifacts of several verbs run
from one config share a hash and can be aggregated by ``report``.

Exit codes: 0 pass, 1 tolerance failure, 2 usage or config error,
3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import fibred_model as fm
from . import graded_lie as gl
from . import kernel_calculus as kc
from . import spectral_models as sm
from . import trace_ideals as ti
from . import wodzicki as wz
from . import zeta_residue as zr

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


# --- configuration schema ---------------------------------------------------


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    doc: str
    verbs: frozenset
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


VERBS = (
    "algebra-check",
    "local-trace",
    "cocycle-residue",
    "pole-residue",
    "weyl",
    "dixmier",
    "zeta-residue",
    "connes-check",
    "heisenberg-validate",
    "report",
)
ALL = frozenset(VERBS)
MODEL_VERBS = frozenset({"cocycle-residue", "pole-residue"})
STREAM_VERBS = frozenset({"weyl", "dixmier", "zeta-residue"})


def _v(*names: str) -> frozenset:
    return frozenset(names)


KEYS: dict[str, Key] = {
    "out_dir": Key(str, "carnot_out", "directory for CSV/JSON artifacts", ALL),
    "cache_dir": Key(str, "", "eigenvalue cache directory (default: $CARNOT_CACHE or ~/.cache)", ALL),
    "threads": Key(_int, os.cpu_count() or 1, "worker count (reductions are sequential and deterministic)", ALL,
                   lambda v: v >= 1, ">= 1"),
    "seed": Key(_int, 0, "random seed for sampled checks", ALL, lambda v: v >= 0, ">= 0"),
    # algebra
    "algebra": Key(str, "heisenberg", "heisenberg | engel | abelian", _v("algebra-check") | MODEL_VERBS,
                   lambda v: v in ("heisenberg", "engel", "abelian"), "heisenberg|engel|abelian"),
    "algebra_file": Key(str, "", "structure-constant file (overrides algebra)", _v("algebra-check") | MODEL_VERBS),
    "dim": Key(_int, 2, "dimension of the abelian algebra", _v("algebra-check") | MODEL_VERBS,
               lambda v: 1 <= v <= 8, "1..8"),
    "heis_n": Key(_int, 1, "n for the Heisenberg algebra of dimension 2n+1", _v("algebra-check") | MODEL_VERBS,
                  lambda v: 1 <= v <= 4, "1..4"),
    "samples": Key(_int, 1000, "random triples for the BCH associativity check", _v("algebra-check"),
                   lambda v: 1 <= v <= 10**6, "1..1e6"),
    # fibred models
    "test_function": Key(str, "gauss_bump", "gauss_bump | poly_bump | cos_window", MODEL_VERBS,
                         lambda v: v in fm.BUMPS, "|".join(fm.BUMPS)),
    "degree": Key(_int, 4, "poly_bump degree", MODEL_VERBS, lambda v: 2 <= v <= 20, "2..20"),
    "radius": Key(float, 1.0, "support radius", MODEL_VERBS, lambda v: 0 < v <= 100, "(0, 100]"),
    "amplitude": Key(float, 1.0, "test-function amplitude", MODEL_VERBS, math.isfinite, "finite"),
    "h_rate": Key(float, -1.0, "h-profile exp(h_rate * h)", MODEL_VERBS | _v("local-trace"),
                  lambda v: abs(v) <= 10, "|v| <= 10"),
    "lambdas": Key(_floats, (2.0, 4.0, 10.0), "cocycle lambda samples", _v("cocycle-residue"),
                   lambda v: len(v) >= 1 and all(x > 0 and x != 1 for x in v), "positive, != 1"),
    "h_values": Key(_floats, (0.0, 0.3, 1.0), "h samples", _v("pole-residue"),
                    lambda v: len(v) >= 1 and all(0 <= x <= 5 for x in v), "in [0, 5]"),
    "slope": Key(float, -1.0, "order function slope mu'(s0)", _v("pole-residue"),
                 lambda v: v != 0 and abs(v) <= 10, "nonzero, |v| <= 10"),
    "eps": Key(_floats, (), "epsilon schedule (default per verb)", _v("pole-residue", "zeta-residue"),
               lambda v: all(x > 0 for x in v), "positive"),
    # local traces
    "m": Key(float, -4.5, "real part of the order", _v("local-trace"), lambda v: -50 < v < 50, "(-50, 50)"),
    "m_imag": Key(float, 0.0, "imaginary part of the order", _v("local-trace"), lambda v: abs(v) < 50, "|v| < 50"),
    "h": Key(float, 1.0, "deformation parameter", _v("local-trace"), lambda v: 0 <= v <= 10, "[0, 10]"),
    "d_H": Key(_int, 4, "homogeneous dimension", _v("local-trace"), lambda v: 1 <= v <= 30, "1..30"),
    "n_max": Key(_int, 3, "largest Taylor order n", _v("local-trace"), lambda v: 1 <= v <= 6, "1..6"),
    # spectral
    "model": Key(str, "torus", "torus | heisenberg", STREAM_VERBS,
                 lambda v: v in ("torus", "heisenberg"), "torus|heisenberg"),
    "sequence": Key(str, "spectral", "spectral | harmonic | basel", _v("dixmier"),
                    lambda v: v in ("spectral", "harmonic", "basel"), "spectral|harmonic|basel"),
    "d": Key(_int, 2, "torus dimension", STREAM_VERBS | _v("connes-check"), lambda v: 1 <= v <= 5, "1..5"),
    "q": Key(_int, 1, "Heisenberg lattice parameter", STREAM_VERBS | _v("heisenberg-validate"),
             lambda v: 1 <= v <= 64, "1..64"),
    "lam_min": Key(float, 1e2, "Weyl fit lower end", _v("weyl", "heisenberg-validate"), lambda v: v > 1, "> 1"),
    "lam_max": Key(float, 1e4, "Weyl fit upper end", _v("weyl", "heisenberg-validate"),
                   lambda v: 1 < v <= 1e7, "(1, 1e7]"),
    "p": Key(float, 0.0, "singular values lambda^-p (0: d_H/m)", _v("dixmier"), lambda v: v >= 0, ">= 0"),
    "N_target": Key(_int, 10**6, "number of terms", _v("dixmier", "connes-check"),
                    lambda v: 256 <= v <= 10**9, "256..1e9"),
    "points": Key(_int, 11, "dyadic fit points", _v("dixmier", "connes-check"), lambda v: 8 <= v <= 30, "8..30"),
    "lam_cut": Key(float, 4096.0, "initial zeta cutoff", _v("zeta-residue"), lambda v: 16 < v <= 2**22, "(16, 4194304]"),
    "grid_nx": Key(_int, 8, "trapezoid points per torus axis", _v("connes-check"), lambda v: 2 <= v <= 64, "2..64"),
    "grid_order": Key(_int, 11, "Gauss nodes per polar angle", _v("connes-check"), lambda v: 5 <= v <= 64, "5..64"),
    "count": Key(_int, 50, "eigenvalues compared with the oracle", _v("heisenberg-validate"),
                 lambda v: 1 <= v <= 2000, "1..2000"),
    "resolution": Key(_int, 64, "oracle plane waves per side", _v("heisenberg-validate"),
                      lambda v: 8 <= v <= sm.MAX_RESOLUTION // 2, f"8..{sm.MAX_RESOLUTION // 2}"),
    # tolerances
    "tol": Key(float, math.nan, "pass tolerance (default per verb)", ALL - _v("report"), lambda v: v > 0 or math.isnan(v),
               "> 0"),
    "expect": Key(float, math.nan, "expected value for dixmier/zeta-residue (default: closed form)",
                  _v("dixmier", "zeta-residue"), lambda v: True),
    "hash": Key(str, "", "config hash to aggregate", _v("report")),
}

DEFAULT_TOL = {
    "algebra-check": 0.0,
    "local-trace": 1e-8,
    "cocycle-residue": 1e-6,
    "pole-residue": 1e-4,
    "weyl": 0.02,
    "dixmier": 0.02,
    "zeta-residue": 0.01,
    "connes-check": 0.03,
    "heisenberg-validate": 1e-3,
}


def read_config_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k] = v
    return out


def build_config(verb: str, file_items: dict[str, str], overrides: dict[str, str]) -> tuple[dict, dict]:
    """Validate raw settings; return (full config with defaults, explicit settings)."""
    for k in file_items:
        if k not in KEYS:
            raise ConfigError(f"unknown config key {k!r}")
    for k in overrides:
        if k not in KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        if verb not in KEYS[k].verbs:
            raise ConfigError(f"key {k!r} does not apply to {verb}")
    explicit = {**file_items, **overrides}
    cfg = {k: key.default for k, key in KEYS.items() if verb in key.verbs}
    normalized = {}
    for k, text in explicit.items():
        key = KEYS[k]
        try:
            value = key.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{k}: cannot parse {text!r} ({exc})") from None
        if not key.check(value):
            raise ConfigError(f"{k}={text} outside the allowed range {key.rule}")
        normalized[k] = value
        if verb in key.verbs:
            cfg[k] = value
    if math.isnan(cfg.get("tol", 0.0)):
        cfg["tol"] = DEFAULT_TOL[verb]
    return cfg, normalized


# keys that change where results go, not what they are
UNHASHED = frozenset({"out_dir", "cache_dir", "threads"})


def config_hash(explicit: dict) -> str:
    canon = json.dumps({k: explicit[k] for k in sorted(explicit) if k not in UNHASHED}, sort_keys=True, default=list)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# --- helpers ----------------------------------------------------------------


@dataclass
class Outcome:
    passed: bool
    results: dict
    csv_rows: list | None = None
    csv_header: list | None = None
    nonconverged: bool = False


def _algebra(cfg) -> gl.GradedLieAlgebra:
    if cfg.get("algebra_file"):
        return gl.load_algebra(cfg["algebra_file"])
    name = cfg["algebra"]
    if name == "engel":
        return gl.engel()
    if name == "abelian":
        return gl.abelian(cfg["dim"])
    return gl.heisenberg(cfg["heis_n"])


def _model(cfg) -> fm.FibredDensityModel:
    return fm.builtin_model(
        _algebra(cfg),
        cfg["test_function"],
        h_profile=fm.exponential(cfg["h_rate"]),
        radius=cfg["radius"],
        degree=cfg["degree"],
        amplitude=cfg["amplitude"],
    )


def _stream(cfg) -> sm.SpectralStream:
    if cfg["model"] == "heisenberg":
        return sm.heisenberg_stream(sm.HeisenbergSpec(q=cfg["q"]))
    return sm.torus_stream(cfg["d"])


def _cache(cfg) -> Path:
    return Path(cfg["cache_dir"]) if cfg.get("cache_dir") else sm.cache_dir()


def _closed_form_residue(cfg) -> float:
    if cfg["model"] == "heisenberg":
        return math.pi**4 / cfg["q"]
    d = cfg["d"]
    return (d / 2) * math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# --- verbs ------------------------------------------------------------------


def run_algebra_check(cfg) -> Outcome:
    g = _algebra(cfg)
    report = gl.verify_filtration(g)
    rng = random.Random(cfg["seed"])

    def rand_vec():
        return g.vector([Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(g.dim)])

    failures = 0
    if g.depth <= gl.MAX_BCH_ORDER:
        for _ in range(cfg["samples"]):
            x, y, z = rand_vec(), rand_vec(), rand_vec()
            lhs = gl.bch_multiply(g, gl.bch_multiply(g, x, y), z)
            rhs = gl.bch_multiply(g, x, gl.bch_multiply(g, y, z))
            failures += any(a != b for a, b in zip(lhs, rhs))
    t = Fraction(3, 2)
    det_ok = gl.dilation_determinant(g, t) == t ** gl.homogeneous_dimension(g)
    passed = report.passed and failures == 0 and det_ok
    return Outcome(passed, {
        "algebra": g.name, "dim": g.dim, "weights": list(g.weights), "d_H": gl.homogeneous_dimension(g),
        "filtration": report.summary(), "bch_samples": cfg["samples"], "associativity_failures": failures,
        "determinant_exact": det_ok,
    })


def run_local_trace(cfg) -> Outcome:
    k = kc.TraceProfile.exponential(cfg["h_rate"])
    m = complex(cfg["m"], cfg["m_imag"]) if cfg["m_imag"] else cfg["m"]
    rows, values = [], []
    for n in range(1, cfg["n_max"] + 1):
        if np.real(m) + cfg["d_H"] >= n:
            continue
        v = kc.local_trace_extended(k, m, cfg["h"], cfg["d_H"], n)
        values.append(v)
        rows.append([n, repr(complex(v).real), repr(complex(v).imag)])
    if not values:
        raise ConfigError("no n in 1..n_max has Re(m) < n - d_H")
    ref = values[-1]
    direct = None
    if np.real(m) < -cfg["d_H"]:
        direct = kc.local_trace_direct(k, m, cfg["h"], cfg["d_H"]).value
        ref = direct
    spread = max(abs(v - ref) for v in values) / max(abs(ref), 1e-300)
    res = {"values": [[complex(v).real, complex(v).imag] for v in values], "relative_spread": spread}
    if direct is not None:
        res["direct"] = [complex(direct).real, complex(direct).imag]
    return Outcome(spread <= cfg["tol"], res, rows, ["n", "re", "im"])


def run_cocycle_residue(cfg) -> Outcome:
    k = _model(cfg)
    r = kc.residue_from_cocycle(k, cfg["lambdas"])
    tr0 = fm.local_trace(k, 0.0)
    ok = r.deviation <= cfg["tol"] and abs(r.value - tr0) <= 1e-4 * max(1.0, abs(tr0))
    rows = [[repr(lam), repr(x)] for lam, x in zip(cfg["lambdas"], r.samples)]
    return Outcome(ok, {"residue": r.value, "deviation": r.deviation, "tr0": tr0}, rows, ["lambda", "ratio"])


def run_pole_residue(cfg) -> Outcome:
    k = _model(cfg)
    prof = kc.TraceProfile.from_model(k)
    tr0 = fm.local_trace(k, 0.0)
    expected = -tr0 / cfg["slope"]
    eps = cfg["eps"] or (1e-1, 1e-2, 1e-3)
    rows, worst, converged = [], 0.0, True
    for h in cfg["h_values"]:
        r = kc.trace_residue_at_pole(prof, k.d_H, h, cfg["slope"], eps=eps, tol=cfg["tol"])
        converged &= r.converged
        worst = max(worst, abs(r.value - expected))
        rows.append([repr(h), repr(float(np.real(r.value))), repr(r.error)])
    return Outcome(worst <= cfg["tol"], {"expected": expected, "max_abs_error": worst},
                   rows, ["h", "residue", "extrapolation_error"], nonconverged=not converged)


def run_weyl(cfg) -> Outcome:
    s = sm.cached_stream(_stream(cfg), cfg["lam_max"], _cache(cfg))
    fit = sm.weyl_fit(s, (cfg["lam_min"], cfg["lam_max"]))
    nominal = s.d_H / s.order_m
    rows = [[repr(float(a)), int(b)] for a, b in zip(fit.lams, fit.counts)]
    return Outcome(abs(fit.exponent - nominal) <= cfg["tol"], {
        "label": s.label, "C": fit.C, "C_nominal": fit.C_nominal, "exponent": fit.exponent,
        "stderr": fit.stderr, "nominal_exponent": nominal,
    }, rows, ["Lambda", "N"])


def run_dixmier(cfg) -> Outcome:
    kind = cfg["sequence"]
    if kind == "harmonic":
        sigma, expect = ti.from_function(lambda n: 1.0 / (n + 1), "harmonic"), 1.0
    elif kind == "basel":
        sigma, expect = ti.from_function(lambda n: 1.0 / (n + 1) ** 2, "basel"), 0.0
    else:
        base = _stream(cfg)
        p = cfg["p"] or base.d_H / base.order_m
        s = sm.cached_stream(base, 1e3, _cache(cfg))
        sigma = ti.from_spectral(s, p)
        expect = _closed_form_residue(cfg) * base.order_m / base.d_H if p == base.d_H / base.order_m else math.nan
    if not math.isnan(cfg["expect"]):
        expect = cfg["expect"]
    N = cfg["N_target"]
    Ns = ti.dyadic_schedule(max(1, N >> (cfg["points"] - 1)), N)
    S = ti.partial_sums(sigma, Ns)
    fit = ti.log_coefficient_fit(Ns, S)
    dix = float(S[-1]) / math.log(Ns[-1] + 2)
    rows = []
    prev = None
    for n, v in zip(Ns, S):
        rows.append([n, repr(float(v)), repr(float(v) / math.log(n + 2)), "" if prev is None else repr((v - prev) / math.log(2))])
        prev = v
    ok = True if math.isnan(expect) else abs(fit.c - expect) <= cfg["tol"] * max(abs(expect), 1.0)
    return Outcome(ok, {"c": fit.c, "spread": fit.spread, "dixmier_estimate": dix, "expected_c": expect},
                   rows, ["N", "S_N", "dixmier_estimate", "increment"])


def run_zeta_residue(cfg) -> Outcome:
    base = _stream(cfg)
    s = sm.cached_stream(base, cfg["lam_cut"], _cache(cfg))
    zp = zr.ZetaProfile(s, lam_cut=cfg["lam_cut"])
    r = zr.residue_at(zp, eps=cfg["eps"] or zr.DEFAULT_EPS)
    expect = cfg["expect"] if not math.isnan(cfg["expect"]) else _closed_form_residue(cfg)
    rows = zr.residue_table(r)
    rel = abs(r.value - expect) / abs(expect)
    c_val = base.order_m / base.d_H * r.value
    return Outcome(rel <= cfg["tol"], {
        "residue": r.value, "error": r.error, "expected": expect, "relative_error": rel,
        "C": c_val, "lam_cut": r.lam_cut,
    }, rows, ["epsilon", "zeta_value", "eps_times_zeta", "extrapolant"], nonconverged=not r.converged)


def run_connes_check(cfg) -> Outcome:
    if not 2 <= cfg["d"] <= 4:
        raise ConfigError("connes-check needs 2 <= d <= 4")
    grid = (cfg["grid_nx"], cfg["grid_order"])
    w = wz.res_w(wz.ClassicalSymbol.constant(cfg["d"]), grid)
    rep = wz.connes_compare(w.value / cfg["d"], ti.from_spectral(sm.torus_stream(cfg["d"]), cfg["d"] / 2),
                            cfg["N_target"], grid, cfg["points"])
    return Outcome(rep.rel_discrepancy <= cfg["tol"], rep.as_dict(), nonconverged=not w.converged)


def run_heisenberg_validate(cfg) -> Outcome:
    spec = sm.HeisenbergSpec(q=cfg["q"], validate_count=cfg["count"], resolution=cfg["resolution"])
    oracle = sm.discretization_oracle(spec, spec.resolution, spec.validate_count)
    check = sm.validate_heisenberg(spec, cfg["tol"])
    head = sm.heisenberg_stream(spec, override=True).expanded(spec.validate_count)
    fit = sm.weyl_fit(sm.heisenberg_stream(spec, override=True), (cfg["lam_min"], cfg["lam_max"]))
    rows = [[i, repr(float(a)), repr(float(b))] for i, (a, b) in enumerate(zip(head, oracle.values))]
    return Outcome(check.passed and abs(fit.exponent - 2.0) <= 0.02, {
        "validated": check.validated, "max_rel_error": check.max_rel_error, "oracle_excluded": oracle.excluded,
        "weyl_exponent": fit.exponent, "weyl_C_nominal": fit.C_nominal, "weyl_C_derived": spec.weyl_constant,
    }, rows, ["index", "stream", "oracle"], nonconverged=oracle.excluded > 0)


RUNNERS = {
    "algebra-check": run_algebra_check,
    "local-trace": run_local_trace,
    "cocycle-residue": run_cocycle_residue,
    "pole-residue": run_pole_residue,
    "weyl": run_weyl,
    "dixmier": run_dixmier,
    "zeta-residue": run_zeta_residue,
    "connes-check": run_connes_check,
    "heisenberg-validate": run_heisenberg_validate,
}


def _write_csv(path: Path, header: list, rows: list, meta: dict) -> None:
    import csv

    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def run_report(cfg, out: Path) -> int:
    arts = []
    for p in sorted(out.glob("*.json")):
        if p.name.startswith("report-"):
            continue
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        if "config_hash" in data and "verb" in data:
            arts.append(data)
    hashes = sorted({a["config_hash"] for a in arts})
    if cfg["hash"]:
        hashes = [h for h in hashes if h == cfg["hash"]]
    if not hashes:
        print(f"report: no artifacts found in {out}", file=sys.stderr)
        return EXIT_USAGE
    if len(hashes) > 1:
        print(f"report: artifacts from several configs {hashes}; select one with hash=...", file=sys.stderr)
        return EXIT_USAGE
    h = hashes[0]
    chosen = {a["verb"]: a for a in arts if a["config_hash"] == h}
    summary = {
        "config_hash": h,
        "verbs": {v: {"passed": a["passed"], "exit_code": a["exit_code"], "results": a["results"]}
                  for v, a in sorted(chosen.items())},
        "all_passed": all(a["passed"] for a in chosen.values()),
    }
    (out / f"report-{h}.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"report {h}: {'PASS' if summary['all_passed'] else 'FAIL'} ({len(chosen)} verbs)")
    return EXIT_PASS if summary["all_passed"] else EXIT_FAIL


def run(verb: str, file_items: dict[str, str], overrides: dict[str, str]) -> int:
    cfg, explicit = build_config(verb, file_items, overrides)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if verb == "report":
        return run_report(cfg, out)
    h = config_hash(explicit)
    start = time.perf_counter()
    outcome = RUNNERS[verb](cfg)
    elapsed = time.perf_counter() - start
    code = EXIT_NONCONVERGED if outcome.nonconverged else (EXIT_PASS if outcome.passed else EXIT_FAIL)
    stem = out / f"{verb}-{h}"
    if outcome.csv_rows is not None:
        _write_csv(stem.with_suffix(".csv"), outcome.csv_header, outcome.csv_rows, {"verb": verb, "config_hash": h})
    record = {
        "verb": verb,
        "config_hash": h,
        "config": _jsonable(explicit),
        "passed": bool(outcome.passed),
        "exit_code": code,
        "results": _jsonable(outcome.results),
    }
    stem.with_suffix(".json").write_text(json.dumps(record, indent=2, sort_keys=True))
    status = {EXIT_PASS: "PASS", EXIT_FAIL: "FAIL", EXIT_NONCONVERGED: "NONCONVERGED"}[code]
    print(f"{verb}: {status} [{h}] {elapsed:.2f}s")
    return code


def _usage() -> str:
    lines = ["verbs: " + ", ".join(VERBS), "", "config keys:"]
    for k, key in KEYS.items():
        rule = f" [{key.rule}]" if key.rule else ""
        lines.append(f"  {k}={key.default!r}{rule}: {key.doc}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="carnot-residue",
        description="Residue, trace and spectral checks on model Carnot manifolds.",
        epilog=_usage(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("verb", help="one of: " + ", ".join(VERBS))
    parser.add_argument("-c", "--config", type=Path, help="key=value config file")
    parser.add_argument("settings", nargs="*", help="key=value overrides")
    try:
        args = parser.parse_intermixed_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.verb not in VERBS:
        parser.print_usage(sys.stderr)
        print(f"unknown verb {args.verb!r}\n\n{_usage()}", file=sys.stderr)
        return EXIT_USAGE
    try:
        file_items = read_config_file(args.config) if args.config else {}
        overrides = {}
        for item in args.settings:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        return run(args.verb, file_items, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, sm.UnvalidatedStreamError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
