"""Batch command-line front end.

    selfsim --config run.json [--seed 7] [--workers 4] [--format csv|json] [--out r.csv]

The config is ``{"command": ..., "params": {...}, "seed": int, "output_path": ...}``.
Exit status: 0 all rows pass, 1 some row fails, 2 bad config, 3 numerical
guard tripped, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from importlib import metadata as _md

import jsonschema
import numpy as np

from . import _kernels
from .errors import NumericalGuardError
from .gaussian import (atomic_mixing_limit, covariance, exp_prime, mixing_diagnostic,
                       sample_paths, spectral_selfsim_test)
from .lift import (LiftSpec, build_sigma, circle_density, h_sigma_membership, parse_scale,
                   standard_lift)
from .measures import LINE, AtomicMeasure, GridDensity, pushforward
from .poisson import (Box, LogNormalKappa, ProductFlowSpec, QuasiInvarianceError, Window,
                      conjugacy_errors, cylinder_verify, kappa_from_json, kappa_group_test,
                      orthogonality_report, poisson_verify_simple, q_preservation_pvalue,
                      sample_poisson, tau_spectral)
from .report import Report, row
from .riesz import (RieszSpec, as_fraction, criteria, fourier_coefficient,
                    h_membership_terms, partial_product, random_thetas)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD, EXIT_IO = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


def _version():
    try:
        return _md.version("artifact")
    except _md.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_POS_INT = {"type": "integer", "minimum": 1}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_RIESZ = {
    "type": "object",
    "oneOf": [
        {"required": ["family", "J"]},
        {"required": ["n", "a"]},
    ],
}
_MEASURE = {"type": "object", "required": ["type"]}
_KAPPA = {"type": "object", "required": ["type"]}
_WINDOW = {
    "type": "object",
    "required": ["s_range", "y_range"],
    "properties": {"s_range": _PAIR, "y_range": _PAIR, "L": {"type": "number",
                                                                "exclusiveMinimum": 0}},
}
_BOX = {"type": "object", "required": ["s", "y", "z"],
        "properties": {"s": _PAIR, "y": _PAIR, "z": _PAIR}}
_THETA = {"anyOf": [_NUM, {"type": "string"}]}
_SCALE = {"anyOf": [_NUM, {"type": "object", "required": ["log_abs"]}]}


def _obj(required, **props):
    return {"type": "object", "required": list(required), "properties": props,
            "additionalProperties": False}


SCHEMAS = {
    "riesz-coeff": _obj(["m"], spec=_RIESZ, family={"type": "string"}, J=_POS_INT,
                        n={"type": "array"}, a={"type": "array"},
                        m={"type": "array", "items": _INT}),
    "riesz-hgroup": _obj([], spec=_RIESZ, family={"type": "string"}, J=_POS_INT,
                         n={"type": "array"}, a={"type": "array"},
                         J_eval=_POS_INT,
                         theta={"type": "array", "items": _THETA},
                         random={"type": "object", "required": ["count"],
                                 "properties": {"count": _POS_INT, "seed": _INT}}),
    "riesz-criteria": _obj([], spec=_RIESZ, family={"type": "string"}, J=_POS_INT,
                           n={"type": "array"}, a={"type": "array"}),
    "lift-sigma": _obj(["source", "K", "J"], source=_RIESZ, K=_POS_INT, J=_POS_INT,
                       cells_per_unit=_POS_INT,
                       s_values={"type": "array", "items": _SCALE}),
    "gauss-exp": _obj(["sigma"], sigma=_MEASURE, P_max=_POS_INT,
                      window=_PAIR),
    "gauss-cov": _obj(["sigma", "t"], sigma=_MEASURE,
                      t={"type": "array", "items": _NUM},
                      closed_form={"enum": ["cos", "sinc", "none"]},
                      tol={"type": "number", "exclusiveMinimum": 0}),
    "gauss-sim": _obj(["sigma"], sigma=_MEASURE, M=_POS_INT, n_paths=_POS_INT,
                      lags={"type": "array", "items": _NUM}),
    "gauss-mix": _obj(["sigma", "T"], sigma=_MEASURE, T={"type": "number",
                                                          "exclusiveMinimum": 0},
                      limit=_NUM, tol={"type": "number", "exclusiveMinimum": 0}),
    "gauss-selfsim": _obj(["sigma", "s"], sigma=_MEASURE,
                          s={"type": "array", "items": _NUM}, P_max=_POS_INT),
    "poisson-sample": _obj(["kappa", "window"], kappa=_KAPPA, window=_WINDOW,
                           count=_POS_INT),
    "poisson-verify": _obj([], mu={"type": "number", "minimum": 0}, j_max=_INT, N=_POS_INT,
                           kappa=_KAPPA, window=_WINDOW, K=_BOX, K2=_BOX,
                           t_values={"type": "array", "items": _NUM}),
    "poisson-conjugacy": _obj([], kappa=_KAPPA, window=_WINDOW, n=_POS_INT,
                              h_range=_PAIR, t_range=_PAIR,
                              h_values={"type": "array", "items": {"type": "number",
                                                                   "exclusiveMinimum": 0}},
                              N=_POS_INT),
    "kappa-group": _obj(["kappa", "h"], kappa=_KAPPA,
                        h={"type": "array", "items": {"type": "number",
                                                      "exclusiveMinimum": 0}},
                        threshold=_NUM,
                        expected={"type": "array",
                                  "items": {"enum": ["member-evidence", "not-member"]}}),
    "spectral-tau": _obj(["sigma_V", "kappa", "s_grid"], sigma_V=_MEASURE, kappa=_KAPPA,
                         s_grid={"type": "array", "items": {"type": "number",
                                                            "exclusiveMinimum": 0}},
                         window=_PAIR, grid_count=_POS_INT,
                         orthogonality_s={"type": "array", "items": _NUM}),
}
COMMANDS = tuple(SCHEMAS)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {"type": "object"},
        "seed": _INT,
        "output_path": {"type": "string"},
    },
    "additionalProperties": False,
}


def validate(config):
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
        jsonschema.validate(config.get("params", {}), SCHEMAS[config["command"]])
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message) from None


# ---------------------------------------------------------------------------
# parameter helpers
# ---------------------------------------------------------------------------

def _riesz(p):
    obj = p.get("spec", {k: p[k] for k in ("family", "J", "n", "a") if k in p})
    if not obj:
        raise ConfigError("a Riesz spec is required")
    try:
        return RieszSpec.from_json(obj)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad Riesz spec: {exc}") from None


def build_measure(obj):
    """Spectral measure from its JSON description."""
    kind = obj["type"]
    try:
        if kind == "atoms":
            return AtomicMeasure.from_pairs(obj["atoms"])
        if kind == "uniform":
            return GridDensity.uniform(obj["a"], obj["b"], LINE, tuple(obj["window"]),
                                       int(obj["grid_count"]), float(obj.get("total", 1.0)),
                                       trapezoid=bool(obj.get("trapezoid", True)))
        if kind == "gaussian":
            sd = float(obj["sd"])
            g = GridDensity.from_function(
                LINE, tuple(obj["window"]), int(obj["grid_count"]),
                lambda x: np.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2 * math.pi)))
            return g.normalized()
        if kind == "grid":
            return GridDensity.from_json(obj)
        if kind == "lift":
            spec = LiftSpec(RieszSpec.from_json(obj["source"]), int(obj["K"]), int(obj["J"]),
                            int(obj.get("cells_per_unit", 1024)))
            sigma = build_sigma(standard_lift(spec))
            return sigma.to_line(tuple(obj["window"]), int(obj["grid_count"]))
    except NumericalGuardError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad measure {kind!r}: {exc}") from None
    raise ConfigError(f"unknown measure type {kind!r}")


def _kappa(obj):
    try:
        return kappa_from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad kappa: {exc}") from None


def _window(obj):
    try:
        return Window.from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad window: {exc}") from None


def _theta_label(th):
    return f"{th.numerator}/{th.denominator}" if th.denominator < 10 ** 6 else f"{float(th):.17g}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_riesz_coeff(p, seed, workers):
    """fourier_coefficient against the coefficient of the partial product."""
    spec = _riesz(p)
    oracle = partial_product(spec, spec.J_max) if spec.J_max <= 10 else None
    rows = []
    for m in p["m"]:
        c = fourier_coefficient(spec, m)
        for part in ("re", "im"):
            emp = c.real if part == "re" else c.imag
            if oracle is None:
                rows.append(row(f"fourier_coefficient_{part}", f"m={m}", None, emp,
                                note="no partial-product oracle for J_max > 10"))
            else:
                ref = oracle[m]
                th = ref.real if part == "re" else ref.imag
                rows.append(row(f"fourier_coefficient_{part}", f"m={m}", th, emp,
                                th - 1e-15, th + 1e-15))
    return rows


def cmd_riesz_hgroup(p, seed, workers):
    """S_J(theta) per theta; the float oracle re-sums the terms with complex exp."""
    spec = _riesz(p)
    J = p.get("J_eval", spec.J_max)
    thetas = [as_fraction(t) for t in p.get("theta", [])]
    if "random" in p:
        thetas += random_thetas(p["random"].get("seed", seed), p["random"]["count"])
    rows = []
    for th in thetas:
        terms = h_membership_terms(spec, th, J)
        s = math.fsum(terms)
        ref = 0.0
        for j in range(J):
            r = (th * spec.n[j]) % 1
            aj = spec.a[j]
            ref += abs(aj) ** 2 * abs(1 - aj * complex(math.cos(2 * math.pi * r),
                                                       math.sin(2 * math.pi * r))) ** 2
        half = math.fsum(terms[: J // 2])
        q = max(1, J // 4)
        verdict = "member-evidence" if np.all(terms[-q:] < 1e-9) else "divergence-evidence"
        rows.append(row("h_series", f"theta={_theta_label(th)};J={J}", ref, s,
                        ref - 1e-9 * max(1.0, ref), ref + 1e-9 * max(1.0, ref),
                        note=f"{verdict};S_J/2={half!r}"))
    return rows


def cmd_riesz_criteria(p, seed, workers):
    spec = _riesz(p)
    c = criteria(spec)
    rows = []
    if spec.family == "factorial" and all(abs(a) == 1 for a in spec.a):
        lim = math.pi ** 2 / 6 - 1
        rows.append(row("lacunary_sum", f"J={spec.J_max}", lim, c["lacunary_sum"],
                        lim - c["tail_bound"], lim))
        corrected = c["lacunary_sum"] + c["tail_bound"]
        rows.append(row("lacunary_sum_tail_corrected", f"J={spec.J_max}", lim, corrected,
                        lim - 1e-6, lim + 1e-6, note="partial sum plus integral tail 1/J"))
        rows.append(row("weight_sum", f"J={spec.J_max}", spec.J_max, c["weight_sum"],
                        spec.J_max - 1e-9, spec.J_max + 1e-9, note="diverges linearly in J"))
    else:
        rows.append(row("lacunary_sum", f"J={spec.J_max}", None, c["lacunary_sum"]))
        rows.append(row("weight_sum", f"J={spec.J_max}", None, c["weight_sum"]))
    rows.append(row("tail_bound", f"J={spec.J_max}", None, c["tail_bound"]))
    return rows


def cmd_lift_sigma(p, seed, workers):
    try:
        spec = LiftSpec(RieszSpec.from_json(p["source"]), p["K"], p["J"],
                        p.get("cells_per_unit", 1024))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    if not 1 <= spec.J <= spec.source.J_max:
        raise ConfigError(f"J={spec.J} out of range")
    lift = standard_lift(spec)
    cap = spec.captured_mass
    rows = [row("lift_mass", f"K={spec.K}", cap, lift.mass, cap - 1e-9, cap + 1e-9,
                note=f"deficit={spec.deficit!r}")]
    folded = pushforward(lift, "mod1")
    rho = circle_density(spec)
    scale = np.where(rho.values > 0, folded.values / np.where(rho.values > 0, rho.values, 1), cap)
    err = float(np.max(np.abs(scale - cap)) / cap)
    rows.append(row("projection_ratio", f"K={spec.K}", 0.0, err, 0.0, 1e-9,
                    note="max relative deviation of fold/rho from captured mass"))
    sigma = build_sigma(lift)
    rows.append(row("sigma_mass", f"K={spec.K}", lift.mass, sigma.mass,
                    lift.mass - 1e-12, lift.mass + 1e-12))
    for sv in p.get("s_values", []):
        s = parse_scale(sv)
        res = h_sigma_membership(spec.source, s, spec.J)
        label = sv if not isinstance(sv, dict) else f"{sv.get('sign', 1)}*exp({sv['log_abs']})"
        rows.append(row("h_sigma_membership", f"s={label};theta={_theta_label(res['theta'])}",
                        None, res["series"], note=res["verdict"]))
    return rows


def cmd_gauss_exp(p, seed, workers):
    sigma = build_measure(p["sigma"])
    if isinstance(sigma, AtomicMeasure):
        raise ConfigError("gauss-exp needs a grid sigma")
    P = p.get("P_max", 12)
    win = tuple(p["window"]) if "window" in p else None
    ex = exp_prime(sigma, P, window=win)
    m = sigma.mass
    ref = math.fsum(m ** k / math.factorial(k) for k in range(1, P + 1))
    tol = 1e-6 * max(1.0, ref)
    rows = [row("exp_mass", f"P_max={P}", ref, ex.sum.mass, ref - tol, ref + tol,
                note=f"truncation_bound={ex.truncation_bound!r}")]
    v = ex.sum.values
    if math.isclose(ex.sum.window[0], -ex.sum.window[1]):
        asym = float(np.max(np.abs(v - v[ex.sum.mirror_index()])))
        rows.append(row("exp_symmetry", f"P_max={P}", 0.0, asym, 0.0, 0.0))
    return rows


def cmd_gauss_cov(p, seed, workers):
    sigma = build_measure(p["sigma"])
    form = p.get("closed_form", "none")
    tol = p.get("tol", 1e-8)
    rows = []
    for t in p["t"]:
        r = covariance(sigma, t)
        if form == "cos":
            th = math.cos(t)
        elif form == "sinc":
            th = 1.0 if t == 0 else math.sin(t) / t
        else:
            th = None
        if th is None:
            rows.append(row("covariance", f"t={t!r}", None, r))
        else:
            rows.append(row("covariance", f"t={t!r}", th, r, th - tol, th + tol))
    return rows


def cmd_gauss_sim(p, seed, workers):
    sigma = build_measure(p["sigma"])
    M = p.get("M", 256)
    N = p.get("n_paths", 10_000)
    lags = np.asarray(p.get("lags", [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, math.pi]))
    X = sample_paths(sigma, lags, M, seed, N, workers)
    r0 = covariance(sigma, 0.0)
    rows = []
    for i, lag in enumerate(lags):
        rt = covariance(sigma, float(lag))
        emp = float(np.mean(X[:, 0] * X[:, i]))
        band = 4 * math.sqrt((r0 ** 2 + rt ** 2) / N)
        rows.append(row("process_covariance", f"lag={float(lag)!r}", rt, emp,
                        rt - band, rt + band))
    return rows


def cmd_gauss_mix(p, seed, workers):
    sigma = build_measure(p["sigma"])
    T = p["T"]
    val = mixing_diagnostic(sigma, T)
    if "limit" in p:
        lim = p["limit"]
    elif isinstance(sigma, AtomicMeasure):
        lim = atomic_mixing_limit(sigma)
    else:
        lim = 0.0
    tol = p.get("tol", 1e-2)
    return [row("mixing_average", f"T={T!r}", lim, val, max(0.0, lim - tol), lim + tol)]


def cmd_gauss_selfsim(p, seed, workers):
    sigma = build_measure(p["sigma"])
    if not isinstance(sigma, GridDensity):
        raise ConfigError("gauss-selfsim needs a grid sigma")
    P = p.get("P_max", 12)
    ex = exp_prime(sigma, P).sum
    rows = []
    for s in p["s"]:
        res = spectral_selfsim_test(sigma, s, P, exp_sum=ex)
        rows.append(row("affinity_sigma", f"s={s!r}", None, res["affinity_sigma"]))
        rows.append(row("affinity_exp", f"s={s!r}", None, res["affinity_exp"]))
    return rows


def cmd_poisson_sample(p, seed, workers):
    spec = ProductFlowSpec(_kappa(p["kappa"]), _window(p["window"]))
    mu = spec.intensity()
    rows = []
    sizes = []
    inside = True
    for k in range(p.get("count", 1)):
        cfg = sample_poisson(spec, [int(seed), k])
        sizes.append(len(cfg))
        inside &= cfg.inside_window()
    n = len(sizes)
    mean = float(np.mean(sizes))
    band = 4 * math.sqrt(mu / n) if mu > 0 else 0.0
    note = "improper kappa" if spec.improper else ""
    rows.append(row("mean_count", f"configs={n}", mu, mean, mu - band, mu + band, note=note))
    rows.append(row("points_inside_window", f"configs={n}", 1.0, float(inside), 1.0, 1.0))
    return rows


def cmd_poisson_verify(p, seed, workers):
    N = p.get("N", 100_000)
    j_max = p.get("j_max", 8)
    if "kappa" not in p:
        if "mu" not in p:
            raise ConfigError("poisson-verify needs either mu or kappa/window/K/K2")
        return poisson_verify_simple(p["mu"], j_max, N, seed, workers)
    for k in ("window", "K", "K2"):
        if k not in p:
            raise ConfigError(f"poisson-verify: missing {k}")
    spec = ProductFlowSpec(_kappa(p["kappa"]), _window(p["window"]))
    try:
        return cylinder_verify(spec, Box.from_json(p["K"]), Box.from_json(p["K2"]), N, seed,
                               j_max, tuple(p.get("t_values", (0.5, 1.7, 12.25))), workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_poisson_conjugacy(p, seed, workers):
    kappa = _kappa(p.get("kappa", {"type": "lognormal", "mu": 0.0, "sd": 1.0}))
    win = _window(p.get("window", {"s_range": [1e-3, 1e3], "y_range": [0.0, 1.0], "L": 1.0}))
    spec = ProductFlowSpec(kappa, win)
    n = p.get("n", 1000)
    try:
        err = conjugacy_errors(spec, n, seed, tuple(p.get("h_range", (0.25, 4.0))),
                               tuple(p.get("t_range", (-10.0, 10.0))))
    except QuasiInvarianceError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for i, c in enumerate("syz"):
        rows.append(row("conjugacy", f"coord={c};n={n}", 0.0, err["conjugacy"][i], 0.0, 1e-12))
    for i, c in enumerate("syz"):
        rows.append(row("q_inverse", f"coord={c};n={n}", 0.0, err["inverse"][i], 0.0, 1e-10))
    for h in p.get("h_values", []):
        pv = q_preservation_pvalue(kappa, h, p.get("N", 100_000), [int(seed), 1])
        rows.append(row("q_measure_preservation", f"h={h!r}", 1.0, pv, 1e-3, 1.0,
                        note="chi-square p-value on common sub-window"))
    return rows


def cmd_kappa_group(p, seed, workers):
    kappa = _kappa(p["kappa"])
    exp = p.get("expected")
    if exp is not None and len(exp) != len(p["h"]):
        raise ConfigError("expected must match h in length")
    rows = []
    for i, h in enumerate(p["h"]):
        res = kappa_group_test(kappa, h, p.get("threshold", 1e-3))
        note = f"{res['verdict']};support_match={res['support_match']}"
        th = None
        band = (None, None)
        if isinstance(kappa, LogNormalKappa):
            th = math.exp(-math.log(h) ** 2 / (8 * kappa.sd ** 2))
            band = (th - 1e-4, th + 1e-4)
        ok = None
        if exp is not None:
            ok = res["verdict"] == exp[i]
            if band[0] is not None:
                ok = ok and band[0] <= res["affinity"] <= band[1]
        rows.append(row("kappa_affinity", f"h={h!r}", th, res["affinity"], *band, passed=ok,
                        note=note))
    return rows


def cmd_spectral_tau(p, seed, workers):
    sigma_V = build_measure(p["sigma_V"])
    kappa = _kappa(p["kappa"])
    win = tuple(p["window"]) if "window" in p else None
    try:
        tau = tau_spectral(sigma_V, kappa, p["s_grid"], win, p.get("grid_count"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    wts = kappa.quadrature_weights(np.asarray(p["s_grid"], dtype=float))
    ref = sigma_V.mass * float(np.sum(wts))
    rows = [row("tau_mass", f"nodes={len(p['s_grid'])}", ref, tau.mass, ref - 1e-6, ref + 1e-6)]
    for s, aff in orthogonality_report(sigma_V, p.get("orthogonality_s", [])):
        rows.append(row("orthogonality_affinity", f"s={s!r}", None, aff))
    return rows


DISPATCH = {
    "riesz-coeff": cmd_riesz_coeff,
    "riesz-hgroup": cmd_riesz_hgroup,
    "riesz-criteria": cmd_riesz_criteria,
    "lift-sigma": cmd_lift_sigma,
    "gauss-exp": cmd_gauss_exp,
    "gauss-cov": cmd_gauss_cov,
    "gauss-sim": cmd_gauss_sim,
    "gauss-mix": cmd_gauss_mix,
    "gauss-selfsim": cmd_gauss_selfsim,
    "poisson-sample": cmd_poisson_sample,
    "poisson-verify": cmd_poisson_verify,
    "poisson-conjugacy": cmd_poisson_conjugacy,
    "kappa-group": cmd_kappa_group,
    "spectral-tau": cmd_spectral_tau,
}


# ---------------------------------------------------------------------------
# run / emit / main
# ---------------------------------------------------------------------------

def config_hash(config):
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run(config, workers=1):
    """Validate and execute ``config``; returns a :class:`Report`.

    Raises :class:`ConfigError` on a bad config and lets
    :class:`NumericalGuardError` propagate.
    """
    validate(config)
    seed = int(config.get("seed", 0))
    t0 = time.perf_counter()
    rows = DISPATCH[config["command"]](config.get("params", {}), seed, max(1, int(workers)))
    meta = {
        "command": config["command"],
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "version": _version(),
        "backend": _kernels.BACKEND,
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    return Report(rows, meta)


def emit(report, fmt, out=None):
    """Write the report; CSV goes with a ``.meta.json`` sidecar when written to a file."""
    text = report.csv_body() if fmt == "csv" else report.to_json() + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    if fmt == "csv":
        with open(out + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(report.metadata, fh, indent=2, sort_keys=True)


def build_parser():
    ap = argparse.ArgumentParser(prog="selfsim", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment config JSON")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--workers", type=int, default=1, help="worker threads (results unchanged)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--out", default=None, help="output path (default: config output_path or stdout)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        config["seed"] = args.seed
    try:
        report = run(config, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard tripped: {exc}", file=sys.stderr)
        return EXIT_GUARD
    out = args.out or config.get("output_path")
    try:
        emit(report, args.format, out)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
