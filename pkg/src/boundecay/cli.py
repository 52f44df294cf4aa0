"""Command line front end: campaign configs, presets and report files.

A campaign is a TOML file with the sections ``campaign``, ``domain`` (or an
array ``[[domain]]``), ``operator``, ``sweep``, ``tolerances`` and
``output``.  Unknown keys are rejected.  See ``README.md`` for the schema.

Exit status: 0 when every non-vacuous check passes, 1 when an inequality is
violated, 2 for configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import _core, estimates, kernels, perturbation
from .estimates import EstimateError, make_report
from .geometry import (
    DEFAULT_NODE_CAP,
    DomainError,
    DomainSpec,
    build_domain,
    epsilon_schedule,
)
from .operator import (
    CoefficientField,
    OperatorError,
    PotentialField,
    assemble_1d_weighted,
    assemble_divergence_form,
    assemble_weighted_laplacian,
)
from .spectral import (
    SpectralError,
    cache_key,
    eigensolve,
    estimate_hardy_constant,
    load_eigensystem,
    save_eigensystem,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

CHECKS = (
    "cor5",
    "cor7",
    "example5",
    "halfline",
    "hardy_constant",
    "hi",
    "ker1",
    "ker2",
    "lemma3",
    "lemma9_10",
    "thm11",
    "thm16",
    "thm4",
    "thm6",
    "weyl",
)
NEEDS_DOMAIN = set(CHECKS) - {"halfline"}
NEEDS_FULL = {"cor5", "hi", "ker1", "lemma3", "lemma9_10", "thm4", "thm6"}
NEEDS_EIG = NEEDS_FULL | {"cor7", "ker2", "thm16", "weyl"}

CSV_COLUMNS = (
    "check",
    "name",
    "domain",
    "operator",
    "c",
    "a",
    "f",
    "n",
    "eps",
    "t",
    "lambda",
    "lhs",
    "rhs",
    "ratio",
    "pass",
    "vacuous",
    "tol",
)

NUMERIC_ERRORS = (
    SpectralError,
    EstimateError,
    DomainError,
    OperatorError,
    np.linalg.LinAlgError,
    spla.ArpackError,
    spla.ArpackNoConvergence,
    FloatingPointError,
)


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------

SECTIONS = {
    "campaign": {
        "name": (str, None),
        "description": (str, ""),
        "theorem": (str, ""),
        "seed": (int, 0),
        "node_cap": (int, DEFAULT_NODE_CAP),
        "checks": (list, None),
    },
    "domain": {
        "generator": (str, None),
        "params": (list, []),
        "resolution": (float, None),
        "mask_file": (str, None),
    },
    "operator": {
        "kind": (str, "laplacian"),
        "potential": (float, 0.0),
        "alpha_w": (float, 0.5),
        "coefficients": (str, "identity"),
        "alpha": (float, 1.0),
        "cells": (int, 4),
        "ax": (float, 1.0),
        "ay": (float, 1.0),
        "hardy_c": (float, None),
        "hardy_a": (float, 0.0),
    },
    "sweep": {
        "eps": (list, None),
        "eps_start": (float, None),
        "eps_ratio": (float, 0.5),
        "eps_floor": (float, 1.5),
        "eps_min": (float, 0.0),
        "eps_max": (float, math.inf),
        "t": (list, [0.05, 0.1, 0.5, 1.0]),
        "lambda": (list, []),
        "n_max": (int, 10),
        "vectors": (int, 5),
        "modes": ((str, int), "all"),
        "solver": (str, "auto"),
        "shrink_multiples": (list, [1, 2, 4, 8]),
        "shrink_n": (int, 3),
        "gamma": (list, [0.5, 1.0, 2.0]),
        "delta": (float, None),
        "y_nodes": (int, 3),
        "eps_window": (list, None),
        "t_window": (list, None),
    },
    "tolerances": {
        "c_tol": (float, estimates.C_TOL),
        "exponent_margin": (float, 0.1),
        "halfline_rtol": (float, 0.02),
        "example5_rtol": (float, 0.01),
        "example5_exponent_tol": (float, 0.05),
    },
    "output": {
        "formats": (list, ["csv", "json", "txt"]),
        "directory": (str, "boundecay-out"),
    },
}

OPERATOR_KINDS = ("laplacian", "weighted_1d", "divergence")
COEFFICIENTS = ("identity", "scalar", "diag", "checkerboard")
FORMATS = ("csv", "json", "txt")


def _coerce(section, key, value, kind):
    where = f"[{section}] {key}"
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if isinstance(kind, tuple):
        if isinstance(value, bool) or not isinstance(value, kind):
            raise ConfigError(f"{where} has the wrong type: {value!r}")
        return value
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(f"{where} must be a {kind.__name__}, got {value!r}")
    return value


def _section(raw, name):
    schema = SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            out[key] = _coerce(name, key, raw[key], kind)
        else:
            out[key] = default
    return out


@dataclass
class Campaign:
    name: str
    description: str
    theorem: str
    seed: int
    node_cap: int
    checks: list
    domains: list
    operator: dict
    sweep: dict
    tolerances: dict
    output: dict

    def normalised(self):
        """Plain-data view written into the JSON summary."""
        return {
            "campaign": {
                "name": self.name,
                "description": self.description,
                "theorem": self.theorem,
                "seed": self.seed,
                "node_cap": self.node_cap,
                "checks": list(self.checks),
            },
            "domains": [
                {
                    "generator": d.generator,
                    "params": list(d.params),
                    "resolution": d.resolution,
                    "mask_file": d.mask_file,
                }
                for d in self.domains
            ],
            "operator": self.operator,
            "sweep": self.sweep,
            "tolerances": self.tolerances,
        }


def parse_config(raw, base_dir=None, node_cap=None, seed=None):
    """Validate a decoded TOML document and return a :class:`Campaign`."""
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    camp = _section(raw.get("campaign", {}), "campaign")
    if camp["name"] is None:
        raise ConfigError("[campaign] name is required")
    checks = camp["checks"]
    if not checks:
        raise ConfigError("no checks requested: [campaign] checks is empty")
    bad = sorted(set(map(str, checks)) - set(CHECKS))
    if bad:
        raise ConfigError(f"unknown check(s): {', '.join(bad)}; choose from {', '.join(CHECKS)}")
    checks = sorted(set(checks))
    if node_cap is not None:
        camp["node_cap"] = int(node_cap)
    if seed is not None:
        camp["seed"] = int(seed)

    op = _section(raw.get("operator", {}), "operator")
    sweep = _section(raw.get("sweep", {}), "sweep")
    tol = _section(raw.get("tolerances", {}), "tolerances")
    out = _section(raw.get("output", {}), "output")

    raw_domains = raw.get("domain", [])
    if isinstance(raw_domains, dict):
        raw_domains = [raw_domains]
    domains = []
    for entry in raw_domains:
        d = _section(entry, "domain")
        mask = d["mask_file"]
        if mask is not None and base_dir is not None and not os.path.isabs(mask):
            mask = str(Path(base_dir) / mask)
        if mask is not None and not Path(mask).is_file():
            raise ConfigError(f"mask file {mask} does not exist")
        if d["resolution"] is None:
            raise ConfigError("[domain] resolution is required")
        gen = d["generator"] if d["generator"] is not None else ("mask" if mask else None)
        if gen is None:
            raise ConfigError("[domain] generator is required")
        spec = DomainSpec(
            gen,
            tuple(float(p) for p in d["params"]),
            d["resolution"],
            mask,
            node_cap=camp["node_cap"],
        )
        try:
            spec.validate()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        domains.append(spec)

    if NEEDS_DOMAIN & set(checks) and not domains:
        raise ConfigError(f"checks {sorted(NEEDS_DOMAIN & set(checks))} need a [domain] section")
    if op["kind"] not in OPERATOR_KINDS:
        raise ConfigError(f"unknown operator kind {op['kind']!r}")
    if op["coefficients"] not in COEFFICIENTS:
        raise ConfigError(f"unknown coefficients {op['coefficients']!r}")
    if op["kind"] == "weighted_1d":
        for d in domains:
            if d.generator != "halfline_truncated":
                raise ConfigError("operator kind weighted_1d needs the halfline_truncated generator")
    if "example5" in checks and op["kind"] != "weighted_1d":
        raise ConfigError("check example5 needs operator kind weighted_1d")
    modes = sweep["modes"]
    if isinstance(modes, str) and modes != "all":
        raise ConfigError(f"[sweep] modes must be 'all' or an integer, got {modes!r}")
    if sweep["solver"] not in ("auto", "dense", "sparse"):
        raise ConfigError(f"unknown solver {sweep['solver']!r}")
    if modes != "all":
        partial = sorted(NEEDS_FULL & set(checks))
        if partial:
            raise ConfigError(f"checks {partial} need modes = 'all'")
    for key in ("eps", "t", "lambda", "gamma", "shrink_multiples"):
        vals = sweep[key]
        if vals is None:
            continue
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 for v in vals):
            raise ConfigError(f"[sweep] {key} must hold positive numbers")
        sweep[key] = [float(v) for v in vals]
    for key in ("eps_window", "t_window"):
        if sweep[key] is not None:
            if len(sweep[key]) != 2:
                raise ConfigError(f"[sweep] {key} must be [lo, hi]")
            sweep[key] = [float(v) for v in sweep[key]]
    if not 0 < sweep["eps_ratio"] < 1:
        raise ConfigError("[sweep] eps_ratio must lie in (0, 1)")
    bad_fmt = sorted(set(out["formats"]) - set(FORMATS))
    if bad_fmt:
        raise ConfigError(f"unknown output format(s): {', '.join(bad_fmt)}")
    if sweep["eps_max"] == math.inf:
        sweep["eps_max"] = None
    return Campaign(
        name=camp["name"],
        description=camp["description"],
        theorem=camp["theorem"],
        seed=camp["seed"],
        node_cap=camp["node_cap"],
        checks=checks,
        domains=domains,
        operator=op,
        sweep=sweep,
        tolerances=tol,
        output=out,
    )


def load_config(path, node_cap=None, seed=None):
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, base_dir=path.parent, node_cap=node_cap, seed=seed)


# --- presets ------------------------------------------------------------------


def _preset_files():
    root = resources.files("boundecay") / "presets"
    return {p.name[: -len(".toml")]: p for p in root.iterdir() if p.name.endswith(".toml")}


def preset_names():
    return sorted(_preset_files())


def load_preset(name, node_cap=None, seed=None):
    files = _preset_files()
    if name not in files:
        raise ConfigError(f"unknown preset {name!r}; try list-presets")
    raw = tomllib.loads(files[name].read_text())
    return parse_config(raw, node_cap=node_cap, seed=seed)


def list_presets():
    """One line per preset: name, the result it exercises and a description."""
    lines = []
    for name in preset_names():
        camp = load_preset(name)
        lines.append(f"{name:<22} {camp.theorem:<48} {camp.description}")
    return "\n".join(lines)


# --- running --------------------------------------------------------------------


def default_cache_dir():
    env = os.environ.get("BOUNDECAY_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "boundecay"


class DomainContext:
    """Lazily built objects shared by the checks on one domain."""

    def __init__(self, campaign, spec, index, cache_dir=None):
        self.campaign = campaign
        self.spec = spec
        self.index = index
        self.cache_dir = cache_dir
        self._op = None
        self._eig = None
        self._functions = None

    @property
    def op(self):
        if self._op is None:
            self._op = build_operator(self.campaign, self.spec)
        return self._op

    @property
    def domain(self):
        return self.op.domain

    @property
    def dist(self):
        return estimates.dist_of(None, self.op)

    @property
    def dt(self):
        return self.dist.scaled(self.op.distance_scale)

    @property
    def h(self):
        return self.domain.h

    def _modes(self):
        modes = self.campaign.sweep["modes"]
        return "all" if modes == "all" or int(modes) >= self.op.n else int(modes)

    def _backend(self):
        solver = self.campaign.sweep["solver"]
        if solver == "auto":
            return "dense" if self._modes() == "all" or self.op.n <= 2500 else "sparse"
        return solver

    def cache_path(self):
        if self.cache_dir is None:
            return None
        key = f"{cache_key(self.op)}-m{self._modes()}-{self._backend()}"
        return Path(self.cache_dir) / (hashlib.sha256(key.encode()).hexdigest()[:24] + ".bdeig")

    @property
    def eig(self):
        if self._eig is None:
            path = self.cache_path()
            if path is not None and path.is_file():
                self._eig = load_eigensystem(path, self.op)
            else:
                self._eig = eigensolve(self.op, self._modes(), backend=self._backend())
        return self._eig

    def build_cache(self):
        path = self.cache_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        eig = eigensolve(self.op, self._modes(), backend=self._backend())
        tmp = path.with_suffix(".tmp")
        save_eigensystem(eig, tmp)
        os.replace(tmp, path)
        return path

    @property
    def eps(self):
        sw = self.campaign.sweep
        if sw["eps"] is not None:
            vals = sorted(sw["eps"], reverse=True)
        else:
            start = sw["eps_start"] if sw["eps_start"] is not None else self.dt.max / 2
            vals = epsilon_schedule(self.dt, self.h, ratio=sw["eps_ratio"], floor=sw["eps_floor"], start=start)
        hi = sw["eps_max"] if sw["eps_max"] is not None else math.inf
        vals = [e for e in vals if sw["eps_min"] <= e <= hi]
        if not vals:
            raise EstimateError(f"empty eps schedule on {self.domain.name}")
        return vals

    @property
    def functions(self):
        """Test functions: eigenfunctions ``n <= n_max`` and seeded operator-domain vectors."""
        if self._functions is None:
            sw = self.campaign.sweep
            eig = self.eig
            out = [(f"phi{n}", n, eig.vectors[:, n - 1]) for n in range(1, min(sw["n_max"], eig.m) + 1)]
            if sw["vectors"] > 0:
                seed = self.campaign.seed + 1009 * self.index
                vecs = estimates.operator_domain_vectors(self.op, sw["vectors"], seed)
                out += [(f"rand{k}", None, v) for k, v in enumerate(vecs)]
            self._functions = out
        return self._functions


def build_operator(campaign, spec):
    o = campaign.operator
    if o["kind"] == "weighted_1d":
        op = assemble_1d_weighted(o["alpha_w"], L=spec.params[0], h=spec.resolution, node_cap=spec.node_cap)
        if o["hardy_c"] is not None:
            op = replace(op, hardy_c=o["hardy_c"])
        return op
    domain = build_domain(spec)
    if o["kind"] == "laplacian":
        v = PotentialField.constant(o["potential"]) if o["potential"] else None
        return assemble_weighted_laplacian(domain, v=v, hardy_c=o["hardy_c"], hardy_a=o["hardy_a"])
    coeff = {
        "identity": lambda: CoefficientField.identity(),
        "scalar": lambda: CoefficientField.scalar(o["alpha"] ** 2),
        "diag": lambda: CoefficientField.diag(o["ax"], o["ay"]),
        "checkerboard": lambda: CoefficientField.checkerboard(o["alpha"], o["cells"]),
    }[o["coefficients"]]()
    return assemble_divergence_form(domain, coeff, hardy_c=o["hardy_c"], hardy_a=o["hardy_a"])


@dataclass
class CheckOutput:
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)


def _row(check, rep, ctx, f=None, n=None, **extra):
    p = dict(rep.params)
    p.update(extra)
    row = {
        "check": check,
        "name": rep.name,
        "domain": ctx.domain.name if ctx is not None else "halfline",
        "operator": ctx.op.label() if ctx is not None else "heat",
        "c": p.get("c", ctx.op.hardy_c if ctx is not None else None),
        "a": p.get("a", ctx.op.hardy_a if ctx is not None else None),
        "f": f,
        "n": n if n is not None else p.get("n"),
        "eps": p.get("eps", getattr(rep, "eps", None)),
        "t": p.get("t", getattr(rep, "t", None)),
        "lambda": p.get("lam"),
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "ratio": rep.ratio,
        "pass": bool(rep.passed),
        "vacuous": bool(rep.vacuous),
        "tol": rep.tol,
    }
    return row


def _tol(ctx, eps):
    return estimates.default_tol(ctx.op, eps, ctx.campaign.tolerances["c_tol"])


def check_hi(ctx):
    out = CheckOutput()
    for label, n, f in ctx.functions:
        out.rows.append(_row("hi", estimates.verify_hi(ctx.op, ctx.dist, f), ctx, label, n))
    return out


def check_thm4(ctx):
    out = CheckOutput()
    for label, n, f in ctx.functions:
        for eps in ctx.eps:
            d2, mass = estimates.verify_thm4(ctx.op, ctx.eig, f, eps, dist=ctx.dist, tol=_tol(ctx, eps))
            out.rows.append(_row("thm4", d2, ctx, label, n, c0=estimates.c0(ctx.op.hardy_c)))
            out.rows.append(_row("thm4", mass, ctx, label, n))
    out.fits["c0"] = estimates.c0(ctx.op.hardy_c)
    return out


def check_thm6(ctx):
    out = CheckOutput()
    for label, n, f in ctx.functions:
        for eps in ctx.eps:
            rep = estimates.verify_thm6(ctx.op, ctx.eig, f, eps, dist=ctx.dist, tol=_tol(ctx, eps))
            out.rows.append(_row("thm6", rep, ctx, label, n))
    out.fits["c1"] = estimates.c1(ctx.op.hardy_c)
    return out


def check_lemma3(ctx):
    out = CheckOutput()
    for label, n, f in ctx.functions:
        for eps in ctx.eps:
            rep = estimates.verify_lemma3(ctx.op, ctx.eig, f, eps, dist=ctx.dist)
            out.rows.append(_row("lemma3", rep, ctx, label, n))
    return out


def check_cor5(ctx):
    out = CheckOutput()
    delta = ctx.campaign.sweep["delta"]
    delta = ctx.dt.max / 2 if delta is None else delta
    q = 2.0 + 2.0 / ctx.op.hardy_c
    for label, n, f in ctx.functions:
        for gamma in ctx.campaign.sweep["gamma"]:
            if gamma >= q:
                continue
            rep = estimates.verify_cor5(ctx.op, ctx.eig, f, gamma, delta, dist=ctx.dist)
            out.rows.append(_row("cor5", rep, ctx, label, n))
    return out


def check_cor7(ctx):
    out = CheckOutput()
    eig = ctx.eig
    for n in range(1, min(ctx.campaign.sweep["n_max"], eig.m) + 1):
        for eps in ctx.eps:
            reps = estimates.verify_eigenfunction(eig, ctx.dist, n, eps, tol=_tol(ctx, eps))
            for rep in reps:
                out.rows.append(_row("cor7", rep, ctx, f"phi{n}", n))
    return out


def check_lemma9_10(ctx):
    out = CheckOutput()
    for label, n, f in ctx.functions:
        for eps in ctx.eps:
            try:
                reps = perturbation.verify_lemma9_10(ctx.op, ctx.eig, f, eps, ctx.dist)
            except estimates.OutOfRangeError:
                continue
            for rep in reps:
                out.rows.append(_row("lemma9_10", rep, ctx, label, n))
    out.fits["constants"] = {
        k: v for k, v in perturbation.lemma_constants(ctx.op.hardy_c).items()
    }
    return out


def check_thm11(ctx):
    out = CheckOutput()
    sw = ctx.campaign.sweep
    eps = perturbation.lattice_eps(ctx.h, sw["shrink_multiples"])
    table = perturbation.shrink_and_solve(ctx.op, ctx.dist, eps, sw["shrink_n"])
    margin = ctx.campaign.tolerances["exponent_margin"]
    for n, fit, rep in perturbation.verify_thm11(table, ctx.op.hardy_c, margin=margin):
        out.rows.append(_row("thm11", rep, ctx, f"lambda{n}", n))
        out.fits[f"n{n}"] = dict(fit.as_dict(), c_hat=rep.params["c_hat"], rate=rep.params["rate"])
    out.tables["shrink"] = list(table.rows())
    return out


def check_hardy_constant(ctx):
    out = CheckOutput()
    c_num, detail = estimate_hardy_constant(ctx.op, ctx.dist)
    rep = make_report("hardy_constant", c_num, ctx.op.hardy_c, c=ctx.op.hardy_c, a=ctx.op.hardy_a)
    out.rows.append(_row("hardy_constant", rep, ctx))
    out.fits["c_num"] = c_num
    out.fits["detail"] = detail
    return out


def check_ker1(ctx):
    out = CheckOutput()
    eig = ctx.eig
    rng = np.random.default_rng(ctx.campaign.seed + 7 * ctx.index)
    k = min(ctx.campaign.sweep["y_nodes"], ctx.op.n)
    nodes = np.sort(rng.choice(ctx.op.n, size=k, replace=False))
    for t in ctx.campaign.sweep["t"]:
        for eps in ctx.eps:
            for rep in kernels.verify_ker1(eig, ctx.dist, eps, t, nodes):
                out.rows.append(_row("ker1", rep, ctx, f"y{rep.params['y']}"))
        if t >= kernels.RESOLVED_T_FACTOR * ctx.h**2:
            out.rows.append(_row("ker1", kernels.verify_ultracontractive(eig, t), ctx))
    return out


def check_ker2(ctx):
    out = CheckOutput()
    sw = ctx.campaign.sweep
    margin = ctx.campaign.tolerances["exponent_margin"]
    res = kernels.verify_ker2(ctx.eig, ctx.dist, ctx.eps, sw["t"], eps_window=sw["eps_window"], t_window=sw["t_window"])
    for rep in res.reports:
        out.rows.append(_row("ker2", rep, ctx))
    target = 2.0 + 2.0 / ctx.op.hardy_c
    for t, fit in sorted(res.eps_fits.items()):
        if fit is None:
            continue
        rep = make_report("ker2_eps_exponent", target - margin, fit.exponent, t=t, c=ctx.op.hardy_c)
        out.rows.append(_row("ker2", rep, ctx))
    out.fits["eps_exponent"] = {repr(t): None if f is None else f.as_dict() for t, f in sorted(res.eps_fits.items())}
    out.fits["t_exponent"] = {repr(e): None if f is None else f.as_dict() for e, f in sorted(res.t_fits.items())}
    out.fits["c4_hat"] = res.c4_hat
    out.tables["heat"] = [
        {"domain": ctx.domain.name, "t": r.t, "eps": r.eps, "J": r.J, "bound": r.bound} for r in res.reports
    ]
    return out


def check_thm16(ctx):
    out = CheckOutput()
    lams = ctx.campaign.sweep["lambda"]
    if not lams:
        raise EstimateError("check thm16 needs [sweep] lambda")
    for lam in lams:
        for eps in ctx.eps:
            out.rows.append(_row("thm16", kernels.verify_thm16(ctx.eig, ctx.dist, eps, lam), ctx))
            out.rows.append(_row("thm16", kernels.verify_thm16_projection(ctx.eig, ctx.dist, eps, lam), ctx))
    return out


def check_weyl(ctx):
    out = CheckOutput()
    a1, a2 = kernels.weyl_bracket(ctx.eig)
    lam1 = float(ctx.eig.eigenvalues[0])
    out.rows.append(_row("weyl", make_report("weyl_lower", a1, lam1), ctx, n=1))
    out.rows.append(_row("weyl", make_report("weyl_upper", lam1, a2), ctx, n=1))
    out.fits.update(a1=a1, a2=a2, spread=a2 / a1)
    return out


def check_example5(ctx):
    out = CheckOutput()
    tol = ctx.campaign.tolerances
    reps, fit, d2 = estimates.verify_example5(ctx.op, ctx.eps, rtol=tol["example5_rtol"], dist=ctx.dist)
    for rep in reps:
        out.rows.append(_row("example5", rep, ctx))
    target = 2.0 + 2.0 / ctx.op.hardy_c
    rep = make_report("example5_exponent", abs(fit.exponent - target), tol["example5_exponent_tol"], target=target)
    out.rows.append(_row("example5", rep, ctx))
    out.fits["exponent"] = fit.as_dict()
    out.fits["target"] = target
    out.tables["example5_d2"] = [
        {"eps": e, "strip_d2": v, "continuum": e ** (2.0 / ctx.op.hardy_c) * ctx.op.hardy_c / 2} for e, v in d2
    ]
    return out


def check_halfline(campaign):
    out = CheckOutput()
    sw = campaign.sweep
    rtol = campaign.tolerances["halfline_rtol"]
    eps_list = sw["eps"] if sw["eps"] is not None else [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    for t in sorted(sw["t"]):
        for eps in sorted(eps_list):
            if eps * eps > t / 100:
                continue
            exact, asym = kernels.halfline_reference(eps, t)
            rep = make_report("halfline", exact, asym, eps=eps, t=t)
            rep.passed = bool(abs(rep.ratio - 1.0) <= rtol)
            rep.tol = rtol
            out.rows.append(_row("halfline", rep, None))
    if not out.rows:
        raise EstimateError("no (eps, t) pair satisfies eps^2 <= t/100")
    return out


CHECK_FUNCS = {
    "cor5": check_cor5,
    "cor7": check_cor7,
    "example5": check_example5,
    "hardy_constant": check_hardy_constant,
    "hi": check_hi,
    "ker1": check_ker1,
    "ker2": check_ker2,
    "lemma3": check_lemma3,
    "lemma9_10": check_lemma9_10,
    "thm11": check_thm11,
    "thm16": check_thm16,
    "thm4": check_thm4,
    "thm6": check_thm6,
    "weyl": check_weyl,
}


@dataclass
class CampaignResult:
    campaign: Campaign
    rows: list
    fits: dict
    tables: dict

    @property
    def failures(self):
        return [r for r in self.rows if not r["pass"] and not r["vacuous"]]

    @property
    def status(self):
        return EXIT_VIOLATION if self.failures else EXIT_OK


def run_campaign(campaign, jobs=1, cache_dir=None):
    """Run every requested check; results are ordered by check then domain."""
    contexts = [DomainContext(campaign, spec, i, cache_dir) for i, spec in enumerate(campaign.domains)]
    tasks = []
    for check in campaign.checks:
        if check == "halfline":
            tasks.append((check, None))
        else:
            tasks.extend((check, ctx) for ctx in contexts)
    for ctx in contexts:
        if any(c in NEEDS_EIG for c in campaign.checks):
            ctx.eig
            if any(c in NEEDS_FULL for c in campaign.checks):
                ctx.functions

    def work(task):
        check, ctx = task
        return check_halfline(campaign) if ctx is None else CHECK_FUNCS[check](ctx)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(work, tasks))
    else:
        outputs = [work(t) for t in tasks]

    rows, fits, tables = [], {}, {}
    for (check, ctx), res in zip(tasks, outputs):
        rows.extend(res.rows)
        key = check if ctx is None else f"{check}/{ctx.domain.name}"
        if res.fits:
            fits[key] = res.fits
        for name, tab in res.tables.items():
            tables.setdefault(name, []).extend(tab)
    return CampaignResult(campaign, rows, fits, tables)


# --- output ----------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _csv_text(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def summarise(result):
    """Per check: report count, failures, worst ratio and verdict."""
    per = {}
    for r in result.rows:
        s = per.setdefault(r["name"], {"reports": 0, "failures": 0, "vacuous": 0, "worst_ratio": 0.0})
        s["reports"] += 1
        if r["vacuous"]:
            s["vacuous"] += 1
            continue
        s["worst_ratio"] = max(s["worst_ratio"], r["ratio"])
        if not r["pass"]:
            s["failures"] += 1
    return {k: per[k] for k in sorted(per)}


def summary_text(result):
    camp = result.campaign
    lines = [f"campaign {camp.name}: {camp.theorem}", camp.description, ""]
    summary = summarise(result)
    width = max((len(k) for k in summary), default=10)
    for name, s in summary.items():
        verdict = "PASS" if s["failures"] == 0 else "FAIL"
        lines.append(
            f"{name:<{width}}  {verdict}  reports={s['reports']:<5d} failures={s['failures']:<4d} "
            f"vacuous={s['vacuous']:<4d} worst_ratio={s['worst_ratio']:.6g}"
        )
    for key, fit in sorted(result.fits.items()):
        lines.append(f"fit {key}: {json.dumps(_json_clean(fit), sort_keys=True)}")
    lines.append("")
    lines.append("status: " + ("all checks pass" if result.status == EXIT_OK else f"{len(result.failures)} violation(s)"))
    return "\n".join(lines) + "\n"


def summary_json(result):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "backend": _core.BACKEND,
        "config": result.campaign.normalised(),
        "seed": result.campaign.seed,
        "summary": summarise(result),
        "fits": result.fits,
        "status": result.status,
        "failures": len(result.failures),
    }
    return json.dumps(_json_clean(doc), sort_keys=True, indent=2) + "\n"


def write_outputs(result, out_dir):
    """Write all requested files; each file is replaced atomically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = result.campaign.name
    files = {}
    formats = result.campaign.output["formats"]
    if "csv" in formats:
        files[f"{name}.csv"] = _csv_text(result.rows, CSV_COLUMNS)
        for tab, rows in sorted(result.tables.items()):
            cols = list(rows[0]) if rows else []
            files[f"{name}.{tab}.csv"] = _csv_text(rows, cols)
    if "json" in formats:
        files[f"{name}.json"] = summary_json(result)
    if "txt" in formats:
        files[f"{name}.txt"] = summary_text(result)
    written = []
    for fname, text in files.items():
        path = out_dir / fname
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
        written.append(path)
    return written


# --- entry point ----------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="boundecay", description="Boundary-decay verification campaigns.")
    parser.add_argument("--out-dir", help="directory for report files (overrides [output] directory)")
    parser.add_argument("--node-cap", type=int, help="maximum interior nodes per domain")
    parser.add_argument("--seed", type=int, help="seed for random test vectors")
    parser.add_argument("--jobs", type=int, default=1, help="checks evaluated concurrently")
    parser.add_argument("--cache-dir", help="eigensystem cache directory")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a campaign config file")
    run.add_argument("config")
    pre = sub.add_parser("preset", help="run a built-in campaign")
    pre.add_argument("name")
    sub.add_parser("list-presets", help="list built-in campaigns")
    cache = sub.add_parser("cache", help="manage the eigensystem cache")
    cache.add_argument("action", choices=["build", "clear"])
    cache.add_argument("target", nargs="?", help="preset name or config file (for build)")
    return parser


def _campaign_for(target, args):
    if target in preset_names():
        return load_preset(target, node_cap=args.node_cap, seed=args.seed)
    return load_config(target, node_cap=args.node_cap, seed=args.seed)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "list-presets":
            print(list_presets())
            return EXIT_OK
        if args.command == "cache":
            cache_dir = Path(args.cache_dir) if args.cache_dir else default_cache_dir()
            if args.action == "clear":
                removed = 0
                if cache_dir.is_dir():
                    for p in sorted(cache_dir.glob("*.bdeig")):
                        p.unlink()
                        removed += 1
                print(f"removed {removed} cached eigensystem(s) from {cache_dir}")
                return EXIT_OK
            if not args.target:
                raise ConfigError("cache build needs a preset name or config file")
            camp = _campaign_for(args.target, args)
            for i, spec in enumerate(camp.domains):
                print(DomainContext(camp, spec, i, cache_dir).build_cache())
            return EXIT_OK
        if args.command == "run":
            camp = load_config(args.config, node_cap=args.node_cap, seed=args.seed)
        else:
            camp = load_preset(args.name, node_cap=args.node_cap, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    cache_dir = Path(args.cache_dir) if args.cache_dir else default_cache_dir()
    try:
        result = run_campaign(camp, jobs=args.jobs, cache_dir=cache_dir)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out_dir = args.out_dir or camp.output["directory"]
    write_outputs(result, out_dir)
    sys.stdout.write(summary_text(result))
    return result.status


if __name__ == "__main__":
    sys.exit(main())
