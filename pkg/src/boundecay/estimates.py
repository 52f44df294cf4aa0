"""Boundary-decay inequalities and their ingredients.

Every check returns a :class:`BoundReport`.  Quantities are evaluated with
the lattice conventions of :mod:`boundecay.operator`:

* integrals over a set are node sums weighted by ``m = sigma^2 h^dim``;
* gradients live on faces; the strip gradient integral keeps faces whose
  two endpoints lie in the strip (exterior nodes have ``d = 0``);
* for a weight ``w`` the quantity ``int |grad w|^2 |f|^2 sigma^2`` is
  ``sum_faces w_face (w_l - w_r)^2 (f_l^2 + f_r^2) / 2``.  With these
  choices the integration-by-parts identity behind the weighted Hardy
  argument holds exactly on the lattice, not only as ``h -> 0``.

For divergence-form operators all distances are the rescaled ``d / alpha``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import distance_to_boundary
from .operator import face_quadratic_form, weighted_inner, weighted_norm
from .spectral import operator_norms

C_TOL = 2.0
GAMMA_MIN = 1e-3


class EstimateError(ValueError):
    pass


class OutOfRangeError(EstimateError):
    """The requested ε leaves nothing to test (e.g. the cutoff vanishes)."""


@dataclass
class BoundReport:
    name: str
    params: dict
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    tol: float
    vacuous: bool = False
    note: str = ""

    def as_dict(self):
        return asdict(self)


def make_report(name, lhs, rhs, tol=0.0, vacuous=False, note="", **params):
    lhs = float(lhs)
    rhs = float(rhs)
    if rhs > 0:
        ratio = lhs / rhs
    elif lhs <= 0:
        ratio, vacuous = 0.0, True
    else:
        ratio = math.inf
    return BoundReport(
        name=name,
        params=params,
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        passed=bool(ratio <= 1.0 + tol),
        tol=float(tol),
        vacuous=vacuous,
        note=note,
    )


@dataclass
class ExponentFit:
    exponent: float
    log_constant: float
    r_squared: float
    window: tuple = field(default_factory=tuple)
    n_points: int = 0

    def as_dict(self):
        return asdict(self)


# --- constants ----------------------------------------------------------------


def c0(c):
    """Constant of the strip-mass bound, ``c^(2 + 2/c)``."""
    return c ** (2.0 + 2.0 / c)


def c1(c):
    """Constant of the strip-gradient bound."""
    return c ** (2.0 / c) * (1.0 + (1.0 + c) ** (2.0 + 2.0 / c))


def default_tol(op, eps, c_tol=C_TOL):
    return c_tol * op.domain.spacing * op.distance_scale / eps


# --- weights -----------------------------------------------------------------


def _vals(dist):
    return dist.values if hasattr(dist, "values") else np.asarray(dist, dtype=float)


def weight_omega(dist, eps, c):
    """``max(d, eps)^(-1/c)``."""
    return np.maximum(_vals(dist), eps) ** (-1.0 / c)


def weight_tau(dist, eps, c):
    """Plateau ``eps^(-1/c)`` on ``d <= eps``, linear ramp to 0 at ``(1+c) eps``."""
    d = _vals(dist)
    ramp = (1.0 / c) * eps ** (-1.0 - 1.0 / c) * ((1.0 + c) * eps - d)
    out = np.where(d <= eps, eps ** (-1.0 / c), ramp)
    return np.where(d <= (1.0 + c) * eps, out, 0.0)


def cutoff_mu(dist, eps):
    """0 on ``d <= eps``, ``(d - eps)/eps`` up to ``2 eps``, then 1."""
    d = _vals(dist)
    return np.clip((d - eps) / eps, 0.0, 1.0)


def _face_diff(op, vals, exterior):
    left, right = op.face_left, op.face_right
    vl = np.where(left >= 0, vals[np.maximum(left, 0)], exterior)
    vr = np.where(right >= 0, vals[np.maximum(right, 0)], exterior)
    return vl - vr


def node_grad_sq(op, vals, exterior):
    """Nodal ``|grad w|^2``: incident face energies over ``2 m``."""
    e = op.face_weight * _face_diff(op, vals, exterior) ** 2
    n = op.n
    left, right = op.face_left, op.face_right
    acc = np.bincount(left[left >= 0], weights=e[left >= 0], minlength=n)
    acc += np.bincount(right[right >= 0], weights=e[right >= 0], minlength=n)
    return acc / (2.0 * op.mass)


def grad_weight_integral(op, vals, exterior, f):
    """``int |grad w|^2 |f|^2 sigma^2`` with the face convention."""
    return float(np.sum(node_grad_sq(op, vals, exterior) * np.abs(f) ** 2 * op.mass))


def max_face_gradient(op, vals, exterior):
    """Largest ``|w_l - w_r| / h`` over faces."""
    return float(np.max(np.abs(_face_diff(op, vals, exterior))) / op.domain.spacing)


# --- helpers -------------------------------------------------------------------


def scaled_distance(op, dist):
    return dist.scaled(op.distance_scale)


def _nonzero(op, f):
    f = np.asarray(f, dtype=float)
    if weighted_norm(op, f) == 0:
        raise EstimateError("f is zero; the ratio is undefined")
    return f


def _operator_factor(eig, f, c, a):
    n1, n2 = operator_norms(eig, f, c, a)
    return n1 * n2


def strip_mass(op, dt, f, eps):
    sel = dt.values < eps
    return float(np.sum(np.abs(f[sel]) ** 2 * op.mass[sel]))


def strip_d2(op, dt, f, eps):
    sel = dt.values < eps
    return float(np.sum(np.abs(f[sel]) ** 2 * op.mass[sel] / dt.values[sel] ** 2))


def strip_gradient(op, dt, f, eps):
    """Face energy of ``f`` over faces with both endpoints in ``{d < eps}``."""
    inside = dt.values < eps
    left, right = op.face_left, op.face_right
    ok_l = np.where(left >= 0, inside[np.maximum(left, 0)], True)
    ok_r = np.where(right >= 0, inside[np.maximum(right, 0)], True)
    return float(op.face_energy(f)[ok_l & ok_r].sum())


# --- inequalities --------------------------------------------------------------


def verify_hi(op, dist, f, tol=0.0):
    """Hardy inequality ``int |f|^2 d^-2 sigma^2 <= c^2 (Q(f) + a ||f||^2)``."""
    f = _nonzero(op, f)
    dt = scaled_distance(op, dist)
    c, a = op.hardy_c, op.hardy_a
    lhs = float(np.sum(np.abs(f) ** 2 * op.mass / dt.values**2))
    rhs = c**2 * (face_quadratic_form(op, f) + a * weighted_norm(op, f) ** 2)
    return make_report("hi", lhs, rhs, tol=tol, c=c, a=a)


def verify_lemma1(op, eig, f, eps, s=0.0, dist=None):
    """``|<Hf, w^2 f> + s ||w f||^2| <= c^(2/c) ||(H+s) f|| ||(H+a)^(1/c) f||``."""
    f = _nonzero(op, f)
    c, a = op.hardy_c, op.hardy_a
    w = weight_omega(scaled_distance(op, dist if dist is not None else dist_of(eig, op)), eps, c)
    hf = op.apply(f)
    lhs = abs(weighted_inner(op, hf, w**2 * f) + s * weighted_norm(op, w * f) ** 2)
    n_hs = weighted_norm(op, hf + s * f)
    _, n_frac = operator_norms(eig, f, c, a)
    return make_report("lemma1", lhs, c ** (2.0 / c) * n_hs * n_frac, eps=eps, s=s, c=c, a=a)


def verify_lemma2(op, f, weight, exterior=0.0):
    """``Q(mu f) <= 2 ||mu||^2 Q(f) + 2 ||grad mu||^2 ||f||^2`` (lattice norms)."""
    f = np.asarray(f, dtype=float)
    weight = np.asarray(weight, dtype=float)
    sup = max(float(np.max(np.abs(weight))), abs(exterior))
    grad_sup = float(np.max(node_grad_sq(op, weight, exterior)))
    lhs = face_quadratic_form(op, weight * f)
    rhs = 2 * sup**2 * face_quadratic_form(op, f) + 2 * grad_sup * weighted_norm(op, f) ** 2
    return make_report("lemma2", lhs, rhs)


def verify_lemma3(op, eig, f, eps, dist=None):
    """Weighted Hardy bound combining the Hardy inequality with the omega commutator."""
    f = _nonzero(op, f)
    c, a = op.hardy_c, op.hardy_a
    dt = scaled_distance(op, dist if dist is not None else dist_of(eig, op))
    w = weight_omega(dt, eps, c)
    lhs = float(np.sum(w**2 * np.abs(f) ** 2 * op.mass / (c**2 * dt.values**2)))
    grad = grad_weight_integral(op, w, eps ** (-1.0 / c), f)
    rhs = c ** (2.0 / c) * _operator_factor(eig, f, c, a) + grad
    return make_report("lemma3", lhs, rhs, eps=eps, c=c, a=a)


def dist_of(eig, op):
    """Distance field of the operator's domain (memoised on the domain)."""
    dom = op.domain
    if "distance" not in dom._cache:
        dom._cache["distance"] = distance_to_boundary(dom)
    return dom._cache["distance"]


def verify_thm4(op, eig, f, eps, dist=None, tol=None):
    """Strip bounds ``int_{d<eps} |f|^2 d^-2`` and ``int_{d<eps} |f|^2``.

    Right-hand sides are ``c0 eps^(2/c) P`` and ``c0 eps^(2+2/c) P`` with
    ``P = ||(H+a) f|| ||(H+a)^(1/c) f||``.
    """
    f = _nonzero(op, f)
    c, a = op.hardy_c, op.hardy_a
    dt = scaled_distance(op, dist if dist is not None else dist_of(eig, op))
    tol = default_tol(op, eps) if tol is None else tol
    P = _operator_factor(eig, f, c, a)
    k0 = c0(c)
    r1 = make_report(
        "thm4_strip_d2", strip_d2(op, dt, f, eps), k0 * eps ** (2.0 / c) * P, tol=tol, eps=eps, c=c, a=a
    )
    r2 = make_report(
        "thm4_strip_mass",
        strip_mass(op, dt, f, eps),
        k0 * eps ** (2.0 + 2.0 / c) * P,
        tol=tol,
        eps=eps,
        c=c,
        a=a,
    )
    return r1, r2


def verify_thm6(op, eig, f, eps, dist=None, tol=None):
    """Strip gradient bound ``int_{d<eps} |grad f|^2 <= c1 eps^(2/c) P``."""
    f = _nonzero(op, f)
    c, a = op.hardy_c, op.hardy_a
    dt = scaled_distance(op, dist if dist is not None else dist_of(eig, op))
    tol = default_tol(op, eps) if tol is None else tol
    P = _operator_factor(eig, f, c, a)
    return make_report(
        "thm6_strip_grad", strip_gradient(op, dt, f, eps), c1(c) * eps ** (2.0 / c) * P, tol=tol, eps=eps, c=c, a=a
    )


def cor5_integral(gamma, delta, c):
    """``int_0^delta |g'(s)| s^(2+2/c) ds`` for ``g = s^-gamma - delta^-gamma``."""
    q = 2.0 + 2.0 / c
    return gamma * delta ** (q - gamma) / (q - gamma)


def verify_cor5(op, eig, f, gamma, delta, dist=None):
    """``int g(d) |f|^2 <= c0 int_0^delta |g'| s^(2+2/c) ds * P`` for shifted powers."""
    c, a = op.hardy_c, op.hardy_a
    q = 2.0 + 2.0 / c
    if not gamma >= GAMMA_MIN:
        raise EstimateError(f"gamma={gamma} below {GAMMA_MIN}: the bound degenerates")
    if not gamma < q:
        raise EstimateError(f"gamma={gamma} >= 2 + 2/c = {q}: right side diverges")
    if not delta > 0:
        raise EstimateError("delta must be positive")
    f = _nonzero(op, f)
    dt = scaled_distance(op, dist if dist is not None else dist_of(eig, op))
    if delta > dt.max:
        raise EstimateError(f"delta={delta} exceeds max d = {dt.max:g}")
    d = dt.values
    g = np.where(d < delta, d ** (-gamma) - delta ** (-gamma), 0.0)
    lhs = float(np.sum(g * np.abs(f) ** 2 * op.mass))
    rhs = c0(c) * cor5_integral(gamma, delta, c) * _operator_factor(eig, f, c, a)
    return make_report("cor5", lhs, rhs, gamma=gamma, delta=delta, c=c, a=a)


class EigenfunctionReports(NamedTuple):
    mass: BoundReport
    grad: BoundReport
    interpolation: BoundReport


def verify_eigenfunction(eig, dist, n, eps, c=None, a=None, tol=None):
    """Strip bounds for the ``n``-th eigenfunction (1-based).

    ``mass``: ``int_{d<eps} |phi|^2 <= c0 eps^(2+2/c) (lambda+a)^(1+1/c)``;
    ``grad``: ``int_{d<eps} |grad phi|^2 <= c1 eps^(2/c) (lambda+a)^(1+1/c)``;
    ``interpolation``: strip mass against ``min(1, c^2 eps^2 (lambda + a))``.
    """
    if not 1 <= n <= eig.m:
        raise EstimateError(f"n={n} outside [1, {eig.m}]")
    op = eig.op
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    dt = scaled_distance(op, dist)
    tol = default_tol(op, eps) if tol is None else tol
    phi = eig.vectors[:, n - 1]
    lam = float(eig.eigenvalues[n - 1])
    factor = (lam + a) ** (1.0 + 1.0 / c)
    mass = strip_mass(op, dt, phi, eps)
    common = dict(eps=eps, c=c, a=a, n=n, lam=lam)
    r_mass = make_report("cor7_mass", mass, c0(c) * eps ** (2.0 + 2.0 / c) * factor, tol=tol, **common)
    r_grad = make_report(
        "cor7_grad", strip_gradient(op, dt, phi, eps), c1(c) * eps ** (2.0 / c) * factor, tol=tol, **common
    )
    r_int = make_report(
        "cor7_interpolation", mass, min(1.0, c**2 * eps**2 * (lam + a)), tol=tol, **common
    )
    return EigenfunctionReports(r_mass, r_grad, r_int)


def fit_exponent(points, window=None):
    """Least-squares slope of ``log value`` against ``log x``.

    ``points`` is a sequence of ``(x, value)``; ``window=(lo, hi)`` keeps
    points with ``lo <= x <= hi``.
    """
    pts = sorted((float(x), float(v)) for x, v in points)
    if window is not None:
        lo, hi = window
        pts = [(x, v) for x, v in pts if lo * (1 - 1e-12) <= x <= hi * (1 + 1e-12)]
    if len(pts) < 4:
        raise EstimateError(f"need at least 4 points in the window, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(v <= 0) or np.any(x <= 0):
        raise EstimateError("exponent fits need positive abscissae and values")
    lx, lv = np.log(x), np.log(v)
    slope, intercept = np.polyfit(lx, lv, 1)
    resid = lv - (slope * lx + intercept)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), (float(x[0]), float(x[-1])), len(x))


def resolved_window(h, factor=10.0, upper=math.inf):
    """Fit window excluding ε below ``factor * h`` (under-resolved strips)."""
    return (factor * h, upper)


def operator_domain_vectors(op, count, seed, a=None):
    """``(H + a)^-1 g`` for seeded Gaussian ``g``; these lie in the operator domain."""
    a = op.hardy_a if a is None else a
    rng = np.random.default_rng(seed)
    A = (op.stiffness + sp.diags((op.potential + a) * op.mass)).tocsc()
    lu = spla.splu(A)
    out = []
    for _ in range(count):
        g = rng.standard_normal(op.n)
        out.append(lu.solve(g * op.mass))
    return out


def example5_function(op, cut=(1.0, 2.0)):
    """``x^(1 - alpha_w)`` on the weighted half-line, switched off smoothly.

    The cutoff equals 1 below ``cut[0]``, 0 above ``cut[1]`` and is a
    quintic smoothstep in between, so the function lies in the operator
    domain of the truncated problem.
    """
    if op.kind != "one_d_weighted":
        raise EstimateError(f"example5 needs the 1D weighted operator, got {op.kind}")
    alpha_w = 1.0 - 2.0 / op.hardy_c
    x = op.domain.interior_points[:, 0]
    s = np.clip((x - cut[0]) / (cut[1] - cut[0]), 0.0, 1.0)
    chi = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    return x ** (1.0 - alpha_w) * chi


def verify_example5(op, eps_list, rtol=0.01, dist=None):
    """Strip mass of :func:`example5_function` against ``eps^(3-a)/(3-a)``.

    Each report passes when the relative error is at most ``rtol``.  Also
    returns the fitted ε-exponent and, for reference, the pairs
    ``(eps, int_{x<eps} |f|^2 d^-2 sigma^2)`` whose continuum value is
    ``eps^(1-a)/(1-a)``.
    """
    alpha_w = 1.0 - 2.0 / op.hardy_c
    f = example5_function(op)
    dt = dist if dist is not None else distance_to_boundary(op.domain)
    k = 3.0 - alpha_w
    reports, points, d2 = [], [], []
    for eps in eps_list:
        if not 0 < eps < 1:
            raise EstimateError(f"eps={eps} outside (0, 1)")
        lhs = strip_mass(op, dt, f, eps)
        rep = make_report("example5_mass", lhs, eps**k / k, eps=eps, alpha_w=alpha_w, c=op.hardy_c)
        rep.passed = bool(abs(rep.ratio - 1.0) <= rtol)
        rep.tol = float(rtol)
        reports.append(rep)
        points.append((eps, lhs))
        d2.append((float(eps), strip_d2(op, dt, f, eps)))
    return reports, fit_exponent(points), d2


__all__ = [
    "BoundReport",
    "ExponentFit",
    "EstimateError",
    "OutOfRangeError",
    "c0",
    "c1",
    "cutoff_mu",
    "example5_function",
    "fit_exponent",
    "verify_cor5",
    "verify_eigenfunction",
    "verify_example5",
    "verify_hi",
    "verify_lemma1",
    "verify_lemma2",
    "verify_lemma3",
    "verify_thm4",
    "verify_thm6",
    "weight_omega",
    "weight_tau",
]
