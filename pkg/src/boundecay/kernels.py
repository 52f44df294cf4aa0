"""Heat-kernel boundary mass, the half-line reference, Weyl brackets and
the spectral-density bound.

Strips ``{d < eps}`` use the rescaled distance of the operator (see
:func:`boundecay.estimates.scaled_distance`), and the exponents are written
in terms of the Hardy constant ``c``: with ``q = 1 + 1/c`` the boundary
factor is ``eps^(2q)``.  For a divergence-form operator ``c = 2 alpha`` so
``2q = 2 + 1/alpha``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .estimates import (
    BoundReport,
    EstimateError,
    ExponentFit,
    OutOfRangeError,
    c0,
    fit_exponent,
    make_report,
    scaled_distance,
)
from .spectral import SpectralError, counting, heat_truncation_bound, strip_counting

TRUNCATION_RTOL = 1e-6
RESOLVED_T_FACTOR = 20.0
WEYL_FRACTION = 2.0 / 3.0


@dataclass
class HeatReport:
    """One point of a heat-kernel bound.

    ``J`` is the strip heat quantity and ``bound`` the right-hand side it is
    compared with.  ``eps_exponent`` is the fitted ε-exponent of ``J`` at
    this ``t`` and ``t_exponent`` the fitted t-exponent at this ``eps``
    (``None`` when fewer than four points were available).
    """

    name: str
    t: float
    eps: float
    J: float
    bound: float
    ratio: float
    passed: bool
    tol: float = 0.0
    vacuous: bool = False
    eps_exponent: float | None = None
    t_exponent: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def lhs(self):
        return self.J

    @property
    def rhs(self):
        return self.bound

    def as_dict(self):
        return asdict(self)


def _heat_report(name, t, eps, J, bound, tol=0.0, **params):
    rep = make_report(name, J, bound, tol=tol)
    return HeatReport(
        name=name,
        t=float(t),
        eps=float(eps),
        J=rep.lhs,
        bound=rep.rhs,
        ratio=rep.ratio,
        passed=rep.passed,
        tol=float(tol),
        vacuous=rep.vacuous,
        params=params,
    )


def _check_t(t, upper=None):
    if not t > 0:
        raise OutOfRangeError(f"t must be positive, got {t}")
    if upper is not None and t > upper:
        raise OutOfRangeError(f"t={t:g} outside (0, {upper:g}]")


def _strip(eig, dist, eps):
    if not eps > 0:
        raise OutOfRangeError(f"eps must be positive, got {eps}")
    return np.flatnonzero(dist.values < eps)


def heat_strip_mass(eig, dist, eps, t, with_error=False):
    """``J = sum_n exp(-lambda_n t) sum_{d < eps} |phi_n|^2 m``.

    ``dist`` is used as given.  For a partial eigensystem the missing modes
    contribute at most :func:`boundecay.spectral.heat_truncation_bound`;
    an error is raised when that exceeds ``1e-6 J``.  With ``with_error``
    the pair ``(J, bound)`` is returned.
    """
    _check_t(t)
    idx = _strip(eig, dist, eps)
    mass = eig.op.mass[idx]
    per_mode = np.sum(eig.vectors[idx] ** 2 * mass[:, None], axis=0)
    J = float(np.exp(-eig.eigenvalues * t) @ per_mode)
    err = heat_truncation_bound(eig, t, idx)
    if err > TRUNCATION_RTOL * J:
        raise SpectralError(
            f"truncation bound {err:.3g} exceeds {TRUNCATION_RTOL:g} J at t={t:g}, eps={eps:g}; "
            "increase resolution or t"
        )
    return (J, err) if with_error else J


def _fit_or_none(points, window=None):
    try:
        return fit_exponent(points, window)
    except EstimateError:
        return None


@dataclass
class Ker2Result:
    reports: list
    eps_fits: dict
    t_fits: dict
    c4_hat: float
    c4_formula: float | None = None


def ker2_constant(c, a, a1, a2, N):
    """Constant in ``J <= c4 (eps^2/t)^q t^(-N/2)`` for ``0 < t <= 1``.

    With ``q = 1 + 1/c`` and the Weyl bracket ``a1 n^(2/N) <= lambda_n <=
    a2 n^(2/N)`` the sum over modes is bounded by an integral plus its
    largest term, giving
    ``c0 ((a2+a)/a1)^q [(N/2) Gamma(q+N/2) a1^(-N/2) + (q/e)^q]``.
    """
    q = 1.0 + 1.0 / c
    lead = 0.5 * N * gamma_fn(q + 0.5 * N) * a1 ** (-0.5 * N)
    return float(c0(c) * ((a2 + a) / a1) ** q * (lead + (q / math.e) ** q))


def verify_ker2(eig, dist, eps_list, t_list, c=None, a=None, eps_window=None, t_window=None, weyl=None):
    """Chain bound ``J <= c0 eps^(2q) sum_n exp(-lambda_n t) (lambda_n + a)^q``.

    Both sides use the same eigensystem.  For a partial system the left
    side is increased by the truncation bound and the right side keeps only
    the computed modes, so the comparison stays conservative.  Fits of
    ``J`` in ε (per t) and in t (per ε) are attached to the reports, and the
    empirical ``c4_hat = max J t^(N/2) (t/eps^2)^q`` is returned.  Passing
    ``weyl=(a1, a2)`` also evaluates :func:`ker2_constant`.
    """
    op = eig.op
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    q = 1.0 + 1.0 / c
    N = op.domain.dim
    dt = scaled_distance(op, dist)
    weights = (eig.eigenvalues + a) ** q
    reports = []
    table = {}
    for t in sorted(t_list):
        _check_t(t, upper=1.0)
        modal = float(np.exp(-eig.eigenvalues * t) @ weights)
        for eps in sorted(eps_list):
            J, err = heat_strip_mass(eig, dt, eps, t, with_error=True)
            rhs = c0(c) * eps ** (2 * q) * modal
            rep = _heat_report("ker2_chain", t, eps, J + err, rhs, c=c, a=a, truncation=err)
            rep.J = J
            table[(t, eps)] = J
            reports.append(rep)
    eps_fits = {t: _fit_or_none([(e, table[(t, e)]) for e in sorted(eps_list)], eps_window) for t in sorted(t_list)}
    t_fits = {e: _fit_or_none([(t, table[(t, e)]) for t in sorted(t_list)], t_window) for e in sorted(eps_list)}
    for rep in reports:
        fe, ft = eps_fits[rep.t], t_fits[rep.eps]
        rep.eps_exponent = None if fe is None else fe.exponent
        rep.t_exponent = None if ft is None else ft.exponent
    c4_hat = max(J * t ** (0.5 * N) * (t / e**2) ** q for (t, e), J in table.items())
    c4 = None if weyl is None else ker2_constant(c, a, weyl[0], weyl[1], N)
    return Ker2Result(reports, eps_fits, t_fits, float(c4_hat), c4)


def ker1_constant(c, c2):
    """``c3 = c0 c2 (2/e)^(1+p) p^p`` with ``p = 1/c``.

    Splitting ``exp(-Ht) = exp(-Ht/2) exp(-Ht/2)`` and bounding
    ``sup_s s^k exp(-s t/2) = (2k/(e t))^k`` for ``k = 1`` and ``k = p``.
    """
    p = 1.0 / c
    return float(c0(c) * c2 * (2.0 / math.e) ** (1.0 + p) * p**p)


def ultracontractive_constant(eig, t):
    """``max(max_x K(t,x,x) t^(N/2), (4 pi)^(-N/2))`` from the computed modes."""
    N = eig.op.domain.dim
    diag = (eig.vectors**2) @ np.exp(-eig.eigenvalues * t)
    return float(max(diag.max() * t ** (0.5 * N), (4.0 * math.pi) ** (-0.5 * N)))


def verify_ker1(eig, dist, eps, t, nodes, c=None, a=None):
    """``sum_{d<eps} K(t,x,y)^2 m <= c3 e^(at) (eps^2/t)^q t^(-N/2)`` at nodes ``y``.

    Needs a complete eigensystem.  ``c2`` is the larger of ``(4 pi)^(-N/2)``
    and the measured diagonal maximum at this ``t``.
    """
    eig.require_complete("verify_ker1")
    _check_t(t)
    op = eig.op
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    q = 1.0 + 1.0 / c
    N = op.domain.dim
    dt = scaled_distance(op, dist)
    idx = _strip(eig, dt, eps)
    c2 = ultracontractive_constant(eig, t)
    c3 = ker1_constant(c, c2)
    rhs = c3 * math.exp(a * t) * (eps**2 / t) ** q * t ** (-0.5 * N)
    decay = np.exp(-eig.eigenvalues * t)
    out = []
    for y in nodes:
        k_y = eig.vectors[idx] @ (decay * eig.vectors[int(y)])
        lhs = float(np.sum(k_y**2 * op.mass[idx]))
        out.append(_heat_report("ker1", t, eps, lhs, rhs, y=int(y), c=c, a=a, c2=c2, c3=c3))
    return out


def verify_ultracontractive(eig, t, h=None):
    """``max_x K(t,x,x) <= (4 pi t)^(-N/2)`` for resolved ``t >= 20 h^2``.

    The lattice kernel exceeds the continuum one by ``(1 + h^2/(16 t))^N``
    to leading order, so the tolerance is ``(1 + h^2/(8 t))^N - 1``.
    """
    op = eig.op
    h = op.domain.h if h is None else h
    if t < RESOLVED_T_FACTOR * h * h:
        raise OutOfRangeError(f"t={t:g} below the resolved limit {RESOLVED_T_FACTOR:g} h^2")
    N = op.domain.dim
    diag = (eig.vectors**2) @ np.exp(-eig.eigenvalues * t)
    err = 0.0 if eig.complete else math.exp(-eig.lam_max * t) / op.mass.min()
    tol = (1.0 + h * h / (8.0 * t)) ** N - 1.0
    bound = (4.0 * math.pi * t) ** (-0.5 * N)
    return _heat_report("ultracontractive", t, 0.0, float(diag.max()) + err, bound, tol=tol)


def halfline_reference(eps, t):
    """Strip heat mass of the half-line and its small-ε asymptote.

    ``exact = int_0^eps (4 pi t)^(-1/2) (1 - exp(-x^2/t)) dx`` and
    ``asymptotic = (36 pi)^(-1/2) eps^3 t^(-3/2)``.
    """
    if not (eps > 0 and t > 0):
        raise OutOfRangeError("eps and t must be positive")
    pref = (4.0 * math.pi * t) ** -0.5
    val, _ = integrate.quad(lambda x: -math.expm1(-x * x / t), 0.0, eps, epsabs=0.0, epsrel=1e-12, limit=200)
    return pref * val, (36.0 * math.pi) ** -0.5 * eps**3 * t**-1.5


def weyl_bracket(eig, N_dim=None, fraction=WEYL_FRACTION, count=None):
    """``(a1, a2) = (min, max) of lambda_n / n^(2/N)`` over admitted ``n``.

    Only the lowest ``fraction`` of the discrete spectrum is admitted; a
    partial eigensystem contributes whatever of that range it holds.
    ``count`` further limits the range to the first ``count`` eigenvalues.
    """
    N = eig.op.domain.dim if N_dim is None else N_dim
    admitted = min(eig.m, int(math.floor(fraction * eig.op.n)))
    if count is not None:
        admitted = min(admitted, int(count))
    if admitted < 10:
        raise SpectralError(f"Weyl bracket needs at least 10 admitted eigenvalues, got {admitted}")
    n = np.arange(1, admitted + 1, dtype=float)
    r = eig.eigenvalues[:admitted] / n ** (2.0 / N)
    if np.any(r <= 0):
        raise SpectralError("nonpositive eigenvalue in the Weyl range")
    return float(r.min()), float(r.max())


def _thm16_rhs(c, a, eps, lam):
    q = 1.0 + 1.0 / c
    return c0(c) * eps ** (2 * q) * (lam + a) ** q


def verify_thm16(eig, dist, eps, lam, c=None, a=None):
    """``N(eps, lambda) <= c0 eps^(2q) (lambda + a)^q N(lambda)``."""
    op = eig.op
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    dt = scaled_distance(op, dist)
    n_lam = counting(eig, lam)
    lhs = strip_counting(eig, dt, eps, lam)
    rhs = _thm16_rhs(c, a, eps, lam) * n_lam
    return make_report("thm16", lhs, rhs, vacuous=n_lam == 0, eps=eps, lam=lam, N_lambda=n_lam, c=c, a=a)


def verify_thm16_projection(eig, dist, eps, lam, c=None, a=None):
    """``||Q_eps E_lambda||^2 <= c0 eps^(2q) (lambda + a)^q`` via the strip Gram matrix."""
    op = eig.op
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    dt = scaled_distance(op, dist)
    n_lam = counting(eig, lam)
    idx = _strip(eig, dt, eps)
    if n_lam == 0 or idx.size == 0:
        lhs = 0.0
    else:
        phi = eig.vectors[idx][:, :n_lam] * np.sqrt(op.mass[idx])[:, None]
        lhs = float(np.linalg.eigvalsh(phi.T @ phi)[-1])
    rhs = _thm16_rhs(c, a, eps, lam)
    return make_report("thm16_projection", lhs, rhs, vacuous=n_lam == 0, eps=eps, lam=lam, N_lambda=n_lam, c=c, a=a)


__all__ = [
    "BoundReport",
    "ExponentFit",
    "HeatReport",
    "Ker2Result",
    "halfline_reference",
    "heat_strip_mass",
    "ker1_constant",
    "ker2_constant",
    "ultracontractive_constant",
    "verify_ker1",
    "verify_ker2",
    "verify_thm16",
    "verify_thm16_projection",
    "verify_ultracontractive",
    "weyl_bracket",
]
