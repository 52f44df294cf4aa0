"""Eigenvalue shifts under inward shrinking of the domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimates import (
    BoundReport,
    EstimateError,
    ExponentFit,
    OutOfRangeError,
    c0,
    c1,
    cutoff_mu,
    fit_exponent,
    make_report,
    scaled_distance,
)
from .geometry import DomainError, inner_region
from .operator import face_quadratic_form, weighted_norm
from .spectral import lowest_eigenvalues, operator_norms

GAP_RTOL = 1e-9


@dataclass
class ShrinkTable:
    """``lambdas[k, n-1]`` is the n-th eigenvalue of ``{d > eps[k]}``; row 0 is ``eps = 0``."""

    eps: np.ndarray
    lambdas: np.ndarray
    domain: str
    operator: str

    @property
    def baseline(self):
        return self.lambdas[0]

    def gaps(self):
        return self.lambdas[1:] - self.lambdas[0]

    def rows(self):
        for k, e in enumerate(self.eps):
            for n, lam in enumerate(self.lambdas[k], start=1):
                yield dict(
                    domain=self.domain,
                    operator=self.operator,
                    n=n,
                    eps=float(e),
                    **{"lambda": float(lam), "gap": float(lam - self.lambdas[0, n - 1])},
                )


def lattice_eps(h, multiples):
    """ε values at whole lattice multiples, so ``{d > eps}`` ends exactly at a node row."""
    return [m * h for m in multiples]


def shrink_and_solve(op, dist, eps_list, n_max, solver=None):
    """Table of the lowest ``n_max`` eigenvalues of ``{d > eps}`` for each ε.

    The operator is reassembled on each shrunk mask with the same fields,
    on the parent lattice.  ``dist`` is the unscaled distance to the
    boundary for every operator kind.
    """
    solver = solver or lowest_eigenvalues
    eps = np.array([0.0] + sorted(float(e) for e in eps_list if e > 0)[::-1])
    rows = []
    for e in eps:
        try:
            sub = inner_region(op.domain, dist, e)
        except DomainError as exc:
            raise DomainError(f"shrunk region for eps={e:g} is empty") from exc
        if sub.n_interior < n_max:
            raise DomainError(f"eps={e:g} leaves {sub.n_interior} < n_max={n_max} nodes")
        sub_op = op if e == 0 else op.restrict(sub)
        rows.append(np.asarray(solver(sub_op, n_max))[:n_max])
    lambdas = np.vstack(rows)
    base = lambdas[0]
    if np.any(lambdas < base - GAP_RTOL * np.abs(base)):
        raise EstimateError("shrinking lowered an eigenvalue: discretisation failure")
    return ShrinkTable(eps, lambdas, op.domain.name, op.label())


def verify_thm11(table, c, n_max=None, rate=None, margin=0.1, window=None):
    """Fit the decay exponent of ``lambda_n(U_eps) - lambda_n(U)`` for each n.

    The bound ``gap <= c_n eps^(2/c)`` (or ``eps^(1/alpha)`` for divergence
    form, pass ``rate``) passes when the fitted exponent is at least
    ``rate - margin``.  Each report has ``lhs = rate - margin`` and
    ``rhs = fitted exponent``.  ``c_hat`` is ``max gap / eps^rate``.
    """
    rate = 2.0 / c if rate is None else rate
    n_max = table.lambdas.shape[1] if n_max is None else n_max
    eps = table.eps[1:]
    gaps = table.gaps()
    out = []
    for n in range(1, n_max + 1):
        g = gaps[:, n - 1]
        order = np.argsort(eps)
        if np.any(np.diff(g[order]) < -GAP_RTOL * np.abs(table.baseline[n - 1])):
            raise EstimateError(f"gaps for n={n} are not monotone in eps")
        fit = fit_exponent(zip(eps, g), window)
        c_hat = float(np.max(g / eps**rate))
        rep = make_report(
            "thm11_exponent",
            rate - margin,
            fit.exponent,
            n=n,
            rate=rate,
            c_hat=c_hat,
            r_squared=fit.r_squared,
        )
        out.append((n, fit, rep))
    return out


def lemma_constants(c):
    """Explicit constants for the cutoff lemmas derived from ``c0`` and ``c1``.

    The cutoff changes only on ``{eps < d < 2 eps}``; applying the strip
    bounds at ``2 eps`` gives ``c2 = 2^(1+2/c) c1 + 2^(3+2/c) c0`` and
    ``c3 = (2^(2+2/c) c0)^(1/2)``.
    """
    k = 2.0 ** (2.0 / c)
    return {
        "c2": 2.0 * k * c1(c) + 8.0 * k * c0(c),
        "c3": float(np.sqrt(4.0 * k * c0(c))),
        "c2_formula": "2^(1+2/c) c1 + 2^(3+2/c) c0",
        "c3_formula": "sqrt(2^(2+2/c) c0)",
    }


def verify_lemma9_10(op, eig, f, eps, dist, c=None, a=None):
    """Cutoff bounds: ``Q(mu f) <= Q(f) + eps^(2/c) c2 P`` and
    ``||mu f|| >= ||f|| - c3 eps^(1+1/c) P^(1/2)``.

    The second is reported with ``lhs = ||f|| - c3 eps^(1+1/c) P^(1/2)``
    and ``rhs = ||mu f||``.
    """
    c = op.hardy_c if c is None else c
    a = op.hardy_a if a is None else a
    f = np.asarray(f, dtype=float)
    if weighted_norm(op, f) == 0:
        raise EstimateError("f is zero")
    dt = scaled_distance(op, dist)
    mu = cutoff_mu(dt, eps)
    if not np.any(mu > 0):
        raise OutOfRangeError(f"cutoff vanishes for eps={eps:g} (max d = {dt.max:g})")
    n1, n2 = operator_norms(eig, f, c, a)
    P = n1 * n2
    k = lemma_constants(c)
    q_rep = make_report(
        "lemma9_q_bound",
        face_quadratic_form(op, mu * f),
        face_quadratic_form(op, f) + eps ** (2.0 / c) * k["c2"] * P,
        eps=eps,
        c=c,
        a=a,
        c2=k["c2"],
    )
    deficit = k["c3"] * eps ** (1.0 + 1.0 / c) * np.sqrt(P)
    lower = weighted_norm(op, f) - deficit
    n_rep = make_report(
        "lemma10_norm_bound",
        max(lower, 0.0),
        weighted_norm(op, mu * f),
        vacuous=lower <= 0,
        eps=eps,
        c=c,
        a=a,
        c3=k["c3"],
        deficit=float(deficit),
    )
    return q_rep, n_rep


__all__ = [
    "BoundReport",
    "ExponentFit",
    "ShrinkTable",
    "lattice_eps",
    "lemma_constants",
    "shrink_and_solve",
    "verify_lemma9_10",
    "verify_thm11",
]
