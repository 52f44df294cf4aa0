"""Discrete self-adjoint elliptic operators on lattice domains.

All operators share one structure: a symmetric stiffness matrix ``K``
built from weighted face differences, a diagonal mass ``m = sigma^2 h^dim``
and a nodal potential ``V``.  The operator acts as

    H f = K f / m + V f,

which is self-adjoint in the inner product ``<f, g> = sum f conj(g) m``.
The quadratic form is ``Q(f) = sum_faces w (f_l - f_r)^2 + sum V f^2 m``
with ``f = 0`` on exterior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import DomainSpec, GridDomain, build_domain

ELLIPTICITY_RTOL = 1e-12


class OperatorError(ValueError):
    pass


# --- coefficient fields -----------------------------------------------------


@dataclass(frozen=True)
class WeightField:
    """Positive weight ``sigma`` given as a function of coordinates.

    ``face_rule`` selects how faces are sampled: ``"geometric"`` takes the
    geometric mean of the two node values, ``"midpoint"`` evaluates the
    function at the face centre (needed when ``sigma`` vanishes on the
    boundary).
    """

    func: Callable[[np.ndarray], np.ndarray]
    description: str
    face_rule: str = "geometric"

    def __call__(self, pts):
        return np.asarray(self.func(pts), dtype=float)

    @classmethod
    def one(cls):
        return cls(lambda p: np.ones(len(p)), "one")

    @classmethod
    def power(cls, alpha_w):
        """``sigma(x) = x**(alpha_w / 2)`` along the first axis."""
        a = float(alpha_w)
        return cls(lambda p: np.abs(p[:, 0]) ** (a / 2), f"power({a:g})", "midpoint")


@dataclass(frozen=True)
class PotentialField:
    func: Callable[[np.ndarray], np.ndarray]
    description: str

    def __call__(self, pts):
        return np.asarray(self.func(pts), dtype=float)

    @classmethod
    def zero(cls):
        return cls(lambda p: np.zeros(len(p)), "zero")

    @classmethod
    def constant(cls, value):
        v = float(value)
        return cls(lambda p: np.full(len(p), v), f"constant({v:g})")


@dataclass(frozen=True)
class CoefficientField:
    """Diagonal coefficient matrix ``diag(a_1, ..., a_dim)`` per point.

    ``alpha`` is the ellipticity constant: every entry must lie in
    ``[1, alpha^2]``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    alpha: float
    description: str

    def __call__(self, pts):
        return np.asarray(self.func(pts), dtype=float)

    @classmethod
    def identity(cls):
        return cls(lambda p: np.ones_like(p, dtype=float), 1.0, "identity")

    @classmethod
    def scalar(cls, k):
        k = float(k)
        return cls(lambda p: np.full(p.shape, k), float(np.sqrt(k)), f"scalar({k:g})")

    @classmethod
    def diag(cls, ax, ay):
        vals = np.array([float(ax), float(ay)])

        def func(p):
            return np.broadcast_to(vals[: p.shape[1]], p.shape).copy()

        return cls(func, float(np.sqrt(max(ax, ay))), f"diag({ax:g},{ay:g})")

    @classmethod
    def checkerboard(cls, alpha, cells):
        """``1`` and ``alpha^2 I`` on alternating square cells of side ``1/cells``."""
        alpha = float(alpha)
        size = 1.0 / float(cells)

        def func(p):
            parity = np.floor(p / size + 1e-9).astype(np.int64).sum(axis=1) % 2
            val = np.where(parity == 1, alpha**2, 1.0)
            return np.repeat(val[:, None], p.shape[1], axis=1)

        return cls(func, alpha, f"checkerboard({alpha:g},{cells:g})")


# --- the operator -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """Assembled operator; see the module docstring for conventions."""

    domain: GridDomain
    stiffness: sp.csr_matrix
    mass: np.ndarray
    potential: np.ndarray
    sigma: np.ndarray
    face_left: np.ndarray
    face_right: np.ndarray
    face_weight: np.ndarray
    hardy_c: float
    hardy_a: float
    kind: str
    alpha: float = 1.0
    sigma_field: WeightField = field(default_factory=WeightField.one)
    potential_field: PotentialField = field(default_factory=PotentialField.zero)
    coeff_field: CoefficientField = field(default_factory=CoefficientField.identity)

    @property
    def n(self):
        return self.mass.size

    @property
    def distance_scale(self):
        """Factor turning d into the rescaled distance used in the Hardy inequality."""
        return 1.0 / self.alpha

    @property
    def weighted_measure(self):
        return self.mass

    def label(self):
        if self.kind == "divergence_form":
            return f"divergence_form[{self.coeff_field.description}]"
        if self.kind == "one_d_weighted":
            return f"one_d_weighted[{self.sigma_field.description}]"
        return f"weighted_laplacian[sigma={self.sigma_field.description},V={self.potential_field.description}]"

    def _check(self, f):
        f = np.asarray(f)
        if f.shape[0] != self.n:
            raise OperatorError(f"vector of length {f.shape[0]} on an operator of size {self.n}")
        return f

    def apply(self, f):
        f = self._check(f)
        if f.ndim == 1:
            return self.stiffness @ f / self.mass + self.potential * f
        return self.stiffness @ f / self.mass[:, None] + self.potential[:, None] * f

    def matrix(self):
        """Sparse matrix of ``H`` (not symmetric unless sigma is constant)."""
        return (sp.diags(1.0 / self.mass) @ self.stiffness + sp.diags(self.potential)).tocsr()

    def symmetric(self):
        """``D H D^{-1}`` with ``D = diag(sigma h^{dim/2})``; symmetric."""
        s = 1.0 / np.sqrt(self.mass)
        return (sp.diags(s) @ self.stiffness @ sp.diags(s) + sp.diags(self.potential)).tocsr()

    def face_differences(self, f):
        f = self._check(f)
        fl = np.where(self.face_left >= 0, f[np.maximum(self.face_left, 0)], 0.0)
        fr = np.where(self.face_right >= 0, f[np.maximum(self.face_right, 0)], 0.0)
        return fl - fr

    def face_energy(self, f):
        """Per-face ``w |f_l - f_r|^2``; sums to the gradient part of ``Q``."""
        diff = self.face_differences(f)
        return self.face_weight * np.abs(diff) ** 2

    def restrict(self, domain):
        """Reassemble with the same coefficient fields on a sub-domain."""
        return _assemble(
            domain,
            self.sigma_field,
            self.potential_field,
            self.coeff_field,
            kind=self.kind,
            hardy_c=self.hardy_c,
            hardy_a=self.hardy_a,
        )


def default_hardy_c(domain):
    if domain.hardy_class == "convex" or domain.dim == 1:
        return 2.0
    return 4.0


def _assemble(domain, sigma, potential, coeff, kind, hardy_c, hardy_a):
    h = domain.spacing
    dim = domain.dim
    pts = domain.interior_points
    left, right, axis, mids = domain.faces()

    sig_nodes = sigma(pts)
    if np.any(~(sig_nodes > 0)):
        raise OperatorError("sigma must be positive on interior nodes")
    v = potential(pts)
    if np.any(v < 0):
        raise OperatorError("potential must be nonnegative")

    if sigma.face_rule == "midpoint":
        sig_face = sigma(mids)
    else:
        step = np.zeros_like(mids)
        step[np.arange(len(mids)), axis] = h / 2
        sig_face = np.sqrt(sigma(mids - step) * sigma(mids + step))
    if np.any(~(sig_face > 0)):
        raise OperatorError("sigma must be positive on faces")

    a_face = coeff(mids)[np.arange(len(mids)), axis]
    lo, hi = 1.0 - ELLIPTICITY_RTOL, coeff.alpha**2 * (1.0 + ELLIPTICITY_RTOL)
    if np.any(a_face < lo) or np.any(a_face > hi):
        raise OperatorError(
            f"coefficients outside [1, alpha^2] = [1, {coeff.alpha**2:g}] "
            f"(range {a_face.min():g}..{a_face.max():g})"
        )

    w = sig_face**2 * a_face * h ** (dim - 2)
    n = domain.n_interior
    inner = (left >= 0) & (right >= 0)
    diag = np.bincount(left[left >= 0], weights=w[left >= 0], minlength=n)
    diag += np.bincount(right[right >= 0], weights=w[right >= 0], minlength=n)
    rows = np.concatenate([np.arange(n), left[inner], right[inner]])
    cols = np.concatenate([np.arange(n), right[inner], left[inner]])
    vals = np.concatenate([diag, -w[inner], -w[inner]])
    stiff = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    if hardy_c is None:
        hardy_c = default_hardy_c(domain) * coeff.alpha
    if hardy_c < 2:
        raise OperatorError(f"hardy_c must be >= 2, got {hardy_c}")
    return EllipticOperator(
        domain=domain,
        stiffness=stiff,
        mass=sig_nodes**2 * h**dim,
        potential=v,
        sigma=sig_nodes,
        face_left=left,
        face_right=right,
        face_weight=w,
        hardy_c=float(hardy_c),
        hardy_a=float(hardy_a or 0.0),
        kind=kind,
        alpha=coeff.alpha,
        sigma_field=sigma,
        potential_field=potential,
        coeff_field=coeff,
    )


def assemble_weighted_laplacian(domain, sigma=None, v=None, hardy_c=None, hardy_a=0.0):
    """``H f = -sigma^-2 div(sigma^2 grad f) + V f`` with Dirichlet conditions.

    The Hardy constant defaults to 2 on convex domains (and in 1D) and to 4
    on simply connected planar ones.
    """
    return _assemble(
        domain,
        sigma or WeightField.one(),
        v or PotentialField.zero(),
        CoefficientField.identity(),
        kind="weighted_laplacian",
        hardy_c=hardy_c,
        hardy_a=hardy_a,
    )


def assemble_1d_weighted(alpha_w, L=3.0, h=1 / 256, node_cap=None):
    """``H f = -x^-a (x^a f')'`` on ``(0, L)``, Dirichlet at both ends.

    The distance is ``d(x) = x`` and the Hardy constant is ``2 / (1 - a)``.
    """
    if not 0 <= alpha_w < 1:
        raise OperatorError(f"alpha_w must lie in [0, 1), got {alpha_w}")
    spec = DomainSpec("halfline_truncated", (float(L),), float(h))
    if node_cap is not None:
        spec = DomainSpec(spec.generator, spec.params, spec.resolution, node_cap=node_cap)
    domain = build_domain(spec)
    sigma = WeightField.power(alpha_w) if alpha_w > 0 else WeightField.one()
    op = _assemble(
        domain,
        sigma,
        PotentialField.zero(),
        CoefficientField.identity(),
        kind="one_d_weighted",
        hardy_c=2.0 / (1.0 - alpha_w),
        hardy_a=0.0,
    )
    return op


def assemble_divergence_form(domain, coeff, hardy_c=None, hardy_a=0.0):
    """``H f = -div(a grad f)`` with diagonal ``a``; Hardy constant ``c = 2 alpha``.

    Hardy-type estimates for this operator use the rescaled distance
    ``d / alpha`` (``EllipticOperator.distance_scale``).
    """
    return _assemble(
        domain,
        WeightField.one(),
        PotentialField.zero(),
        coeff,
        kind="divergence_form",
        hardy_c=hardy_c,
        hardy_a=hardy_a,
    )


def quadratic_form(op, f):
    """``Q(f) = <H f, f>``."""
    return float(np.real(weighted_inner(op, op.apply(f), f)))


def face_quadratic_form(op, f):
    """``Q(f)`` evaluated as a sum over faces plus the potential term."""
    f = op._check(f)
    return float(op.face_energy(f).sum() + np.sum(op.potential * np.abs(f) ** 2 * op.mass))


def weighted_inner(op, f, g):
    f = op._check(f)
    g = op._check(g)
    val = np.sum(f * np.conj(g) * op.mass)
    return val if np.iscomplexobj(val) else float(val)


def weighted_norm(op, f):
    f = op._check(f)
    return float(np.sqrt(np.sum(np.abs(f) ** 2 * op.mass)))
