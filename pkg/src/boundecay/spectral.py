"""Eigensystems, spectral calculus, heat semigroup and counting functions."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .operator import EllipticOperator

DENSE_LIMIT = 20_000


class SpectralError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues with sigma-orthonormal eigenvectors.

    ``vectors[:, n]`` holds the nodal values of the n-th eigenfunction,
    normalised so that ``sum phi_n phi_k m = delta_nk``.  ``complete`` is
    true when every eigenpair of the discrete operator is present.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    op: EllipticOperator
    complete: bool

    @property
    def m(self):
        return self.eigenvalues.size

    @property
    def lam_max(self):
        return float(self.eigenvalues[-1])

    def coefficients(self, f):
        """Expansion coefficients ``<f, phi_n>``."""
        return self.vectors.T @ (np.asarray(f) * self.op.mass)

    def require_complete(self, what):
        if not self.complete:
            raise SpectralError(f"{what} needs a full decomposition (got {self.m} of {self.op.n})")


def _normalise_signs(vecs):
    scale = np.abs(vecs).max(axis=0)
    first = np.argmax(np.abs(vecs) > 1e-8 * scale, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigensolve(op: EllipticOperator, m="all", backend="dense") -> EigenSystem:
    """Lowest ``m`` eigenpairs (or all of them) of ``op``.

    The dense backend diagonalises the symmetrised matrix with LAPACK.  The
    sparse backend uses shift-invert Lanczos about zero and is meant for
    a few eigenvalues on large lattices.
    """
    n = op.n
    if n == 0:
        raise SpectralError("empty domain")
    k = n if m == "all" else int(m)
    if k < 1 or k > n:
        raise SpectralError(f"m={m} outside [1, {n}]")
    sym = op.symmetric()
    if backend == "dense" or k > n - 2 or n < 64:
        if n > DENSE_LIMIT:
            raise SpectralError(f"{n} nodes exceed the dense limit {DENSE_LIMIT}")
        full = sym.toarray()
        if k == n:
            w, u = sla.eigh(full)
        else:
            w, u = sla.eigh(full, subset_by_index=[0, k - 1])
    elif backend == "sparse":
        w, u = spla.eigsh(sym.tocsc(), k=k, sigma=0.0, which="LM", tol=1e-13, v0=np.ones(n))
        order = np.argsort(w)
        w, u = w[order], u[:, order]
    else:
        raise SpectralError(f"unknown backend {backend!r}")
    phi = _normalise_signs(u / np.sqrt(op.mass)[:, None])
    return EigenSystem(np.asarray(w), np.ascontiguousarray(phi), op, complete=(k == n))


def lowest_eigenvalues(op, k):
    """First ``k`` eigenvalues, dense for small lattices and sparse otherwise."""
    backend = "dense" if op.n <= 2500 else "sparse"
    return eigensolve(op, k, backend=backend).eigenvalues


def fractional_apply(eig: EigenSystem, p, a, f):
    """``(H + a)^p f`` by the spectral calculus."""
    eig.require_complete("fractional_apply")
    shifted = eig.eigenvalues + a
    if p != 0 and (p < 0 or p != int(p)) and np.any(shifted <= 0):
        raise SpectralError("H + a must be positive for negative or fractional powers")
    if p == 0:
        return np.array(f, dtype=float, copy=True)
    coef = eig.coefficients(f)
    return eig.vectors @ (shifted**p * coef)


def operator_norms(eig, f, c, a):
    """``(||(H+a) f||, ||(H+a)^{1/c} f||)`` computed spectrally."""
    eig.require_complete("operator_norms")
    coef = eig.coefficients(f)
    shifted = eig.eigenvalues + a
    n1 = float(np.sqrt(np.sum((shifted * coef) ** 2)))
    n2 = float(np.sqrt(np.sum(shifted ** (2.0 / c) * coef**2)))
    return n1, n2


def heat_diag(eig: EigenSystem, t):
    """``K(t, x, x) = sum_n exp(-lambda_n t) phi_n(x)^2`` at every node."""
    if not t > 0:
        raise SpectralError(f"t must be positive, got {t}")
    return (eig.vectors**2) @ np.exp(-eig.eigenvalues * t)


def heat_trace(eig, t):
    if not t > 0:
        raise SpectralError(f"t must be positive, got {t}")
    return float(np.sum(np.exp(-eig.eigenvalues * t)))


def heat_truncation_bound(eig, t, nodes=None):
    """Upper bound for what the missing eigenpairs add to ``sum_x K m``.

    Each missing term is at most ``exp(-lambda_m t)`` times the squared
    norm of an orthonormal vector restricted to the nodes, so the total is
    bounded by ``exp(-lambda_m t) * min(#missing, #nodes)``.
    """
    if eig.complete:
        return 0.0
    missing = eig.op.n - eig.m
    count = missing if nodes is None else min(missing, len(nodes))
    return float(np.exp(-eig.lam_max * t) * count)


def counting(eig, lam):
    """``N(lambda) = #{n : lambda_n < lambda}``."""
    if not eig.complete and lam >= eig.lam_max:
        raise SpectralError(f"lambda={lam:g} is not below the largest computed eigenvalue")
    return int(np.count_nonzero(eig.eigenvalues < lam))


def strip_counting(eig, dist, eps, lam):
    """``N(eps, lambda)``: spectral density integrated over ``{d < eps}``."""
    if not eps > 0:
        raise SpectralError("eps must be positive")
    counting(eig, lam)
    sel = eig.eigenvalues < lam
    strip = dist.values < eps
    mass = eig.op.mass[strip]
    return float(np.sum((eig.vectors[strip][:, sel] ** 2) * mass[:, None]))


def estimate_hardy_constant(op, dist, rescale=True):
    """Best discrete constant in the Hardy inequality.

    Solves ``(H + a) f = theta d^-2 f`` for the smallest ``theta`` and
    returns ``theta^{-1/2}`` with details.  With ``rescale`` the distance is
    first multiplied by ``op.distance_scale``.
    """
    d = dist.values * (op.distance_scale if rescale else 1.0)
    a = op.hardy_a
    A = op.stiffness + sp.diags((op.potential + a) * op.mass)
    b = op.mass / d**2
    s = 1.0 / np.sqrt(b)
    C = (sp.diags(s) @ A @ sp.diags(s)).tocsc()
    try:
        if op.n <= 3000:
            theta = sla.eigh(C.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
            method = "dense"
        else:
            theta = spla.eigsh(C, k=1, sigma=0.0, which="LM", tol=1e-12, v0=np.ones(op.n))[0][0]
            method = "shift-invert"
    except (np.linalg.LinAlgError, spla.ArpackNoConvergence) as exc:
        raise SpectralError(f"generalised Hardy eigenproblem failed: {exc}") from exc
    if not theta > 0:
        raise SpectralError(f"nonpositive Hardy eigenvalue {theta}")
    c_num = float(theta ** -0.5)
    return c_num, {"theta": float(theta), "method": method, "n": op.n, "rescaled": rescale}


# --- cache ------------------------------------------------------------------

_MAGIC = b"BDEIG1"


def cache_key(op):
    h = op.domain.spacing
    return f"{op.domain.digest()}-{op.kind}-{op.label()}-h{h:.12g}"


def save_eigensystem(eig, path):
    """Binary cache: ``BDEIG1`` header, ``m n dim`` and float64 records."""
    n, m = eig.vectors.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qqq?", m, n, eig.op.domain.dim, eig.complete))
        fh.write(np.ascontiguousarray(eig.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(eig.vectors.T, dtype="<f8").tobytes())


def load_eigensystem(path, op):
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise SpectralError(f"{path} is not an eigensystem cache file")
    off = len(_MAGIC)
    m, n, dim, complete = struct.unpack_from("<qqq?", data, off)
    off += struct.calcsize("<qqq?")
    if n != op.n or dim != op.domain.dim:
        raise SpectralError("cached eigensystem does not match the operator")
    lam = np.frombuffer(data, dtype="<f8", count=m, offset=off).copy()
    off += 8 * m
    vecs = np.ascontiguousarray(np.frombuffer(data, dtype="<f8", count=m * n, offset=off).reshape(m, n).T)
    return EigenSystem(lam, vecs, op, bool(complete))
