import math

import numpy as np
import pytest

from boundecay.geometry import DomainSpec, build_domain
from boundecay.operator import assemble_weighted_laplacian
from boundecay.spectral import (
    SpectralError,
    counting,
    eigensolve,
    estimate_hardy_constant,
    fractional_apply,
    heat_diag,
    heat_trace,
    load_eigensystem,
    lowest_eigenvalues,
    operator_norms,
    save_eigensystem,
    strip_counting,
)

from conftest import discrete_sine_eigenvalues


def test_interval_quarter_spacing():
    op = assemble_weighted_laplacian(build_domain(DomainSpec("interval", (1.0,), 0.25)))
    eig = eigensolve(op)
    np.testing.assert_allclose(eig.eigenvalues, [9.3726, 32.0, 54.6274], atol=1e-4)


def test_interval_closed_form(interval64):
    np.testing.assert_allclose(interval64.eig.eigenvalues, discrete_sine_eigenvalues(64), rtol=1e-10)


def test_square_closed_form(square20):
    lam1d = discrete_sine_eigenvalues(20)
    expected = np.sort((lam1d[:, None] + lam1d[None, :]).ravel())
    np.testing.assert_allclose(square20.eig.eigenvalues, expected, rtol=1e-10)
    assert square20.eig.eigenvalues[0] == pytest.approx(2 * math.pi**2, rel=5e-3)


def test_orthonormality(square20):
    eig = square20.eig
    G = eig.vectors.T @ (eig.vectors * eig.op.mass[:, None])
    np.testing.assert_allclose(G, np.eye(eig.m), atol=1e-10)


def test_sparse_matches_dense(square20):
    sparse = eigensolve(square20.op, 6, backend="sparse")
    np.testing.assert_allclose(sparse.eigenvalues, square20.eig.eigenvalues[:6], rtol=1e-9)
    assert not sparse.complete
    np.testing.assert_allclose(lowest_eigenvalues(square20.op, 3), square20.eig.eigenvalues[:3], rtol=1e-10)


def test_bad_requests(square20):
    with pytest.raises(SpectralError):
        eigensolve(square20.op, 0)
    with pytest.raises(SpectralError):
        eigensolve(square20.op, 3, backend="magic")
    part = eigensolve(square20.op, 5)
    with pytest.raises(SpectralError):
        operator_norms(part, np.ones(square20.op.n), 2.0, 0.0)
    with pytest.raises(SpectralError):
        counting(part, part.lam_max + 1)


def test_fractional_apply(interval64):
    eig = interval64.eig
    f = eig.vectors[:, 2] + 0.5 * eig.vectors[:, 4]
    half = fractional_apply(eig, 0.5, 0.0, f)
    np.testing.assert_allclose(fractional_apply(eig, 0.5, 0.0, half), eig.op.apply(f), rtol=1e-8, atol=1e-8)
    n1, n2 = operator_norms(eig, eig.vectors[:, 0], 2.0, 1.0)
    lam = eig.eigenvalues[0]
    assert n1 == pytest.approx(lam + 1)
    assert n2 == pytest.approx((lam + 1) ** 0.5)


def test_heat_trace_identity(square20):
    eig = square20.eig
    for t in (1e-3, 0.05, 1.0):
        quad = float(np.sum(heat_diag(eig, t) * eig.op.mass))
        assert quad == pytest.approx(heat_trace(eig, t), rel=1e-10)
    with pytest.raises(SpectralError):
        heat_trace(eig, 0.0)


def test_counting_and_strip_counting(square20):
    eig = square20.eig
    # 2 pi^2 and the double 5 pi^2 lie below 60; 8 pi^2 = 79 does not
    assert counting(eig, 60.0) == 3
    full = strip_counting(eig, square20.dist, 10.0, 60.0)
    assert full == pytest.approx(3.0)
    a = strip_counting(eig, square20.dist, 0.1, 60.0)
    b = strip_counting(eig, square20.dist, 0.2, 60.0)
    c = strip_counting(eig, square20.dist, 0.2, 120.0)
    assert 0 <= a <= b <= c <= counting(eig, 120.0)


def test_hardy_constant_interval(interval256):
    c_num, detail = estimate_hardy_constant(interval256.op, interval256.dist)
    assert detail["method"] == "dense"
    assert 1.5 < c_num <= 2.0


def test_hardy_constant_grows_under_refinement():
    vals = []
    for h in (1 / 32, 1 / 128):
        dom = build_domain(DomainSpec("interval", (1.0,), h))
        from boundecay.geometry import distance_to_boundary

        vals.append(estimate_hardy_constant(assemble_weighted_laplacian(dom), distance_to_boundary(dom))[0])
    assert vals[0] < vals[1] < 2.0


def test_cache_roundtrip(tmp_path, square20):
    path = tmp_path / "eig.bdeig"
    save_eigensystem(square20.eig, path)
    back = load_eigensystem(path, square20.op)
    assert np.array_equal(back.eigenvalues, square20.eig.eigenvalues)
    assert np.array_equal(back.vectors, square20.eig.vectors)
    assert back.complete
    (tmp_path / "junk").write_bytes(b"nope")
    with pytest.raises(SpectralError):
        load_eigensystem(tmp_path / "junk", square20.op)
