import math

import numpy as np
import pytest

from boundecay.estimates import OutOfRangeError, operator_domain_vectors
from boundecay.geometry import DomainError, DomainSpec, build_domain, distance_to_boundary
from boundecay.operator import CoefficientField, assemble_divergence_form, assemble_weighted_laplacian
from boundecay.perturbation import (
    lattice_eps,
    lemma_constants,
    shrink_and_solve,
    verify_lemma9_10,
    verify_thm11,
)


@pytest.fixture(scope="module")
def interval512():
    dom = build_domain(DomainSpec("interval", (1.0,), 1 / 512))
    return assemble_weighted_laplacian(dom), distance_to_boundary(dom)


def test_interval_shrink_closed_form(interval512):
    op, dist = interval512
    h = op.domain.h
    table = shrink_and_solve(op, dist, lattice_eps(h, [1, 2, 4, 8]), 3)
    assert table.eps[0] == 0.0
    k = np.arange(1, 4)
    for row, eps in zip(table.gaps(), table.eps[1:]):
        exact = math.pi**2 * k**2 * ((1 - 2 * eps) ** -2 - 1)
        np.testing.assert_allclose(row, exact, rtol=0.02)
    for n, fit, rep in verify_thm11(table, 2.0):
        assert fit.exponent == pytest.approx(1.0, abs=0.05)
        assert rep.passed
        gaps = table.gaps()[:, n - 1]
        assert np.all(gaps <= rep.params["c_hat"] * table.eps[1:] ** rep.params["rate"] * (1 + 1e-12))


def test_interval_shift_value():
    dom = build_domain(DomainSpec("interval", (1.0,), 1 / 512))
    op = assemble_weighted_laplacian(dom)
    table = shrink_and_solve(op, distance_to_boundary(dom), [0.01], 1)
    # eps = 0.01 is not a lattice multiple; {d > 0.01} starts at 6h = 0.0117
    assert table.lambdas[1, 0] == pytest.approx(math.pi**2 / (1 - 12 / 512) ** 2, rel=0.01)
    assert table.lambdas[1, 0] == pytest.approx(10.2766, rel=0.02)


def test_zero_eps_is_baseline(interval512):
    op, dist = interval512
    table = shrink_and_solve(op, dist, [], 2)
    assert table.lambdas.shape == (1, 2)
    rows = list(table.rows())
    assert rows[0]["gap"] == 0.0


def test_square_shrink_closed_form():
    dom = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 40))
    op = assemble_weighted_laplacian(dom)
    eps = lattice_eps(dom.h, [2])
    table = shrink_and_solve(op, distance_to_boundary(dom), eps, 1)
    lam1d = lambda n, L: 4 / dom.h**2 * np.sin(math.pi * dom.h / (2 * L)) ** 2
    L = 1 - 2 * eps[0]
    assert table.lambdas[1, 0] == pytest.approx(2 * lam1d(1, L), rel=1e-9)


def test_empty_or_small_region(interval512):
    op, dist = interval512
    with pytest.raises(DomainError):
        shrink_and_solve(op, dist, [0.6], 1)
    with pytest.raises(DomainError):
        shrink_and_solve(op, dist, [0.499], 3)


def test_divergence_shrink_rate():
    dom = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 40))
    op = assemble_divergence_form(dom, CoefficientField.checkerboard(2.0, 4))
    table = shrink_and_solve(op, distance_to_boundary(dom), lattice_eps(dom.h, [1, 2, 4, 8]), 1)
    (_, fit, rep), = verify_thm11(table, op.hardy_c)
    assert rep.params["rate"] == pytest.approx(0.5)
    assert fit.exponent >= 0.4
    assert rep.passed


def test_lemma_constants():
    k = lemma_constants(2.0)
    assert k["c2"] == pytest.approx(4 * 56 + 16 * 8)
    assert k["c3"] == pytest.approx(math.sqrt(8 * 8))


def test_lemma9_10(interval256):
    s = interval256
    phi = s.eig.vectors[:, 0]
    q, n = verify_lemma9_10(s.op, s.eig, phi, 0.02, s.dist)
    assert q.passed and n.passed
    lam = s.eig.eigenvalues[0]
    deficit = lemma_constants(2.0)["c3"] * 0.02**1.5 * lam**0.75
    assert n.params["deficit"] == pytest.approx(deficit)
    f = operator_domain_vectors(s.op, 1, seed=2)[0]
    for eps in (0.005, 0.01, 0.05, 0.2):
        q, n = verify_lemma9_10(s.op, s.eig, f, eps, s.dist)
        assert q.passed and n.passed
    with pytest.raises(OutOfRangeError):
        verify_lemma9_10(s.op, s.eig, phi, 0.6, s.dist)


def test_cutoff_norm_tends_to_norm(interval256):
    s = interval256
    phi = s.eig.vectors[:, 0]
    rhs = [verify_lemma9_10(s.op, s.eig, phi, e, s.dist)[1].rhs for e in (0.1, 0.03, 0.01, 0.004)]
    assert rhs == sorted(rhs)
    assert rhs[-1] > 0.99


def test_lemma10_deficit_smaller_than_lemma9(interval256):
    s = interval256
    c = 2.0
    k = lemma_constants(c)
    for eps in (0.1, 0.03, 0.01):
        assert k["c3"] * eps ** (1 + 1 / c) < k["c2"] * eps ** (2 / c)
