"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from boundecay import cli
from boundecay.estimates import (
    c0,
    default_tol,
    operator_domain_vectors,
    verify_example5,
    verify_thm4,
    verify_thm6,
)
from boundecay.geometry import DomainSpec, build_domain, distance_to_boundary, epsilon_schedule
from boundecay.kernels import halfline_reference, verify_ker2, verify_thm16, verify_thm16_projection
from boundecay.operator import (
    CoefficientField,
    assemble_1d_weighted,
    assemble_divergence_form,
    assemble_weighted_laplacian,
)
from boundecay.perturbation import lattice_eps, shrink_and_solve, verify_thm11
from boundecay.spectral import counting, eigensolve, estimate_hardy_constant

from conftest import record_acceptance

DEFAULT_DOMAINS = [
    DomainSpec("interval", (1.0,), 1 / 256),
    DomainSpec("rectangle", (1.0, 1.0), 1 / 40),
    DomainSpec("disk", (1.0,), 1 / 25),
    DomainSpec("lshape", (2.0,), 1 / 25),
    DomainSpec("slit_square", (1.0, 0.5), 1 / 40),
    DomainSpec("koch_prefractal", (2.0,), 1 / 60),
]


def suite_schedule(dt, h):
    """Inequality-suite ε values: from max d / 2 down to 1.5 h, halving."""
    return epsilon_schedule(dt, h, ratio=0.5, floor=1.5, start=dt.max / 2)


def strip_suite(op, n_max=10, vectors=5, seed=0):
    """Worst ``ratio - tol`` excess over the Theorem 4/6 suite and the report count."""
    dist = distance_to_boundary(op.domain)
    dt = dist.scaled(op.distance_scale)
    eig = eigensolve(op)
    fs = [eig.vectors[:, n] for n in range(min(n_max, eig.m))]
    fs += operator_domain_vectors(op, vectors, seed)
    worst, count, worst_ratio = -math.inf, 0, 0.0
    for f in fs:
        for eps in suite_schedule(dt, op.domain.h):
            tol = default_tol(op, eps)
            reps = list(verify_thm4(op, eig, f, eps, dist=dist, tol=tol))
            reps.append(verify_thm6(op, eig, f, eps, dist=dist, tol=tol))
            for r in reps:
                worst = max(worst, r.ratio - (1 + tol))
                worst_ratio = max(worst_ratio, r.ratio)
                count += 1
    return worst, worst_ratio, count


def test_criterion_1_example5():
    start = time.perf_counter()
    h = 1 / 1024
    op = assemble_1d_weighted(0.5, h=h)
    dist = distance_to_boundary(op.domain)
    eps = [e for e in epsilon_schedule(dist, h, ratio=0.7, floor=1.0, start=0.2) if 0.02 <= e <= 0.2]
    reps, fit, _ = verify_example5(op, eps, rtol=0.01, dist=dist)
    elapsed = time.perf_counter() - start
    worst = max(abs(r.ratio - 1) for r in reps)
    ok = all(r.passed for r in reps) and abs(fit.exponent - 2.5) <= 0.05 and elapsed < 10 and len(eps) >= 4
    record_acceptance(
        1, "Example 5 strip mass", ok, f"{len(eps)} eps, max rel err {worst:.2e}, exponent {fit.exponent:.4f}, {elapsed:.1f}s"
    )
    assert op.hardy_c == pytest.approx(4.0)
    assert ok


def test_criterion_2_thm4_thm6_suite():
    start = time.perf_counter()
    worst, worst_ratio, count = -math.inf, 0.0, 0
    for spec in DEFAULT_DOMAINS:
        op = assemble_weighted_laplacian(build_domain(spec))
        w, wr, n = strip_suite(op)
        worst, worst_ratio, count = max(worst, w), max(worst_ratio, wr), count + n
    elapsed = time.perf_counter() - start
    ok = worst <= 0 and elapsed < 600
    record_acceptance(2, "Theorem 4/6 suite", ok, f"{count} reports, worst ratio {worst_ratio:.3f}, {elapsed:.0f}s")
    assert ok


def test_criterion_3_eigenvalue_convergence():
    start = time.perf_counter()
    dom = build_domain(DomainSpec("interval", (1.0,), 1 / 512))
    op = assemble_weighted_laplacian(dom)
    table = shrink_and_solve(op, distance_to_boundary(dom), lattice_eps(dom.h, [1, 2, 4, 8]), 3)
    k = np.arange(1, 4)
    exact = math.pi**2 * k**2 * ((1 - 2 * table.eps[1:, None]) ** -2 - 1)
    err_1d = float(np.max(np.abs(table.gaps() / exact - 1)))
    fits = [fit.exponent for _, fit, _ in verify_thm11(table, 2.0)]

    sq = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 128))
    sq_table = shrink_and_solve(assemble_weighted_laplacian(sq), distance_to_boundary(sq), lattice_eps(sq.h, [1, 2, 4, 8]), 1)
    sq_exact = 2 * math.pi**2 * ((1 - 2 * sq_table.eps[1:]) ** -2 - 1)
    err_2d = float(np.max(np.abs(sq_table.gaps()[:, 0] / sq_exact - 1)))
    elapsed = time.perf_counter() - start
    ok = err_1d <= 0.02 and all(abs(e - 1) <= 0.05 for e in fits) and err_2d <= 0.03 and elapsed < 300
    record_acceptance(
        3,
        "Theorem 11 gaps",
        ok,
        f"interval err {err_1d:.1e}, exponents {', '.join(f'{e:.3f}' for e in fits)}, square err {err_2d:.1e}, {elapsed:.0f}s",
    )
    assert ok


def test_criterion_4_divergence_form():
    start = time.perf_counter()
    dom = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 40))
    op = assemble_divergence_form(dom, CoefficientField.checkerboard(2.0, 4))
    worst, worst_ratio, count = strip_suite(op)
    table = shrink_and_solve(op, distance_to_boundary(dom), lattice_eps(dom.h, [1, 2, 4, 8]), 1)
    ((_, fit, rep),) = verify_thm11(table, op.hardy_c)
    elapsed = time.perf_counter() - start
    ok = op.hardy_c == 4.0 and worst <= 0 and fit.exponent >= 0.4 and elapsed < 600
    record_acceptance(
        4, "divergence form alpha = 2", ok, f"c = {op.hardy_c:g}, worst ratio {worst_ratio:.3f}, shrink exponent {fit.exponent:.3f}, {elapsed:.0f}s"
    )
    assert ok


def test_criterion_5_hardy_constants():
    start = time.perf_counter()
    vals = {}
    for spec in (
        DomainSpec("interval", (1.0,), 1 / 256),
        DomainSpec("rectangle", (1.0, 1.0), 1 / 256, node_cap=70_000),
        DomainSpec("lshape", (2.0,), 1 / 25),
    ):
        dom = build_domain(spec)
        vals[spec.generator] = estimate_hardy_constant(assemble_weighted_laplacian(dom), distance_to_boundary(dom))[0]
    elapsed = time.perf_counter() - start
    ok = vals["interval"] <= 2.05 and vals["rectangle"] <= 2.05 and vals["lshape"] <= 4 and elapsed < 120
    record_acceptance(5, "Hardy constants", ok, ", ".join(f"{k} {v:.3f}" for k, v in vals.items()) + f", {elapsed:.0f}s")
    assert ok


def test_criterion_6_halfline():
    start = time.perf_counter()
    ratios = []
    for eps in np.logspace(-3, -1, 9):
        for t in np.logspace(-4, 0, 9):
            if eps * eps <= t / 100:
                exact, asym = halfline_reference(eps, t)
                ratios.append(exact / asym)
    elapsed = time.perf_counter() - start
    ok = all(0.98 <= r <= 1.02 for r in ratios) and elapsed < 1
    record_acceptance(6, "half-line heat reference", ok, f"{len(ratios)} points, ratio in [{min(ratios):.4f}, {max(ratios):.4f}], {elapsed:.2f}s")
    assert ok


def test_criterion_7_heat_chain():
    start = time.perf_counter()
    sq = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 256, node_cap=70_000))
    dist = distance_to_boundary(sq)
    eig = eigensolve(assemble_weighted_laplacian(sq), 60, backend="sparse")
    eps = epsilon_schedule(dist, sq.h, ratio=0.6, floor=2.0, start=0.1)
    res = verify_ker2(eig, dist, eps, [0.05, 0.1, 0.5, 1.0])
    chain_ok = all(r.passed for r in res.reports)
    eps_exps = [f.exponent for f in res.eps_fits.values()]

    iv = build_domain(DomainSpec("interval", (1.0,), 1 / 1024))
    iv_res = verify_ker2(
        eigensolve(assemble_weighted_laplacian(iv)), distance_to_boundary(iv), [0.01], [0.001, 0.002, 0.004, 0.006, 0.008, 0.01]
    )
    t_exp = iv_res.t_fits[0.01].exponent
    elapsed = time.perf_counter() - start
    worst = max(r.ratio for r in res.reports)
    ok = chain_ok and min(eps_exps) >= 2.9 and abs(t_exp + 1.5) <= 0.1 and elapsed < 300
    record_acceptance(
        7,
        "Theorem 15 chain",
        ok,
        f"worst chain ratio {worst:.3f}, eps-exponents {min(eps_exps):.3f}..{max(eps_exps):.3f}, interval t-exponent {t_exp:.3f} vs bound -2, {elapsed:.0f}s",
    )
    assert ok


def test_criterion_8_spectral_density():
    start = time.perf_counter()
    sq = build_domain(DomainSpec("rectangle", (1.0, 1.0), 1 / 40))
    dist = distance_to_boundary(sq)
    eig = eigensolve(assemble_weighted_laplacian(sq))
    eps_list = suite_schedule(dist, sq.h)
    worst, counts, ok = 0.0, [], True
    for target, lam in ((1, 3.5 * math.pi**2), (4, 9 * math.pi**2), (10, 17.5 * math.pi**2)):
        counts.append(counting(eig, lam))
        ok &= counts[-1] == target
        for eps in eps_list:
            r = verify_thm16(eig, dist, eps, lam)
            g = verify_thm16_projection(eig, dist, eps, lam)
            ok &= r.passed and g.passed and g.rhs == pytest.approx(c0(2.0) * eps**3 * lam**1.5)
            worst = max(worst, r.ratio, g.ratio)
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < 120
    record_acceptance(8, "Theorem 16", ok, f"N(lambda) = {counts}, {len(eps_list)} eps, worst ratio {worst:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_9_determinism(tmp_path):
    start = time.perf_counter()
    mismatched = []
    names = cli.preset_names()
    for name in names:
        outs = []
        for run in ("a", "b"):
            d = tmp_path / name / run
            status = cli.main(["--out-dir", str(d), "--cache-dir", str(tmp_path / "nocache"), "preset", name])
            assert status == 0, f"preset {name} exited {status}"
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        if outs[0] != outs[1]:
            mismatched.append(name)
    elapsed = time.perf_counter() - start
    ok = not mismatched
    record_acceptance(9, "determinism", ok, f"{len(names)} presets run twice, mismatches {mismatched or 'none'}, {elapsed:.0f}s")
    assert ok
