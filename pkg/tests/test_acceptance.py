"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line per criterion (run with ``pytest -s tests/test_acceptance.py``
to see the lines)."""

import json
import math
import time

import numpy as np
import pytest

from p2lab.assembly import (
    WeightField,
    assemble,
    functional_I,
    grad_I,
    p_dirichlet_integral,
)
from p2lab.cli import main
from p2lab.linear_spectrum import compute_nu1, verify_threshold_scaling
from p2lab.mesh import build_disk_mesh, build_interval_mesh, build_rectangle_mesh
from p2lab.nonlinear_solvers import nehari_point, residual_dual_norm
from p2lab.subspace import mean_zero
from p2lab.verification import (
    gap_certificate,
    gradient_fd_error,
    p_independence_check,
    scan,
)

A_ONE = WeightField.constant(1.0, "domain")
A_ZERO = WeightField.constant(0.0, "domain")
B_ONE = WeightField.constant(1.0, "boundary")
B_ZERO = WeightField.constant(0.0, "boundary")


def _report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion:2d} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_01_neumann_weight_oracle():
    start = time.perf_counter()
    prob = assemble(build_interval_mesh(256, 1.0), A_ONE, B_ZERO, 3.0)
    nu1 = compute_nu1(prob).nu1
    elapsed = time.perf_counter() - start
    rel = abs(nu1 - math.pi ** 2) / math.pi ** 2
    _report(1, rel <= 1e-3 and elapsed < 1.0,
            f"interval a=1 b=0 n=256: nu1 = {nu1:.9f} vs pi^2, "
            f"rel err {rel:.2e} (tol 1e-3), runtime {elapsed:.2f}s (< 1s)")


def test_02_boundary_weight_exact_oracle():
    worst = 0.0
    for n in (1, 8, 64):
        prob = assemble(build_interval_mesh(n, 1.0), A_ZERO, B_ONE, 3.0)
        worst = max(worst, abs(compute_nu1(prob).nu1 - 2.0))
    _report(2, worst <= 1e-10,
            f"interval a=0 b=1, n in {{1,8,64}}: max |nu1 - 2| = {worst:.2e} "
            "(tol 1e-10)")


def test_03_disk_steklov_oracle():
    start = time.perf_counter()
    prob = assemble(build_disk_mesh(128, 8, 1.0), A_ZERO, B_ONE, 3.0)
    nu1 = compute_nu1(prob).nu1
    elapsed = time.perf_counter() - start
    rel = abs(nu1 - 1.0)
    _report(3, rel <= 0.02 and elapsed < 30.0,
            f"polygonal unit disk (m=128, rings=8): nu1 = {nu1:.6f}, "
            f"rel err {rel:.2e} (tol 2e-2), runtime {elapsed:.2f}s (< 30s)")


def test_04_threshold_scaling_equality():
    mesh = build_interval_mesh(64, 1.0)
    prob3 = assemble(mesh, A_ONE, B_ZERO, 3.0)
    est3 = compute_nu1(prob3)
    rows3 = verify_threshold_scaling(prob3, est3, [1.0, 0.1, 0.01])
    ratios3 = [row.ratio for row in rows3[1:]]
    prob15 = assemble(mesh, A_ONE, B_ZERO, 1.5)
    est15 = compute_nu1(prob15)
    rows15 = verify_threshold_scaling(prob15, est15, [1.0, 10.0, 100.0])
    ratios15 = [row.ratio for row in rows15[1:]]
    ok = all(9.0 <= r <= 11.0 for r in ratios3) \
        and all(2.9 <= r <= 3.4 for r in ratios15) \
        and all(row.gap > 0 for row in rows3 + rows15)
    _report(4, ok, f"gap ratios p=3: {[f'{r:.3f}' for r in ratios3]} in [9,11]; "
                   f"p=1.5: {[f'{r:.3f}' for r in ratios15]} in [2.9,3.4]")


def test_05_spectrum_structure():
    expected = ["negative_not_eigenvalue", "zero_eigenvalue",
                "gap_not_eigenvalue", "gap_not_eigenvalue",
                "threshold_not_eigenvalue", "eigenvalue", "eigenvalue",
                "eigenvalue"]
    mesh = build_interval_mesh(64, 1.0)
    results = {}
    worst_residual = 0.0
    for p in (1.5, 3.0):
        prob = assemble(mesh, A_ONE, B_ZERO, p)
        nu1 = compute_nu1(prob).nu1
        grid = [-1.0, 0.0, 0.5 * nu1, 0.9 * nu1, nu1, 1.1 * nu1, 2.0 * nu1,
                10.0 * nu1]
        report = scan(prob, grid)
        results[p] = report.classifications()
        worst_residual = max(worst_residual,
                             max(r.residual_dual for r in report.rows
                                 if r.classification == "eigenvalue"))
    ok = results[1.5] == expected and results[3.0] == expected \
        and worst_residual <= 1e-6
    _report(5, ok, f"scan pattern matches for p in {{1.5, 3}}; max eigenvalue "
                   f"residual {worst_residual:.2e} (tol 1e-6)")


def test_06_p_independence_below_two():
    result = p_independence_check(build_interval_mesh(64, 1.0), A_ONE, B_ZERO,
                                  1.05, [1.3, 1.5, 1.8])
    ok = bool(result)
    _report(6, ok, f"lambda = 1.05 nu1 (nu1 = {result.nu1:.6f}, computed once) "
                   f"verified an eigenvalue for p in {{1.3, 1.5, 1.8}}")


def test_07_nehari_identities():
    prob = assemble(build_interval_mesh(64, 1.0), A_ONE, B_ZERO, 1.5)
    est = compute_nu1(prob)
    lam = 2.0 * est.nu1
    sub = prob.subspace
    rng = np.random.default_rng(20200405)
    worst = 0.0
    count = 0
    while count < 50:
        noise = sub.lift(rng.standard_normal(sub.reduced_dim))
        noise /= np.linalg.norm(noise)
        eta = 0.5
        v = None
        for _ in range(60):
            cand = est.minimizer + eta * noise
            den = float(cand @ (prob.Msum @ cand))
            if den > 0 and float(cand @ (prob.K @ cand)) < lam * den:
                v = cand
                break
            eta *= 0.5
        if v is None:
            continue
        count += 1
        pt = nehari_point(prob, lam, v)
        pairing = float(grad_I(prob, lam, pt.u) @ pt.u)
        scale = pt.t ** prob.p * pt.A + lam * pt.t ** 2 * pt.C
        worst = max(worst, abs(pairing) / scale)
        ival = functional_I(prob, lam, pt.u)
        ident = (1.0 / prob.p - 0.5) * p_dirichlet_integral(prob, pt.u)
        worst = max(worst, abs(ival - ident) / abs(ival))
        worst = max(worst, abs(nehari_point(prob, lam, pt.u).t - 1.0))
        rescaled = nehari_point(prob, lam, 3.0 * v).u
        worst = max(worst, np.abs(rescaled - pt.u).max() / np.abs(pt.u).max())
    _report(7, worst <= 1e-12,
            f"50 seeded Nehari points: worst identity defect {worst:.2e} "
            "(tol 1e-12; pairing, energy identity, idempotence, rescaling)")


def test_08_gradient_fd_convergence():
    mesh = build_interval_mesh(16, 1.0)
    rng = np.random.default_rng(20200405)
    ratios = {}
    for p in (1.5, 3.0, 4.0):
        prob = assemble(mesh, A_ONE, B_ZERO, p)
        xs = prob.mesh.nodes[:, 0]
        u = xs + 0.05 * np.cos(3.0 * xs)
        errs = {1e-4: 0.0, 1e-5: 0.0}
        for _ in range(10):
            phi = rng.standard_normal(prob.n)
            for h in errs:
                errs[h] = max(errs[h], gradient_fd_error(prob, 0.7, u, phi, h))
        ratios[p] = errs[1e-4] / errs[1e-5]
    ok = all(50.0 <= r <= 200.0 for r in ratios.values())
    _report(8, ok, "FD error ratio h=1e-4 vs 1e-5: "
            + ", ".join(f"p={p}: {r:.1f}" for p, r in ratios.items())
            + " (band [50, 200])")


def test_09_zero_eigenvalue_bitwise():
    prob = assemble(build_interval_mesh(64, 1.0), A_ONE, B_ZERO, 3.0)
    r = grad_I(prob, 0.0, np.ones(prob.n))
    ok = bool(np.all(r == 0.0)) \
        and residual_dual_norm(prob, 0.0, np.ones(prob.n)) == 0.0
    _report(9, ok, "grad_I(lambda=0, u=1) is the bitwise zero vector and its "
                   "dual residual is exactly 0")


def test_10_gap_certificate():
    prob = assemble(build_interval_mesh(64, 1.0), A_ONE, B_ZERO, 3.0)
    est = compute_nu1(prob)
    certified = gap_certificate(prob, 0.5 * est.nu1, sample_count=100)
    u = est.minimizer
    num = float(u @ (prob.K @ u))
    den = float(u @ (prob.Msum @ u))
    boundary_defect = abs(est.nu1 * den - num) / num
    ok = certified and boundary_defect <= 1e-12
    _report(10, ok, f"certificate at nu1/2 over 100 samples: {certified}; "
                    f"equality defect at nu1 with the minimizer {boundary_defect:.2e} "
                    "(tol 1e-12)")


def test_11_algebraic_invariants_everywhere():
    problems = [
        assemble(build_interval_mesh(64, 1.0), A_ONE, B_ZERO, 3.0),
        assemble(build_interval_mesh(32, 2.0), A_ZERO, B_ONE, 1.5),
        assemble(build_rectangle_mesh(5, 4, 1.0, 2.0),
                 WeightField.affine([0.2, 1.0, 0.5], "domain"), B_ONE, 4.0),
        assemble(build_disk_mesh(24, 3, 1.0), A_ONE,
                 WeightField.affine([1.0, 0.3, 0.0], "boundary"), 1.5),
    ]
    rng = np.random.default_rng(20200405)
    worst_c = worst_k = worst_dom = 0.0
    for prob in problems:
        ones = np.ones(prob.n)
        worst_c = max(worst_c, np.abs(prob.c - (prob.Ma @ ones + prob.Bb @ ones)).max()
                      / np.abs(prob.c).max())
        worst_k = max(worst_k, np.abs(prob.K @ ones).max()
                      / np.abs(prob.K).sum(axis=1).max())
        sub = prob.subspace
        for _ in range(100):
            u = sub.lift(rng.standard_normal(sub.reduced_dim))
            ut = mean_zero(prob.mesh, u)
            lhs = float(u @ (prob.Msum @ u))
            rhs = float(ut @ (prob.Msum @ ut))
            worst_dom = max(worst_dom, (lhs - rhs) / max(rhs, 1e-300))
    ok = worst_c <= 1e-13 and worst_k <= 1e-13 and worst_dom <= 1e-12
    _report(11, ok, f"on 4 assembled problems: c-identity {worst_c:.2e}, "
                    f"K*1 {worst_k:.2e} (tol 1e-13); quadratic domination "
                    f"defect {worst_dom:.2e} on 100 random constrained vectors")


def test_12_trace_inequality():
    from p2lab.assembly import (boundary_mass_matrix, dirichlet_matrix,
                                domain_mass_matrix)
    from p2lab.verification import trace_constant

    mesh = build_interval_mesh(32, 1.0)
    values = [trace_constant(mesh, e) for e in (0.1, 1.0, 10.0)]
    monotone = values[0] >= values[1] >= values[2] and all(v >= 0 for v in values)
    K = dirichlet_matrix(mesh)
    M1 = domain_mass_matrix(mesh)
    T = boundary_mass_matrix(mesh)
    rng = np.random.default_rng(20200405)
    eps, c = 1.0, values[1]
    worst = -np.inf
    for _ in range(1000):
        u = rng.standard_normal(mesh.n_nodes)
        lhs = float(u @ (T @ u))
        rhs = eps * float(u @ (K @ u)) + c * float(u @ (M1 @ u))
        worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    ok = monotone and worst <= 1e-10
    _report(12, ok, f"c(eps) = {[f'{v:.3f}' for v in values]} nonnegative and "
                    f"non-increasing; inequality defect {worst:.2e} on 1000 "
                    "random vectors")


def test_13_reproducibility(tmp_path):
    config = {
        "version": 1,
        "mesh": {"generator": "interval", "n": 64, "length": 1.0},
        "weight_a": {"kind": "constant", "value": 1.0},
        "weight_b": {"kind": "constant", "value": 0.0},
        "p": 1.5,
        "grid": {"values": [-1.0, 0.0], "nu1_factors": [0.5, 0.9, 1.0, 1.1, 2.0, 10.0]},
    }
    cfg_path = tmp_path / "scan.json"
    cfg_path.write_text(json.dumps(config))
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert main(["scan", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["scan", "--config", str(cfg_path), "--out", str(out2)]) == 0
    csv1 = (tmp_path / "r1.csv").read_bytes()
    csv2 = (tmp_path / "r2.csv").read_bytes()
    ok = csv1 == csv2 and len(csv1) > 0
    _report(13, ok, f"cmd_scan run twice from one config: CSV byte-identical "
                    f"({len(csv1)} bytes)")
