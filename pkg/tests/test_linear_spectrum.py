import math

import numpy as np
import pytest

from p2lab.assembly import WeightField, assemble, rayleigh_quadratic
from p2lab.errors import InvalidArgumentError, InvalidDiscretizationError
from p2lab.linear_spectrum import compute_nu1, default_t_list, verify_threshold_scaling
from p2lab.mesh import Mesh, build_disk_mesh, build_interval_mesh


class TestComputeNu1:
    def test_neumann_interval_oracle(self, a_one, b_zero):
        # first nonzero eigenvalue of -u'' = nu u with natural boundary: pi^2
        prob = assemble(build_interval_mesh(256, 1.0), a_one, b_zero, 3.0)
        est = compute_nu1(prob)
        assert abs(est.nu1 - math.pi ** 2) / math.pi ** 2 <= 1e-3
        assert est.reduced_dim == 256

    @pytest.mark.parametrize("n", [1, 8, 64])
    def test_boundary_weight_exact_two(self, n, a_zero, b_one):
        # the continuum minimizer 1 - 2x is linear, hence in every P1 space
        prob = assemble(build_interval_mesh(n, 1.0), a_zero, b_one, 3.0)
        assert abs(compute_nu1(prob).nu1 - 2.0) <= 1e-10

    def test_disk_steklov_oracle(self, a_zero, b_one):
        prob = assemble(build_disk_mesh(128, 8, 1.0), a_zero, b_one, 3.0)
        assert abs(compute_nu1(prob).nu1 - 1.0) <= 0.02

    def test_minimizer_invariants(self, neumann_p3, neumann_p3_threshold):
        est = neumann_p3_threshold
        u = est.minimizer
        assert est.nu1 > 0
        assert abs(float(neumann_p3.c @ u)) <= 1e-12 * np.linalg.norm(neumann_p3.c) \
            * np.linalg.norm(u)
        assert abs(float(u @ (neumann_p3.Msum @ u)) - 1.0) <= 1e-12
        assert u[np.argmax(np.abs(u))] > 0
        rq = rayleigh_quadratic(neumann_p3, u)
        assert abs(rq - est.nu1) <= 1e-12 * est.nu1
        assert est.pencil_residual <= 1e-10

    def test_weight_scaling(self, interval64, a_one, b_zero):
        base = compute_nu1(assemble(interval64, a_one, b_zero, 3.0)).nu1
        doubled = compute_nu1(assemble(interval64, a_one.scaled(2.0),
                                       b_zero.scaled(2.0), 3.0)).nu1
        assert abs(2.0 * doubled - base) <= 1e-12 * base

    def test_refinement_monotone(self, a_one, b_zero):
        values = [compute_nu1(assemble(build_interval_mesh(n, 1.0), a_one, b_zero, 3.0)).nu1
                  for n in (8, 16, 32, 64)]
        for coarse, fine in zip(values, values[1:]):
            assert fine <= coarse + 1e-12 * coarse

    def test_p_has_no_effect_on_nu1(self, interval64, a_one, b_one):
        values = [compute_nu1(assemble(interval64, a_one, b_one, p)).nu1
                  for p in (1.3, 1.5, 3.0, 4.0)]
        assert max(values) - min(values) <= 1e-12 * values[0]

    def test_power_iteration_matches_dense(self, a_zero, a_one, b_one, b_zero):
        # the two eigensolver paths agree, including with a multiple top
        # eigenvalue (the disk's first Steklov pair is double)
        from p2lab.mesh import build_disk_mesh

        for mesh, a, b in [(build_interval_mesh(48, 1.0), a_one, b_zero),
                           (build_disk_mesh(24, 3, 1.0), a_zero, b_one)]:
            prob = assemble(mesh, a, b, 3.0)
            dense = compute_nu1(prob, method="dense")
            power = compute_nu1(prob, method="power")
            assert abs(dense.nu1 - power.nu1) <= 1e-10 * dense.nu1
            rq = rayleigh_quadratic(prob, power.minimizer)
            assert abs(rq - power.nu1) <= 1e-11 * power.nu1

    def test_unknown_method_rejected(self, neumann_p3):
        with pytest.raises(InvalidArgumentError):
            compute_nu1(neumann_p3, method="magic")

    def test_disconnected_mesh_rejected(self, a_one, b_zero):
        # two disjoint intervals: constants on each component make the
        # reduced stiffness singular
        nodes = np.array([[0.0], [1.0], [2.0], [3.0]])
        elements = np.array([[0, 1], [2, 3]])
        facets = np.array([[0], [3]])
        owners = np.array([0, 1])
        mesh = Mesh(1, nodes, elements, facets, owners).validate()
        prob = assemble(mesh, a_one, b_zero, 3.0)
        with pytest.raises(InvalidDiscretizationError):
            compute_nu1(prob)


class TestThresholdScaling:
    def test_gap_ratio_p3(self, neumann_p3, neumann_p3_threshold):
        rows = verify_threshold_scaling(neumann_p3, neumann_p3_threshold,
                                        [1.0, 0.1, 0.01])
        for row in rows[1:]:
            assert 9.0 <= row.ratio <= 11.0
        for row in rows:
            assert row.value >= neumann_p3_threshold.nu1 * (1.0 - 1e-12)

    def test_gap_ratio_p15(self, neumann_p15, neumann_p15_threshold):
        rows = verify_threshold_scaling(neumann_p15, neumann_p15_threshold,
                                        [1.0, 10.0, 100.0])
        for row in rows[1:]:
            assert 2.9 <= row.ratio <= 3.4

    def test_values_decrease_toward_nu1(self, neumann_p3, neumann_p3_threshold):
        rows = verify_threshold_scaling(neumann_p3, neumann_p3_threshold,
                                        [1.0, 0.1, 0.01, 0.001])
        gaps = [row.gap for row in rows]
        assert all(g1 > g2 > 0 for g1, g2 in zip(gaps, gaps[1:]))

    def test_nonpositive_t_rejected(self, neumann_p3, neumann_p3_threshold):
        with pytest.raises(InvalidArgumentError):
            verify_threshold_scaling(neumann_p3, neumann_p3_threshold, [1.0, 0.0])

    def test_default_t_list(self):
        assert default_t_list(3.0) == [1.0, 0.1, 0.01]
        assert default_t_list(1.5) == [1.0, 10.0, 100.0]
