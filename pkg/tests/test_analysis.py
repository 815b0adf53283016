import numpy as np
import pytest

from isotruss import analysis, controller
from isotruss.analysis import Trace, polar_area, rmse
from isotruss.errors import EmptyTrace


class TestManipIndex:
    def test_identity_jacobian(self):
        assert analysis._manip_index(np.eye(2)) == pytest.approx(1.0)

    def test_rectangular_example(self):
        Jt = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        assert analysis._manip_index(Jt) == pytest.approx(np.sqrt(2.0))
        Jd = Jt.copy()
        Jd[:, 0] = 0.0
        assert analysis._manip_index(Jd) == pytest.approx(1.0)

    def test_full_report_on_testbed(self, topo, x0):
        rep = analysis.manipulability(topo, x0, 2)
        assert rep.M > 0
        assert rep.condition_number >= 1.0
        assert rep.ellipse_axes[0] >= rep.ellipse_axes[1] > 0
        assert np.all(rep.per_roller_degraded <= rep.M + 1e-12)

    def test_failure_set_zeroes_columns(self, topo, x0):
        nominal = analysis.manipulability(topo, x0, 2)
        degraded = analysis.manipulability(topo, x0, 2, failure_set={0})
        assert degraded.M == pytest.approx(nominal.per_roller_degraded[0])
        assert degraded.M <= nominal.M


class TestPolarArea:
    def test_circle(self):
        angles = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        r = 2.0
        assert polar_area(angles, np.full(720, r)) == pytest.approx(
            np.pi * r**2, rel=1e-4
        )

    def test_unsorted_angles(self, rng):
        angles = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        radii = 1.0 + 0.1 * np.cos(angles)
        perm = rng.permutation(64)
        assert polar_area(angles[perm], radii[perm]) == pytest.approx(
            polar_area(angles, radii)
        )


class TestRmse:
    def test_identical_traces(self):
        t = np.linspace(0, 5, 11)
        pts = np.stack([np.cos(t), np.sin(t)], axis=1)
        tr = Trace(t, pts)
        assert rmse(tr, tr) == 0.0

    def test_constant_offset(self):
        t = np.linspace(0, 5, 11)
        a = Trace(t, np.zeros((11, 2)))
        b = Trace(t, np.tile([0.03, 0.04], (11, 1)))
        assert rmse(a, b) == pytest.approx(0.05)

    def test_symmetry_with_different_grids(self):
        ta = np.linspace(0, 4, 9)
        tb = np.linspace(0.5, 4.5, 17)
        a = Trace(ta, np.stack([ta, ta**2 / 10], axis=1))
        b = Trace(tb, np.stack([tb * 0.9, tb / 3], axis=1))
        assert rmse(a, b) == pytest.approx(rmse(b, a))

    def test_no_overlap_raises(self):
        a = Trace([0.0, 1.0], np.zeros((2, 2)))
        b = Trace([2.0, 3.0], np.zeros((2, 2)))
        with pytest.raises(EmptyTrace):
            rmse(a, b)

    def test_empty_raises(self):
        a = Trace(np.zeros(0), np.zeros((0, 2)))
        b = Trace([0.0], np.zeros((1, 2)))
        with pytest.raises(EmptyTrace):
            rmse(a, b)


@pytest.fixture(scope="module")
def sweep_setup():
    from isotruss.truss import triforce
    from isotruss.barrier import BarrierParams

    topo, x0 = triforce(1.0)
    spec = controller.ControlSpec(
        target_vertex=2,
        goal_position=x0[4:6],
        barrier=BarrierParams(sigma_min=0.05),
    )
    return topo, x0, spec


class TestWorkspaceSweeps:
    N_RAYS = 8

    def test_polygon_basics(self, sweep_setup):
        topo, x0, spec = sweep_setup
        poly = analysis.workspace(topo, x0, spec, n_rays=self.N_RAYS, mode="hard")
        assert len(poly.radii) == self.N_RAYS
        assert np.all(poly.radii >= 0)
        assert poly.area > 0
        csv = poly.to_csv()
        assert csv.splitlines()[0] == "angle_rad,radius_m"
        assert len(csv.splitlines()) == self.N_RAYS + 1

    def test_degradation_nesting_and_retention(self, sweep_setup):
        topo, x0, spec = sweep_setup
        rep = analysis.workspace_degradation(
            topo, x0, spec, n_rays=self.N_RAYS, r_max=2.0
        )
        for poly in rep.per_failure.values():
            assert np.all(poly.radii <= rep.nominal.radii + 1e-12)
        assert all(0 < r <= 1.0 for r in rep.retention.values())

    def test_greedy_order_properties(self, sweep_setup):
        topo, x0, spec = sweep_setup
        rep = analysis.greedy_failure_order(topo, x0, spec, n_rays=self.N_RAYS, r_max=2.0)
        assert sorted(rep.order) == list(range(topo.roller_count))
        for a, b in zip(rep.areas, rep.areas[1:]):
            assert b <= a + 1e-9
        assert rep.areas[0] <= rep.nominal_area + 1e-9


class TestDtcbfComparison:
    def test_dominance_and_ratio(self, sweep_setup):
        topo, x0, spec = sweep_setup
        from dataclasses import replace
        from isotruss.barrier import BarrierParams

        cmp_spec = replace(spec, barrier=BarrierParams(sigma_min=0.005))
        rep = analysis.dtcbf_workspace_comparison(topo, x0, cmp_spec, n_rays=6)
        assert np.all(rep.dtcbf.radii >= rep.hard.radii - 1e-12)
        assert rep.ratio >= 1.0
