import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from outage_lab.core import ChannelSpec, PowerSplit
from outage_lab.specfun import QuadratureSpec
from outage_lab.timo import (
    boundary_partials_first,
    boundary_partials_second,
    derivative_report,
    outage_timo,
    outage_value,
    partial_d2f_dq1dq1,
    partial_d2f_dq1dq2,
    partial_d2f_dq2dq2,
    partial_df_dq1,
    partial_df_dq2,
    total_first_derivative,
    total_second_derivative,
)

from .conftest import LN3

E4 = math.exp(-4.0)
FD_QUAD = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=4000)


def f(q1, q2, spec):
    return outage_timo(PowerSplit(q1, q2), spec, FD_QUAD).p_hat


def fd_dq2(q1, q2, spec, h=1e-4):
    return (f(q1, q2 + h, spec) - f(q1, q2 - h, spec)) / (2 * h)


def fd_dq1(q1, q2, spec, h=1e-4):
    return (f(q1 + h, q2, spec) - f(q1 - h, q2, spec)) / (2 * h)


def fd_d2q2(q1, q2, spec, h=1e-3):
    return (f(q1, q2 + h, spec) - 2 * f(q1, q2, spec) + f(q1, q2 - h, spec)) / h**2


def fd_d2q1(q1, q2, spec, h=1e-3):
    return (f(q1 + h, q2, spec) - 2 * f(q1, q2, spec) + f(q1 - h, q2, spec)) / h**2


def fd_cross(q1, q2, spec, h=1e-3):
    return (
        f(q1 + h, q2 + h, spec) - f(q1 + h, q2 - h, spec) - f(q1 - h, q2 + h, spec) + f(q1 - h, q2 - h, spec)
    ) / (4 * h * h)


def fd_total(q1, spec, h1=1e-4, h2=1e-3):
    P = spec.power_P
    g = lambda x: outage_value(x, spec, FD_QUAD)  # noqa: E731
    return (g(q1 + h1) - g(q1 - h1)) / (2 * h1), (g(q1 + h2) - 2 * g(q1) + g(q1 - h2)) / h2**2


class TestFirstPartial:
    def test_symmetric_point(self, counter_spec):
        s = PowerSplit(0.25, 0.25)
        assert partial_df_dq2(s, counter_spec) == pytest.approx(partial_df_dq1(s, counter_spec), abs=1e-10)

    def test_finite_difference(self, counter_spec):
        got = partial_df_dq2(PowerSplit(0.2, 0.3), counter_spec)
        assert got == pytest.approx(fd_dq2(0.2, 0.3, counter_spec), abs=1e-5)

    def test_negative(self, counter_spec):
        assert partial_df_dq2(PowerSplit(0.3, 0.2), counter_spec) < 0

    @given(st.floats(0.02, 0.48), st.sampled_from([1, 2, 3]), st.floats(0.3, 3.0))
    def test_never_positive(self, q1, r, R):
        spec = ChannelSpec(2, r, R, 0.5)
        assert partial_df_dq2(PowerSplit(q1, 0.5 - q1), spec) <= 1e-10

    @pytest.mark.parametrize("split", [PowerSplit(0.0, 0.5), PowerSplit(0.5, 0.0)])
    def test_boundary_rejected(self, counter_spec, split):
        for fn in (partial_df_dq2, partial_df_dq1, partial_d2f_dq2dq2, partial_d2f_dq1dq2):
            with pytest.raises(ValueError):
                fn(split, counter_spec)


class TestSecondPartials:
    def test_d2q2_finite_difference(self, counter_spec):
        got = partial_d2f_dq2dq2(PowerSplit(0.25, 0.25), counter_spec)
        assert got == pytest.approx(fd_d2q2(0.25, 0.25, counter_spec), abs=1e-4)

    def test_d2q2_swap(self, counter_spec):
        a = partial_d2f_dq2dq2(PowerSplit(0.2, 0.3), counter_spec)
        b = partial_d2f_dq1dq1(PowerSplit(0.3, 0.2), counter_spec)
        assert a == pytest.approx(b, abs=1e-10)

    def test_mixed_finite_difference(self, counter_spec):
        got = partial_d2f_dq1dq2(PowerSplit(0.2, 0.3), counter_spec)
        assert got == pytest.approx(fd_cross(0.2, 0.3, counter_spec), abs=1e-4)

    def test_mixed_swap(self, counter_spec):
        a = partial_d2f_dq1dq2(PowerSplit(0.2, 0.3), counter_spec)
        b = partial_d2f_dq1dq2(PowerSplit(0.3, 0.2), counter_spec)
        assert a == pytest.approx(b, abs=1e-9)


def _random_interior_points(n=5, seed=20240601):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(n):
        r = int(rng.integers(1, 4))
        R = float(rng.uniform(0.4, 2.5))
        q1, q2 = (float(x) for x in rng.uniform(0.1, 1.5, 2))
        pts.append((r, R, q1, q2))
    return pts


@pytest.mark.parametrize("r,R,q1,q2", _random_interior_points())
def test_all_partials_match_finite_differences(r, R, q1, q2):
    spec = ChannelSpec(2, r, R, q1 + q2)
    s = PowerSplit(q1, q2)
    assert partial_df_dq2(s, spec) == pytest.approx(fd_dq2(q1, q2, spec), abs=1e-4)
    assert partial_df_dq1(s, spec) == pytest.approx(fd_dq1(q1, q2, spec), abs=1e-4)
    assert partial_d2f_dq2dq2(s, spec) == pytest.approx(fd_d2q2(q1, q2, spec), abs=1e-4)
    assert partial_d2f_dq1dq1(s, spec) == pytest.approx(fd_d2q1(q1, q2, spec), abs=1e-4)
    assert partial_d2f_dq1dq2(s, spec) == pytest.approx(fd_cross(q1, q2, spec), abs=1e-4)


class TestBoundaryClosedForms:
    def test_first_examples(self, counter_spec):
        at_q1_zero, at_q2_zero = boundary_partials_first(counter_spec)
        assert at_q1_zero == pytest.approx(-32 * E4, rel=1e-13)
        assert at_q2_zero == pytest.approx(-32 * E4, rel=1e-13)

    def test_second_examples(self, counter_spec):
        b = boundary_partials_second(counter_spec)
        assert b.d2q2_at_q1_zero == pytest.approx(-64 * E4, rel=1e-13)
        assert b.mixed_at_q1_zero == b.mixed_at_q2_zero

    @pytest.mark.parametrize("r,R,P", [(2, LN3, 0.5), (3, 1.2, 0.8), (1, 0.7, 1.5), (4, 2.0, 2.0)])
    def test_limits_of_interior_partials(self, r, R, P):
        # interior partials approach the boundary closed forms linearly in the
        # distance; a two-point Richardson step removes the linear term
        spec = ChannelSpec(2, r, R, P)
        at_q1_zero, at_q2_zero = boundary_partials_first(spec)
        b = boundary_partials_second(spec)

        def near(eps):
            n0 = PowerSplit(eps, P - eps)
            nP = PowerSplit(P - eps, eps)
            return np.array([
                partial_df_dq2(n0, spec), partial_df_dq2(nP, spec),
                partial_d2f_dq2dq2(n0, spec), partial_d2f_dq2dq2(nP, spec),
                partial_d2f_dq1dq2(n0, spec), partial_d2f_dq1dq2(nP, spec),
            ])

        eps = 1e-3 * P
        got = 2 * near(eps) - near(2 * eps)
        want = [at_q1_zero, at_q2_zero, b.d2q2_at_q1_zero, b.d2q2_at_q2_zero,
                b.mixed_at_q1_zero, b.mixed_at_q2_zero]
        np.testing.assert_allclose(got, want, rtol=5e-3, atol=1e-8)


class TestTotalDerivatives:
    def test_first_vanishes_at_center(self, counter_spec):
        assert total_first_derivative(0.25, counter_spec) == 0.0

    def test_first_vanishes_at_zero(self, counter_spec):
        assert abs(total_first_derivative(0.0, counter_spec)) <= 1e-12

    def test_first_finite_difference(self, counter_spec):
        assert total_first_derivative(0.1, counter_spec) == pytest.approx(fd_total(0.1, counter_spec)[0], abs=1e-5)

    def test_second_at_zero(self, counter_spec):
        assert total_second_derivative(0.0, counter_spec) == pytest.approx(-8 * E4, abs=1e-12)

    def test_second_at_center(self, counter_spec):
        assert total_second_derivative(0.25, counter_spec) == pytest.approx(-0.1014, abs=5e-4)

    def test_second_at_center_reference(self, counter_spec):
        # 20-digit mpmath quadrature, central difference with h = 1e-4
        assert total_second_derivative(0.25, counter_spec) == pytest.approx(-0.1014335385440314, abs=1e-7)

    def test_second_finite_difference(self, counter_spec):
        assert total_second_derivative(0.1, counter_spec) == pytest.approx(fd_total(0.1, counter_spec)[1], abs=1e-4)

    def test_mirror_end(self, counter_spec):
        assert total_first_derivative(0.5, counter_spec) == -total_first_derivative(0.0, counter_spec)
        assert total_second_derivative(0.5, counter_spec) == total_second_derivative(0.0, counter_spec)

    def test_one_sided_difference_at_zero(self):
        spec = ChannelSpec(2, 3, 1.2, 0.8)
        h = 1e-3
        g = [outage_value(i * h, spec, FD_QUAD) for i in range(4)]
        d1 = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * h)
        assert total_first_derivative(0.0, spec) == pytest.approx(d1, abs=1e-4)

    def test_out_of_range(self, counter_spec):
        with pytest.raises(ValueError):
            total_first_derivative(0.6, counter_spec)
        with pytest.raises(ValueError):
            total_second_derivative(-0.1, counter_spec)


def test_report_collects_values(counter_spec):
    rep = derivative_report(counter_spec)
    assert rep.d1_at_half == 0.0
    assert rep.d1_at_zero == pytest.approx(0.0, abs=1e-12)
    assert rep.d2_at_zero == pytest.approx(-8 * E4, abs=1e-12)
    assert -0.1019 <= rep.d2_at_half <= -0.1009
    assert len(rep.partials) >= 6
    p = rep.partials
    assert rep.d2_at_half == pytest.approx(p["half.d2f_dq1dq1"] + p["half.d2f_dq2dq2"] - 2 * p["half.d2f_dq1dq2"])
