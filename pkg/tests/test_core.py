import math

import numpy as np
import pytest

from outage_lab._accel import BACKENDS, default_backend, resolve_backend
from outage_lab.core import ChannelSpec, OutageEstimate, PowerSplit, as_power_vector


class TestChannelSpec:
    def test_derived_threshold(self):
        spec = ChannelSpec(2, 2, math.log(3.0), 0.5)
        assert spec.threshold == pytest.approx(3.0)
        assert spec.u == pytest.approx(2.0)

    def test_small_rate_keeps_precision(self):
        assert ChannelSpec(2, 1, 1e-12, 1.0).u == pytest.approx(1e-12, rel=1e-10)

    @pytest.mark.parametrize(
        "args",
        [(0, 2, 1.0, 1.0), (2, 0, 1.0, 1.0), (2, 2, 0.0, 1.0), (2, 2, 1.0, -1.0),
         (2, 2, math.inf, 1.0), (2, 2, 1.0, math.nan), (2.5, 2, 1.0, 1.0)],
    )
    def test_rejects_bad_values(self, args):
        with pytest.raises(ValueError):
            ChannelSpec(*args)

    def test_timo_guard(self):
        with pytest.raises(ValueError, match="t = 2"):
            ChannelSpec(3, 2, 1.0, 1.0).require_timo()


class TestPowerSplit:
    def test_on_line(self):
        s = PowerSplit.on_line(0.1, 0.5)
        assert (s.q1, s.q2) == (0.1, 0.4)
        assert s.swapped() == PowerSplit(0.4, 0.1)

    def test_on_line_range(self):
        with pytest.raises(ValueError):
            PowerSplit.on_line(0.6, 0.5)

    def test_negative_power(self):
        with pytest.raises(ValueError):
            PowerSplit(-0.1, 0.2)

    def test_trace_check(self):
        spec = ChannelSpec(2, 2, 1.0, 0.5)
        PowerSplit(0.2, 0.3).check(spec)
        with pytest.raises(ValueError):
            PowerSplit(0.2, 0.31).check(spec)


class TestOutageEstimate:
    def test_from_counts(self):
        est = OutageEstimate.from_counts(25, 100, "mc_direct")
        assert est.p_hat == 0.25
        assert est.stderr == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
        assert est.value == est.p_hat

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            OutageEstimate(0.5, 0.1, 10, "bogus")

    @pytest.mark.parametrize("hits,n", [(0, 1), (1, 1), (7, 13), (500, 1000), (1, 10**6)])
    def test_binomial_bound(self, hits, n):
        est = OutageEstimate.from_counts(hits, n, "mc_reduced")
        assert 0.0 <= est.p_hat <= 1.0
        assert est.stderr <= 0.5 / math.sqrt(n) + 1e-12


def test_power_vector_validation():
    assert as_power_vector([0.1, 0.2], 0.3).tolist() == [0.1, 0.2]
    with pytest.raises(ValueError):
        as_power_vector([0.1, -0.2])
    with pytest.raises(ValueError):
        as_power_vector([0.1, 0.2], 0.4)
    with pytest.raises(ValueError):
        as_power_vector(np.zeros((2, 2)))


class TestBackend:
    def test_env_selection(self, monkeypatch):
        monkeypatch.setenv("OUTAGE_LAB_BACKEND", "numpy")
        assert default_backend() == "numpy"
        monkeypatch.setenv("OUTAGE_LAB_BACKEND", " NUMBA ")
        assert default_backend() == "numba"

    def test_env_rejects_unknown(self, monkeypatch):
        monkeypatch.setenv("OUTAGE_LAB_BACKEND", "cuda")
        with pytest.raises(ValueError):
            default_backend()

    def test_explicit_override(self):
        assert resolve_backend("numpy") == "numpy"
        assert set(BACKENDS) == {"numba", "numpy"}
        with pytest.raises(ValueError):
            resolve_backend("fortran")
