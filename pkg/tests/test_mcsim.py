import math

import numpy as np
import pytest
from scipy import stats

from outage_lab.core import ChannelSpec, PowerSplit
from outage_lab.mcsim import (
    CHUNK,
    RandomStream,
    channel_logdets,
    chunk_sizes,
    mc_outage_direct,
    mc_outage_timo_reduced,
    sample_channel,
)
from outage_lab.timo import outage_timo

from .conftest import LN3

ENDPOINT = 1.0 - 5.0 * math.exp(-4.0)

# r = 2 tuples (q1, q2, R) spread over the low, middle and high outage range
AGREEMENT_TUPLES = [
    (0.25, 0.25, LN3),
    (0.075, 0.425, LN3),
    (0.6, 1.4, 1.5),
    (1.0, 0.3, 0.8),
    (2.5, 2.5, 2.2),
]


class TestRandomStream:
    def test_replays(self):
        a = RandomStream(7, 3).generator().standard_normal(5)
        b = RandomStream(7, 3).generator().standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RandomStream(7, 0).generator().standard_normal(5)
        b = RandomStream(7, 1).generator().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_streams_uncorrelated(self):
        a = RandomStream(11, 0).generator().standard_normal(200_000)
        b = RandomStream(11, 1).generator().standard_normal(200_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01

    @pytest.mark.parametrize("seed", [-1, 1 << 64, 1.5])
    def test_rejects_out_of_range(self, seed):
        with pytest.raises(ValueError):
            RandomStream(seed)

    def test_metadata_names_generator(self):
        meta = RandomStream(5, 2).describe()
        assert meta["seed"] == 5 and meta["stream_id"] == 2
        assert "PCG64" in meta["rng"]


def test_chunking_covers_n():
    sizes = list(chunk_sizes(2 * CHUNK + 5))
    assert sizes == [CHUNK, CHUNK, 5]
    with pytest.raises(ValueError):
        list(chunk_sizes(0))


@pytest.fixture(scope="module")
def draws():
    return sample_channel(2, 2, RandomStream(2024), size=250_000)


class TestSampleChannel:
    def test_shape(self):
        assert sample_channel(3, 2, RandomStream(0)).shape == (3, 2)
        assert sample_channel(3, 2, RandomStream(0), size=4).shape == (4, 3, 2)

    def test_unit_second_moment(self, draws):
        # 10^6 entries in total
        assert np.mean(np.abs(draws) ** 2) == pytest.approx(1.0, abs=0.005)

    def test_zero_mean(self, draws):
        assert abs(draws.real.mean()) < 0.005
        assert abs(draws.imag.mean()) < 0.005

    def test_component_variance(self, draws):
        assert draws.real.var() == pytest.approx(0.5, abs=0.005)
        assert draws.imag.var() == pytest.approx(0.5, abs=0.005)
        assert abs(np.mean(draws.real * draws.imag)) < 0.005

    def test_column_norm_is_gamma(self):
        h = sample_channel(2, 1, RandomStream(99), size=20_000)[:, :, 0]
        norms = np.sum(np.abs(h) ** 2, axis=1)
        assert stats.kstest(norms, stats.gamma(2.0).cdf).pvalue > 0.01

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_angle_factor(self, r):
        H = sample_channel(r, 2, RandomStream(31, r), size=100_000)
        h1, h2 = H[:, :, 0], H[:, :, 1]
        n1 = np.sum(np.abs(h1) ** 2, axis=1)
        n2 = np.sum(np.abs(h2) ** 2, axis=1)
        cos2 = np.abs(np.sum(h1.conj() * h2, axis=1)) ** 2 / (n1 * n2)
        if r == 2:
            assert abs(np.corrcoef(n1, cos2)[0, 1]) < 0.01
        assert stats.kstest(cos2, stats.beta(1, r - 1).cdf).pvalue > 0.01

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_channel(0, 2, RandomStream(0))


class TestLogdets:
    def test_matches_slogdet(self):
        H = sample_channel(3, 2, RandomStream(4), size=50)
        qs = np.array([[0.3, 0.7], [1.0, 0.0]])
        for backend in ("numba", "numpy"):
            got = channel_logdets(H, qs, backend)
            for j, q in enumerate(qs):
                want = [np.linalg.slogdet(np.eye(3) + h @ np.diag(q) @ h.conj().T)[1] for h in H]
                np.testing.assert_allclose(got[j], want, rtol=1e-12, atol=1e-13)

    def test_backends_agree(self):
        H = sample_channel(4, 3, RandomStream(8), size=300)
        qs = np.array([[0.2, 0.3, 0.5]])
        np.testing.assert_allclose(channel_logdets(H, qs, "numba"), channel_logdets(H, qs, "numpy"),
                                   rtol=1e-13, atol=1e-14)

    def test_failure_marked_nan(self):
        # a negative power makes I + H Q H* indefinite for large enough H
        H = np.full((1, 2, 2), 10.0 + 0j)
        for backend in ("numba", "numpy"):
            ld = channel_logdets(H, np.array([[-1.0, 0.0]]), backend)
            assert np.isnan(ld[0, 0])


class TestDirect:
    def test_zero_power(self):
        spec = ChannelSpec(2, 2, 0.3, 1.0)
        est = mc_outage_direct([0.0, 0.0], spec, 1000, RandomStream(1))
        assert est.p_hat == 1.0 and est.n_errors == 0

    def test_endpoint(self, counter_spec):
        est = mc_outage_direct([0.5, 0.0], counter_spec, 10**6, RandomStream(2))
        assert abs(est.p_hat - ENDPOINT) <= 3 * est.stderr

    def test_deterministic(self, counter_spec):
        a = mc_outage_direct([0.2, 0.3], counter_spec, 70_000, RandomStream(3, 1))
        b = mc_outage_direct([0.2, 0.3], counter_spec, 70_000, RandomStream(3, 1))
        assert a == b

    def test_length_must_match(self, counter_spec):
        with pytest.raises(ValueError):
            mc_outage_direct([0.5], counter_spec, 10)

    def test_metadata(self, counter_spec):
        est = mc_outage_direct([0.2, 0.3], counter_spec, 100, RandomStream(9, 4))
        assert est.method == "mc_direct"
        assert est.meta["seed"] == 9 and est.meta["stream_id"] == 4

    def test_more_antennas(self):
        spec = ChannelSpec(3, 2, 0.8, 0.9)
        est = mc_outage_direct([0.3, 0.3, 0.3], spec, 20_000, RandomStream(5))
        assert 0.0 < est.p_hat < 1.0
        assert est.stderr <= 0.5 / math.sqrt(est.n_samples) + 1e-12


class TestReduced:
    def test_endpoint(self, counter_spec):
        est = mc_outage_timo_reduced(PowerSplit(0.5, 0.0), counter_spec, 10**6, RandomStream(4))
        assert abs(est.p_hat - ENDPOINT) <= 3 * est.stderr

    def test_huge_rate(self):
        spec = ChannelSpec(2, 2, 50.0, 0.5)
        assert mc_outage_timo_reduced(PowerSplit(0.25, 0.25), spec, 10_000, RandomStream(1)).p_hat == 1.0

    def test_deterministic(self, counter_spec):
        a = mc_outage_timo_reduced(PowerSplit(0.1, 0.4), counter_spec, 100_000, RandomStream(6))
        b = mc_outage_timo_reduced(PowerSplit(0.1, 0.4), counter_spec, 100_000, RandomStream(6))
        assert a == b

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_backends_identical(self, counter_spec, backend):
        ref = mc_outage_timo_reduced(PowerSplit(0.1, 0.4), counter_spec, 50_000, RandomStream(6), backend="numpy")
        got = mc_outage_timo_reduced(PowerSplit(0.1, 0.4), counter_spec, 50_000, RandomStream(6), backend=backend)
        assert got == ref

    def test_single_receiver(self):
        spec = ChannelSpec(2, 1, 0.7, 1.5)
        split = PowerSplit(0.5, 1.0)
        est = mc_outage_timo_reduced(split, spec, 200_000, RandomStream(8))
        assert abs(est.p_hat - outage_timo(split, spec).p_hat) <= 3 * est.stderr


@pytest.mark.parametrize("q1,q2,R", AGREEMENT_TUPLES)
def test_estimators_agree_with_quadrature(q1, q2, R):
    spec = ChannelSpec(2, 2, R, q1 + q2)
    split = PowerSplit(q1, q2)
    exact = outage_timo(split, spec).p_hat
    red = mc_outage_timo_reduced(split, spec, 10**6, RandomStream(100, 0))
    direct = mc_outage_direct([q1, q2], spec, 10**6, RandomStream(100, 1))
    assert abs(red.p_hat - exact) <= 3 * red.stderr
    assert abs(direct.p_hat - exact) <= 3 * direct.stderr
    assert abs(red.p_hat - direct.p_hat) <= 3 * math.hypot(red.stderr, direct.stderr)
