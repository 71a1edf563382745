import numpy as np
import pytest

from cransim import cellgeom, channel
from cransim.errors import DomainError
from cransim.units import dbm_to_watts, watts_to_dbm


@pytest.fixture(scope="module")
def small_drop():
    params = cellgeom.PropagationParams()
    topo = cellgeom.build_layout(21, 3, 1, params)
    return topo, params, channel.build_cluster(topo, params)


def test_realization_determinism(small_drop):
    topo, params, cluster = small_drop
    c1 = channel.realize_channel(cluster, 4, np.random.default_rng(99))
    c2 = channel.realize_channel(cluster, 4, np.random.default_rng(99))
    assert np.array_equal(c1.h_ul, c2.h_ul)
    assert np.array_equal(c1.h_dl, c2.h_dl)
    assert np.array_equal(c1.sigma2_z_ul, c2.sigma2_z_ul)


def test_slots_share_large_scale_but_not_fades(small_drop):
    topo, params, cluster = small_drop
    c1 = channel.realize_channel(cluster, 0, np.random.default_rng(0))
    c2 = channel.realize_channel(cluster, 1, np.random.default_rng(1))
    assert not np.allclose(c1.h_ul, c2.h_ul)
    assert np.array_equal(c1.sigma2_z_dl, c2.sigma2_z_dl)  # drop-level quantity


def test_fade_power_averages_to_link_gain(small_drop):
    topo, params, cluster = small_drop
    n_slots = 8000
    acc = np.zeros_like(cluster.gain)
    for t in range(n_slots):
        c = channel.realize_channel(cluster, t, np.random.default_rng(1000 + t))
        acc += np.abs(c.h_ul) ** 2
    mean_gain = acc / n_slots
    rel = mean_gain / cluster.gain - 1.0
    assert np.all(np.abs(rel) < 0.06)
    assert abs(np.mean(rel)) < 0.02


def test_thermal_floors_without_interference(small_drop):
    topo, params, _ = small_drop
    ms = channel.effective_noise_variance(("ms", 1, 0), topo, params,
                                          interfering_cells=())
    assert watts_to_dbm(ms) == pytest.approx(-95.0, abs=1e-9)
    macro = channel.effective_noise_variance(("macro", 1, 0), topo, params,
                                             interfering_cells=())
    assert watts_to_dbm(macro) == pytest.approx(-99.0, abs=1e-9)
    pico = channel.effective_noise_variance(("pico", 1, 0), topo, params,
                                            interfering_cells=())
    assert watts_to_dbm(pico) == pytest.approx(-98.0, abs=1e-9)


def test_downlink_interference_accumulates_coband_cells(small_drop):
    topo, params, _ = small_drop
    node = ("ms", 1, 1)
    got = channel.effective_noise_variance(node, topo, params)
    expected = channel.thermal_noise_w(params.nf_ms_db, params.bandwidth_hz)
    p_macro = dbm_to_watts(params.tx_macro_dbm)
    p_pico = dbm_to_watts(params.tx_pico_dbm)
    for c in (8, 10, 12, 14, 16, 18):
        for s in range(3):
            expected += p_macro * cellgeom.link_gain_linear(
                ("macro", c, s), node, topo, params)
        for j in range(topo.n_pico):
            expected += p_pico * cellgeom.link_gain_linear(
                ("pico", c, j), node, topo, params)
    assert got == pytest.approx(expected, rel=1e-12)


def test_noise_f1_never_below_f13():
    params = cellgeom.PropagationParams()
    t13 = cellgeom.build_layout(33, 2, 1, params, reuse="F1_3")
    t1 = cellgeom.build_layout(33, 2, 1, params, reuse="F1")
    for node in [("ms", 1, 0), ("ms", 1, 1), ("macro", 1, 0),
                 ("macro", 1, 2), ("pico", 1, 0)]:
        n13 = channel.effective_noise_variance(node, t13, params)
        n1 = channel.effective_noise_variance(node, t1, params)
        assert n1 >= n13


def test_realized_noise_at_least_thermal(small_drop):
    topo, params, cluster = small_drop
    c = channel.realize_channel(cluster, 0, np.random.default_rng(5))
    assert np.all(c.sigma2_z_ul >= cluster.thermal_ul)
    floor_ms = channel.thermal_noise_w(params.nf_ms_db, params.bandwidth_hz)
    assert np.all(c.sigma2_z_dl >= floor_ms)


def test_uplink_activity_model(small_drop):
    topo, params, _ = small_drop
    node = ("macro", 1, 0)
    a = channel.effective_noise_variance(node, topo, params,
                                         rng=np.random.default_rng(7))
    b = channel.effective_noise_variance(node, topo, params,
                                         rng=np.random.default_rng(7))
    assert a == b
    thermal = channel.thermal_noise_w(params.nf_macro_db, params.bandwidth_hz)
    assert a > thermal


def test_unknown_node_rejected(small_drop):
    topo, params, _ = small_drop
    with pytest.raises(DomainError):
        channel.effective_noise_variance(("ms", 2, 0), topo, params)
    with pytest.raises(DomainError):
        channel.effective_noise_variance(("macro", 1, 5), topo, params)


def test_realization_validation():
    with pytest.raises(DomainError):
        channel.ChannelRealization(
            h_ul=np.zeros((2, 3), dtype=complex),
            h_dl=np.zeros((2, 3), dtype=complex),
            sigma2_z_ul=np.ones(2), sigma2_z_dl=np.ones(3))
    with pytest.raises(DomainError):
        channel.ChannelRealization(
            h_ul=np.zeros((2, 3), dtype=complex),
            h_dl=np.zeros((3, 2), dtype=complex),
            sigma2_z_ul=np.zeros(2), sigma2_z_dl=np.ones(3))


def test_cluster_capacity_and_power_vectors(small_drop):
    topo, params, cluster = small_drop
    c = cluster.backhaul_capacities(3.0, 1.0)
    assert np.array_equal(c, [3.0, 3.0, 3.0, 1.0])
    p = cluster.power_limits_dl()
    assert p[0] == pytest.approx(dbm_to_watts(46.0))
    assert p[3] == pytest.approx(dbm_to_watts(24.0))
    assert np.allclose(cluster.power_limits_ul(), dbm_to_watts(23.0))
