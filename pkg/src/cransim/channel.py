"""Per-slot channel realizations and effective noise for one cluster.

The cluster under study is served by the three sector antennas of its own
macro site plus the pico-BSs dropped in the cell; its K MSs are the served
users.  Everything outside the cluster is folded into the effective noise:
thermal noise plus the received power from the co-band cells, which transmit
at full power (all sector antennas and picos on the downlink, one active MS
per sector on the uplink).

Large-scale link gains (path loss, shadowing, antenna terms) are fixed for
the lifetime of a drop; small-scale Rayleigh fades are redrawn independently
per slot.
"""

from dataclasses import dataclass

import numpy as np

from . import cellgeom
from .errors import DomainError
from .units import dbm_to_watts

THERMAL_NOISE_DBM_PER_HZ = -174.0


def thermal_noise_w(nf_db, bandwidth_hz):
    """Thermal noise floor in watts for a receiver noise figure."""
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bandwidth_hz) + nf_db
    return float(dbm_to_watts(dbm))


@dataclass
class ChannelRealization:
    """One slot of small-scale fading for the cluster.

    ``h_ul[i, k]`` is the complex gain from MS k to BS antenna i (so the BS
    observation vector is ``h_ul @ x + z``); ``h_dl[k, i]`` the gain from BS
    antenna i to MS k.  Noise variances are in watts and include the
    inter-cluster interference.
    """

    h_ul: np.ndarray
    h_dl: np.ndarray
    sigma2_z_ul: np.ndarray
    sigma2_z_dl: np.ndarray
    slot_index: int = 0

    def __post_init__(self):
        n_bs, n_ms = self.h_ul.shape
        if self.h_dl.shape != (n_ms, n_bs):
            raise DomainError("h_dl shape inconsistent with h_ul")
        if self.sigma2_z_ul.shape != (n_bs,) or self.sigma2_z_dl.shape != (n_ms,):
            raise DomainError("noise vector shapes inconsistent with channel")
        if np.any(self.sigma2_z_ul <= 0) or np.any(self.sigma2_z_dl <= 0):
            raise DomainError("noise variances must be strictly positive")

    @property
    def n_bs(self):
        return self.h_ul.shape[0]

    @property
    def n_ms(self):
        return self.h_ul.shape[1]


@dataclass
class Cluster:
    """Drop-level state for the cluster: nodes and large-scale quantities."""

    topology: cellgeom.Topology
    params: cellgeom.PropagationParams
    cell_id: int
    bs_nodes: list
    ms_nodes: list
    gain: np.ndarray            # (n_bs, n_ms) large-scale linear gains
    thermal_ul: np.ndarray      # (n_bs,) watts
    sigma2_dl: np.ndarray       # (n_ms,) watts, thermal + downlink interference
    ul_interference: np.ndarray  # (n_cells, k_ms, n_bs) rx power if that MS is active
    n_macro: int = 3

    @property
    def n_bs(self):
        return len(self.bs_nodes)

    @property
    def n_ms(self):
        return len(self.ms_nodes)

    def backhaul_capacities(self, c_macro, c_pico):
        return np.array([c_macro] * self.n_macro
                        + [c_pico] * (self.n_bs - self.n_macro), dtype=float)

    def power_limits_dl(self):
        p = self.params
        return np.array([dbm_to_watts(p.tx_macro_dbm)] * self.n_macro
                        + [dbm_to_watts(p.tx_pico_dbm)] * (self.n_bs - self.n_macro))

    def power_limits_ul(self):
        return np.full(self.n_ms, dbm_to_watts(self.params.tx_ms_dbm))


def _cluster_nodes(topology, cell_id):
    bs = [("macro", cell_id, s) for s in range(3)]
    bs += [("pico", cell_id, j) for j in range(topology.n_pico)]
    ms = [("ms", cell_id, j) for j in range(topology.k_ms)]
    return bs, ms


def _node_in_cluster(node, topology, cell_id):
    kind, cell, idx = node
    if cell != cell_id:
        return False
    if kind == "macro":
        return 0 <= idx < 3
    if kind == "pico":
        return 0 <= idx < topology.n_pico
    if kind == "ms":
        return 0 <= idx < topology.k_ms
    return False


def effective_noise_variance(node, topology, params=None, rng=None,
                             interfering_cells=None, cell_id=1):
    """Effective noise power (watts) at a cluster node.

    For a BS node the uplink noise is returned: thermal floor plus the
    received power of the active MSs in each co-band cell (one per sector;
    chosen via ``rng`` when given, averaged over the cell's MSs otherwise).
    For an MS node the downlink noise is returned: thermal floor plus the
    full-power transmissions of every co-band cell's sector antennas and
    picos.  ``interfering_cells`` overrides the topology's co-band set.
    """
    params = params or cellgeom.PropagationParams()
    if not _node_in_cluster(node, topology, cell_id):
        raise DomainError(f"node {node!r} is not part of cluster {cell_id}")
    cells = topology.interferer_set if interfering_cells is None \
        else tuple(interfering_cells)

    kind = node[0]
    if kind == "ms":
        total = thermal_noise_w(params.nf_ms_db, params.bandwidth_hz)
        p_macro = dbm_to_watts(params.tx_macro_dbm)
        p_pico = dbm_to_watts(params.tx_pico_dbm)
        for c in cells:
            for s in range(3):
                total += p_macro * cellgeom.link_gain_linear(
                    ("macro", c, s), node, topology, params)
            for j in range(topology.n_pico):
                total += p_pico * cellgeom.link_gain_linear(
                    ("pico", c, j), node, topology, params)
        return total

    nf = params.nf_macro_db if kind == "macro" else params.nf_pico_db
    total = thermal_noise_w(nf, params.bandwidth_hz)
    p_ms = dbm_to_watts(params.tx_ms_dbm)
    for c in cells:
        gains = np.array([cellgeom.link_gain_linear(("ms", c, j), node,
                                                    topology, params)
                          for j in range(topology.k_ms)])
        if rng is not None:
            active = rng.integers(0, topology.k_ms, size=3)
            total += p_ms * float(np.sum(gains[active]))
        else:
            total += 3.0 * p_ms * float(np.mean(gains))
    return total


def build_cluster(topology, params=None, cell_id=1):
    """Precompute the drop-level large-scale state of one cluster."""
    params = params or cellgeom.PropagationParams()
    bs_nodes, ms_nodes = _cluster_nodes(topology, cell_id)
    n_bs, n_ms = len(bs_nodes), len(ms_nodes)

    gain = np.zeros((n_bs, n_ms))
    for i, b in enumerate(bs_nodes):
        for k, m in enumerate(ms_nodes):
            gain[i, k] = cellgeom.link_gain_linear(b, m, topology, params)

    thermal_ul = np.array([
        thermal_noise_w(params.nf_macro_db if b[0] == "macro"
                        else params.nf_pico_db, params.bandwidth_hz)
        for b in bs_nodes])
    sigma2_dl = np.array([
        effective_noise_variance(m, topology, params, cell_id=cell_id)
        for m in ms_nodes])

    p_ms = dbm_to_watts(params.tx_ms_dbm)
    cells = topology.interferer_set
    ul_interference = np.zeros((len(cells), topology.k_ms, n_bs))
    for ci, c in enumerate(cells):
        for j in range(topology.k_ms):
            for i, b in enumerate(bs_nodes):
                ul_interference[ci, j, i] = p_ms * cellgeom.link_gain_linear(
                    ("ms", c, j), b, topology, params)

    return Cluster(topology=topology, params=params, cell_id=cell_id,
                   bs_nodes=bs_nodes, ms_nodes=ms_nodes, gain=gain,
                   thermal_ul=thermal_ul, sigma2_dl=sigma2_dl,
                   ul_interference=ul_interference)


def realize_channel(cluster, slot, rng):
    """Draw one slot of i.i.d. Rayleigh fading for the cluster.

    Uplink and downlink fades are independent; the uplink noise adds the
    interference of one uniformly chosen active MS per sector of each
    co-band cell.  Deterministic given the rng state.
    """
    n_bs, n_ms = cluster.n_bs, cluster.n_ms
    fade_ul = (rng.standard_normal((n_bs, n_ms))
               + 1j * rng.standard_normal((n_bs, n_ms))) / np.sqrt(2.0)
    fade_dl = (rng.standard_normal((n_ms, n_bs))
               + 1j * rng.standard_normal((n_ms, n_bs))) / np.sqrt(2.0)
    amp = np.sqrt(cluster.gain)
    h_ul = amp * fade_ul
    h_dl = amp.T * fade_dl

    sigma2_ul = cluster.thermal_ul.copy()
    k = cluster.topology.k_ms
    for ci in range(cluster.ul_interference.shape[0]):
        active = rng.integers(0, k, size=3)
        sigma2_ul += cluster.ul_interference[ci, active].sum(axis=0)

    return ChannelRealization(h_ul=h_ul, h_dl=h_dl,
                              sigma2_z_ul=sigma2_ul,
                              sigma2_z_dl=cluster.sigma2_dl.copy(),
                              slot_index=int(slot))
