"""Steady-state demand-driven hydraulics and pressure/resilience metrics.

The solver is the global gradient (Todini-Pilati) scheme with Hazen-Williams
friction.  Heads at junctions and flows in open links are updated together by
a Newton step; after every step nodal continuity holds up to round-off and
the iteration continues until head changes vanish.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedError, HydraulicError, SingularSystemError
from .model import DividingConfig, Link, Network, check_connectivity, natural_key

logger = logging.getLogger(__name__)

HW_COEFF = 10.67
HW_EXP = 1.852
HW_DIAM_EXP = 4.871

FLOW_TOL = 1e-6  # m3/s
HEAD_TOL = 1e-6  # m
MAX_ITER = 200
INITIAL_FLOW = 1e-3  # m3/s
_MIN_FLOW = 1e-9  # floor on |Q| in the gradient, keeps zero-flow pipes finite
_MAX_HALVINGS = 4


def hw_resistance(link: Link) -> float:
    """Resistance r such that head loss = r * Q * |Q|**0.852 (SI units)."""
    return HW_COEFF * link.length / (link.roughness**HW_EXP * link.diameter**HW_DIAM_EXP)


def hw_headloss(link: Link, flow: float) -> float:
    return hw_resistance(link) * flow * abs(flow) ** (HW_EXP - 1.0)


@dataclass(frozen=True)
class HydraulicState:
    total_head: dict[str, float]
    pressure_head: dict[str, float]
    flow: dict[str, float]
    converged: bool
    iterations: int
    max_residual: float  # worst nodal continuity error, m3/s
    max_head_change: float  # last head update, m
    reservoir_outflow: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PressureStats:
    h_min: float
    h_mean: float
    h_max: float
    violating_nodes: list[str]


def solve(
    network: Network,
    config: DividingConfig | None = None,
    *,
    max_iter: int = MAX_ITER,
    flow_tol: float = FLOW_TOL,
    head_tol: float = HEAD_TOL,
) -> HydraulicState:
    """Solve the steady state of ``network`` with ``config`` devices installed.

    Closed links (including gate valves from ``config``) are dropped from the
    system.  When the iteration cap is hit the last iterate is returned with
    ``converged=False``.
    """
    if config is not None:
        network = config.apply(network)
    stranded = check_connectivity(network)
    if stranded:
        raise DisconnectedError(stranded)

    # canonical order, so the result does not depend on how the file lists things
    junctions = sorted(network.junctions, key=lambda n: natural_key(n.id))
    reservoirs = sorted(network.reservoirs, key=lambda n: natural_key(n.id))
    jidx = {n.id: i for i, n in enumerate(junctions)}
    ridx = {n.id: i for i, n in enumerate(reservoirs)}
    nj = len(junctions)
    open_links = sorted((lk for lk in network.links if lk.is_open), key=lambda lk: natural_key(lk.id))
    m = len(open_links)

    demand = np.array([n.base_demand for n in junctions], dtype=float)
    h_fixed = np.array([n.head for n in reservoirs], dtype=float)
    r = np.array([hw_resistance(lk) for lk in open_links], dtype=float)

    # endpoint indices: junction index, or -1 when the endpoint is a reservoir
    fj = np.array([jidx.get(lk.from_node, -1) for lk in open_links], dtype=int)
    tj = np.array([jidx.get(lk.to_node, -1) for lk in open_links], dtype=int)
    fr = np.array([ridx.get(lk.from_node, -1) for lk in open_links], dtype=int)
    tr = np.array([ridx.get(lk.to_node, -1) for lk in open_links], dtype=int)
    f_is_j, t_is_j = fj >= 0, tj >= 0
    both = f_is_j & t_is_j
    # fixed-head contribution to each link's head difference
    fixed_f = np.where(fr >= 0, h_fixed[np.maximum(fr, 0)], 0.0) if len(h_fixed) else np.zeros(m)
    fixed_t = np.where(tr >= 0, h_fixed[np.maximum(tr, 0)], 0.0) if len(h_fixed) else np.zeros(m)

    def head_diff(h):
        hf = np.where(f_is_j, h[np.maximum(fj, 0)], fixed_f)
        ht = np.where(t_is_j, h[np.maximum(tj, 0)], fixed_t)
        return hf - ht

    def continuity(q):
        # inflow - outflow - demand at every junction
        net = -demand.copy()
        np.add.at(net, tj[t_is_j], q[t_is_j])
        np.subtract.at(net, fj[f_is_j], q[f_is_j])
        return net

    def energy_residual(q, h):
        return np.abs(r * q * np.abs(q) ** (HW_EXP - 1.0) - head_diff(h))

    q = np.full(m, INITIAL_FLOW)
    h = np.full(nj, float(np.mean(h_fixed)) if len(h_fixed) else 0.0)
    converged = False
    it = 0
    dh_max = np.inf
    prev_energy = None

    for it in range(1, max_iter + 1):
        absq = np.maximum(np.abs(q), _MIN_FLOW)
        g = HW_EXP * r * absq ** (HW_EXP - 1.0)
        a = 1.0 / g
        y = q - r * q * np.abs(q) ** (HW_EXP - 1.0) / g

        mat = np.zeros((nj, nj))
        flat = mat.reshape(-1)
        np.add.at(flat, fj[f_is_j] * nj + fj[f_is_j], a[f_is_j])
        np.add.at(flat, tj[t_is_j] * nj + tj[t_is_j], a[t_is_j])
        np.subtract.at(flat, fj[both] * nj + tj[both], a[both])
        np.subtract.at(flat, tj[both] * nj + fj[both], a[both])
        # rhs = -d - A_J^T (y + a * fixed part)
        w = y + a * (fixed_f * ~f_is_j - fixed_t * ~t_is_j)
        rhs = -demand.copy()
        np.subtract.at(rhs, fj[f_is_j], w[f_is_j])
        np.add.at(rhs, tj[t_is_j], w[t_is_j])
        try:
            h_new = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            dead = [junctions[i].id for i in range(nj) if mat[i, i] == 0.0]
            raise SingularSystemError(dead or [n.id for n in junctions]) from None
        if not np.all(np.isfinite(h_new)):
            raise SingularSystemError([n.id for n in junctions])
        q_new = y + a * head_diff(h_new)

        # step damping once the iterate already satisfies continuity
        if prev_energy is not None:
            lam = 1.0
            cand_q, cand_h = q_new, h_new
            e = energy_residual(cand_q, cand_h).max(initial=0.0)
            for _ in range(_MAX_HALVINGS):
                if e <= prev_energy:
                    break
                lam *= 0.5
                cand_q = q + lam * (q_new - q)
                cand_h = h + lam * (h_new - h)
                e = energy_residual(cand_q, cand_h).max(initial=0.0)
            q_new, h_new = cand_q, cand_h
        dh_max = float(np.abs(h_new - h).max(initial=0.0))
        q, h = q_new, h_new
        prev_energy = energy_residual(q, h).max(initial=0.0)
        cont = float(np.abs(continuity(q)).max(initial=0.0))
        if cont < flow_tol and dh_max < head_tol:
            converged = True
            break

    cont = float(np.abs(continuity(q)).max(initial=0.0))
    if not converged:
        logger.warning("hydraulic solve hit %d iterations (residual %.3g m3/s, dH %.3g m)", it, cont, dh_max)

    total_head = {}
    for n in network.nodes:
        total_head[n.id] = float(h[jidx[n.id]]) if n.id in jidx else float(n.head)
    pressure = {n.id: total_head[n.id] - n.elevation for n in junctions}
    flow = {lk.id: 0.0 for lk in network.links}
    for lk, qk in zip(open_links, q):
        flow[lk.id] = float(qk)
    outflow = {n.id: 0.0 for n in reservoirs}
    for lk in open_links:
        if lk.from_node in outflow:
            outflow[lk.from_node] += flow[lk.id]
        if lk.to_node in outflow:
            outflow[lk.to_node] -= flow[lk.id]
    return HydraulicState(
        total_head=total_head,
        pressure_head=pressure,
        flow=flow,
        converged=converged,
        iterations=it,
        max_residual=cont,
        max_head_change=dh_max,
        reservoir_outflow=outflow,
    )


def resilience_index(network: Network, state: HydraulicState, convention: str = "total") -> float:
    """Todini's resilience index: surplus power delivered over surplus available.

    With ``convention="total"`` the required head at junction i is its
    elevation plus ``h_star`` and delivered heads are total heads.  With
    ``"pressure"`` the pressure head is used against ``h_star`` directly.
    The two coincide on flat networks.
    """
    if not state.converged:
        raise HydraulicError("resilience index needs a converged hydraulic state")
    if convention not in ("total", "pressure"):
        raise ValueError(f"unknown head convention {convention!r}")
    h_star = network.h_star
    surplus = 0.0
    required = 0.0
    for n in sorted(network.junctions, key=lambda n: natural_key(n.id)):
        qi = n.base_demand
        if qi <= 0:
            continue
        if convention == "total":
            hi, hreq = state.total_head[n.id], n.elevation + h_star
        else:
            hi, hreq = state.pressure_head[n.id], h_star
        surplus += qi * (hi - hreq)
        required += qi * hreq
    supplied = sum(state.reservoir_outflow[res.id] * res.head for res in sorted(network.reservoirs, key=lambda n: natural_key(n.id)))
    denom = supplied - required
    if abs(denom) <= 1e-12 * max(1.0, abs(supplied)):
        raise HydraulicError("resilience index undefined: no surplus energy available at the sources")
    return surplus / denom


def pressure_stats(network: Network, state: HydraulicState) -> PressureStats:
    """Min/mean/max junction pressure and the junctions below ``h_star``.

    The mean runs over demand-carrying junctions only (all junctions when none
    carries demand); min and max run over every junction.
    """
    if not state.converged:
        raise HydraulicError("pressure statistics need a converged hydraulic state")
    juncs = sorted(network.junctions, key=lambda n: natural_key(n.id))
    if not juncs:
        raise HydraulicError("network has no junctions")
    pressures = [state.pressure_head[n.id] for n in juncs]
    demanding = [state.pressure_head[n.id] for n in juncs if n.base_demand > 0] or pressures
    h_min, h_max = min(pressures), max(pressures)
    # clamp guards against summation round-off when all pressures coincide
    h_mean = min(max(float(np.mean(demanding)), h_min), h_max)
    violating = [n.id for n in juncs if state.pressure_head[n.id] < network.h_star]
    return PressureStats(h_min=h_min, h_mean=h_mean, h_max=h_max, violating_nodes=violating)
