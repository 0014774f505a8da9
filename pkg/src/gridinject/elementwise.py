"""Element-wise method: per-branch evaluation followed by reduction.

Branch constants are stored one array per field (g/b parts split) so the
evaluation loops are straight-line arithmetic over contiguous arrays with
no data-dependent control flow. The only irregular memory access is in the
gather (bus -> branch) and the reductions (branch -> bus / J nonzeros).

With ``delta = th - tk - phi``, ``a_hh = (y_h + y_hk)/m^2``,
``a_hk = y_hk/m`` and ``a_kk = y_k + y_hk`` (each split as g + jb)::

    Ph =  vh^2 g_hh - vh vk (g_hk cos d + b_hk sin d)
    Qh = -vh^2 b_hh - vh vk (g_hk sin d - b_hk cos d)
    Pk =  vk^2 g_kk - vh vk (g_hk cos d - b_hk sin d)
    Qk = -vk^2 b_kk + vh vk (g_hk sin d + b_hk cos d)
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import InconsistencyError, StalePlanError
from .netcase import IndexedNetwork
from .sparse import CscMatrix, TripletList, csc_from_triplets

INJECTIONS = ("Ph", "Qh", "Pk", "Qk")
VARIABLES = ("th", "tk", "vh", "vk")
#: row order of ``ElemWorkspace.partials``: dPh/dth, dPh/dtk, ..., dQk/dvk
PARTIAL_NAMES = tuple(f"d{x}_d{y}" for x in INJECTIONS for y in VARIABLES)
N_PARTIALS = len(PARTIAL_NAMES)
SHUNT_PARTIAL_NAMES = ("dPsh_dv", "dQsh_dv")


@dataclass(frozen=True)
class BranchSoA:
    """Voltage-independent branch constants, one contiguous array per field.

    ``shunt_g``/``shunt_b`` are per bus; everything else is per branch.
    """

    n_b: int
    from_idx: np.ndarray
    to_idx: np.ndarray
    g_hh: np.ndarray
    b_hh: np.ndarray
    g_hk: np.ndarray
    b_hk: np.ndarray
    g_kk: np.ndarray
    b_kk: np.ndarray
    phi: np.ndarray
    shunt_g: np.ndarray
    shunt_b: np.ndarray

    @property
    def n_l(self) -> int:
        return len(self.from_idx)


def build_branch_soa(net: IndexedNetwork) -> BranchSoA:
    m = net.tap_m
    a_hh = (net.y_sh_from + net.y_series) / (m * m)
    a_hk = net.y_series / m
    a_kk = net.y_sh_to + net.y_series

    def split(z):
        z = np.asarray(z, dtype=np.complex128)
        return np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag)

    g_hh, b_hh = split(a_hh)
    g_hk, b_hk = split(a_hk)
    g_kk, b_kk = split(a_kk)
    shunt_g, shunt_b = split(net.bus_shunt)
    return BranchSoA(
        n_b=net.n_b,
        from_idx=np.ascontiguousarray(net.from_idx, dtype=np.int64),
        to_idx=np.ascontiguousarray(net.to_idx, dtype=np.int64),
        g_hh=g_hh, b_hh=b_hh, g_hk=g_hk, b_hk=b_hk, g_kk=g_kk, b_kk=b_kk,
        phi=np.ascontiguousarray(net.tap_phi, dtype=np.float64),
        shunt_g=shunt_g, shunt_b=shunt_b,
    )


class ElemWorkspace:
    """Preallocated per-branch and per-bus work arrays.

    All Jacobian element values live in one flat buffer ``jac``:
    ``partials`` (16 x n_l) and ``shunt_partials`` (2 x n_b) are views into
    it, so reductions can treat every source element uniformly.
    """

    def __init__(self, n_l: int, n_b: int):
        self.n_l = n_l
        self.n_b = n_b
        self.vh = np.empty(n_l)
        self.vk = np.empty(n_l)
        self.th = np.empty(n_l)
        self.tk = np.empty(n_l)
        self.ph = np.empty(n_l)
        self.qh = np.empty(n_l)
        self.pk = np.empty(n_l)
        self.qk = np.empty(n_l)
        self.p = np.empty(n_b)
        self.q = np.empty(n_b)
        self.jac = np.zeros(N_PARTIALS * n_l + 2 * n_b)
        self.partials = self.jac[: N_PARTIALS * n_l].reshape(N_PARTIALS, n_l)
        self.shunt_partials = self.jac[N_PARTIALS * n_l:].reshape(2, n_b)

    @classmethod
    def for_soa(cls, soa: BranchSoA) -> "ElemWorkspace":
        return cls(soa.n_l, soa.n_b)

    def partial(self, name: str) -> np.ndarray:
        if name in SHUNT_PARTIAL_NAMES:
            return self.shunt_partials[SHUNT_PARTIAL_NAMES.index(name)]
        return self.partials[PARTIAL_NAMES.index(name)]


@nb.njit(cache=True)
def _gather(f, t, vm, va, vh, vk, th, tk):
    for e in range(len(f)):
        vh[e] = vm[f[e]]
        vk[e] = vm[t[e]]
        th[e] = va[f[e]]
        tk[e] = va[t[e]]


@nb.njit(cache=True)
def _eval_powers(vh, vk, th, tk, g_hh, b_hh, g_hk, b_hk, g_kk, b_kk, phi, ph, qh, pk, qk):
    for e in range(len(vh)):
        d = th[e] - tk[e] - phi[e]
        c = np.cos(d)
        s = np.sin(d)
        vv = vh[e] * vk[e]
        gc = g_hk[e] * c
        gs = g_hk[e] * s
        bc = b_hk[e] * c
        bs = b_hk[e] * s
        ph[e] = vh[e] * vh[e] * g_hh[e] - vv * (gc + bs)
        qh[e] = -vh[e] * vh[e] * b_hh[e] - vv * (gs - bc)
        pk[e] = vk[e] * vk[e] * g_kk[e] - vv * (gc - bs)
        qk[e] = -vk[e] * vk[e] * b_kk[e] + vv * (gs + bc)


def _gather_state(soa: BranchSoA, ws: ElemWorkspace, vm, va) -> None:
    _gather(soa.from_idx, soa.to_idx, np.asarray(vm, dtype=np.float64),
            np.asarray(va, dtype=np.float64), ws.vh, ws.vk, ws.th, ws.tk)


def eval_powers(soa: BranchSoA, ws: ElemWorkspace, vm, va) -> ElemWorkspace:
    """Gather terminal states and evaluate both terminal injections of every branch."""
    _gather_state(soa, ws, vm, va)
    _eval_powers(ws.vh, ws.vk, ws.th, ws.tk, soa.g_hh, soa.b_hh, soa.g_hk, soa.b_hk,
                 soa.g_kk, soa.b_kk, soa.phi, ws.ph, ws.qh, ws.pk, ws.qk)
    return ws


@nb.njit(cache=True)
def _reduce_powers(f, t, ph, qh, pk, qk, vm, shunt_g, shunt_b, p, q):
    for i in range(len(vm)):
        v2 = vm[i] * vm[i]
        p[i] = v2 * shunt_g[i]
        q[i] = -v2 * shunt_b[i]
    for e in range(len(f)):
        p[f[e]] += ph[e]
        q[f[e]] += qh[e]
        p[t[e]] += pk[e]
        q[t[e]] += qk[e]


def reduce_powers(ws: ElemWorkspace, soa: BranchSoA, vm):
    """Sum branch terminal injections and bus shunt injections per bus.

    Returns ``(P, Q)``; both are views of the workspace buffers.
    """
    _reduce_powers(soa.from_idx, soa.to_idx, ws.ph, ws.qh, ws.pk, ws.qk,
                   np.asarray(vm, dtype=np.float64), soa.shunt_g, soa.shunt_b, ws.p, ws.q)
    return ws.p, ws.q


@nb.njit(cache=True)
def _eval_jacobian(vh, vk, th, tk, g_hh, b_hh, g_hk, b_hk, g_kk, b_kk, phi, out):
    for e in range(len(vh)):
        d = th[e] - tk[e] - phi[e]
        c = np.cos(d)
        s = np.sin(d)
        vv = vh[e] * vk[e]
        # the three trigonometric combinations that appear in all partials
        a = g_hk[e] * c + b_hk[e] * s
        b = g_hk[e] * s - b_hk[e] * c
        ck = g_hk[e] * c - b_hk[e] * s
        sk = g_hk[e] * s + b_hk[e] * c
        # Ph
        out[0, e] = vv * b
        out[1, e] = -vv * b
        out[2, e] = 2.0 * vh[e] * g_hh[e] - vk[e] * a
        out[3, e] = -vh[e] * a
        # Qh
        out[4, e] = -vv * a
        out[5, e] = vv * a
        out[6, e] = -2.0 * vh[e] * b_hh[e] - vk[e] * b
        out[7, e] = -vh[e] * b
        # Pk
        out[8, e] = vv * sk
        out[9, e] = -vv * sk
        out[10, e] = -vk[e] * ck
        out[11, e] = 2.0 * vk[e] * g_kk[e] - vh[e] * ck
        # Qk
        out[12, e] = vv * ck
        out[13, e] = -vv * ck
        out[14, e] = vk[e] * sk
        out[15, e] = -2.0 * vk[e] * b_kk[e] + vh[e] * sk


@nb.njit(cache=True)
def _eval_shunt_jacobian(vm, shunt_g, shunt_b, out):
    for i in range(len(vm)):
        out[0, i] = 2.0 * vm[i] * shunt_g[i]
        out[1, i] = -2.0 * vm[i] * shunt_b[i]


def eval_jacobian_elements(soa: BranchSoA, ws: ElemWorkspace, vm, va) -> ElemWorkspace:
    """Evaluate the 16 branch partials and the 2 bus shunt partials.

    Terminal states are gathered again, so this does not depend on a prior
    :func:`eval_powers` call.
    """
    vm = np.asarray(vm, dtype=np.float64)
    _gather_state(soa, ws, vm, va)
    _eval_jacobian(ws.vh, ws.vk, ws.th, ws.tk, soa.g_hh, soa.b_hh, soa.g_hk, soa.b_hk,
                   soa.g_kk, soa.b_kk, soa.phi, ws.partials)
    _eval_shunt_jacobian(vm, soa.shunt_g, soa.shunt_b, ws.shunt_partials)
    return ws


def jacobian_coordinates(from_idx, to_idx, n_b: int):
    """(row, col) in J of every source element, in flat ``ElemWorkspace.jac`` order."""
    f = np.asarray(from_idx, dtype=np.int64)
    t = np.asarray(to_idx, dtype=np.int64)
    row_of = {"Ph": f, "Qh": f + n_b, "Pk": t, "Qk": t + n_b}
    col_of = {"th": f, "tk": t, "vh": f + n_b, "vk": t + n_b}
    bus = np.arange(n_b, dtype=np.int64)
    rows = [row_of[x] for x in INJECTIONS for _ in VARIABLES] + [bus, bus + n_b]
    cols = [col_of[y] for _ in INJECTIONS for y in VARIABLES] + [bus + n_b, bus + n_b]
    return np.concatenate(rows), np.concatenate(cols)


def jacobian_pattern(net: IndexedNetwork) -> CscMatrix:
    """Four-block union of the admittance coordinates, every diagonal present."""
    n = net.n_b
    bus = np.arange(n, dtype=np.int64)
    f, t = net.from_idx, net.to_idx
    yr = np.concatenate([bus, f, f, t, t])
    yc = np.concatenate([bus, f, t, f, t])
    rows = np.concatenate([yr, yr + n, yr, yr + n])
    cols = np.concatenate([yc, yc, yc + n, yc + n])
    pattern = csc_from_triplets(TripletList(rows, cols, np.zeros(len(rows)), 2 * n, 2 * n))
    pattern.nzval[:] = 0.0
    return pattern


@dataclass
class ScatterPlan:
    """Destinations of every source element in ``j_pattern.nzval``.

    ``positions`` follows the flat workspace order. The two-step split puts
    the first source reaching each destination in the copy set and the rest
    in the add set; ``unvisited`` lists pattern slots no source reaches
    (they are zero-filled).
    """

    j_pattern: CscMatrix
    positions: np.ndarray
    copy_src: np.ndarray
    copy_dst: np.ndarray
    add_src: np.ndarray
    add_dst: np.ndarray
    unvisited: np.ndarray
    n_l: int
    n_b: int

    def check(self, ws: ElemWorkspace) -> None:
        if ws.n_l != self.n_l or ws.n_b != self.n_b or len(ws.jac) != len(self.positions):
            raise StalePlanError("workspace does not match the scatter plan")


@nb.njit(cache=True)
def _locate(jp, ji, rows, cols, out):
    for s in range(len(rows)):
        out[s] = -1
        for k in range(jp[cols[s]], jp[cols[s] + 1]):
            if ji[k] == rows[s]:
                out[s] = k
                break


@nb.njit(cache=True)
def _first_visit(positions, nnz):
    seen = np.zeros(nnz, dtype=np.bool_)
    is_copy = np.zeros(len(positions), dtype=np.bool_)
    for s in range(len(positions)):
        if not seen[positions[s]]:
            seen[positions[s]] = True
            is_copy[s] = True
    return is_copy, seen


def build_scatter_plan(net: IndexedNetwork, j_pattern: CscMatrix | None = None) -> ScatterPlan:
    if j_pattern is None:
        j_pattern = jacobian_pattern(net)
    rows, cols = jacobian_coordinates(net.from_idx, net.to_idx, net.n_b)
    positions = np.empty(len(rows), dtype=np.int64)
    _locate(j_pattern.col_start, j_pattern.row_idx, rows, cols, positions)
    if np.any(positions < 0):
        s = int(np.flatnonzero(positions < 0)[0])
        raise InconsistencyError(f"J pattern has no slot at ({rows[s]}, {cols[s]})")

    is_copy, seen = _first_visit(positions, j_pattern.nnz)
    src = np.arange(len(positions), dtype=np.int64)
    return ScatterPlan(
        j_pattern=j_pattern,
        positions=positions,
        copy_src=src[is_copy],
        copy_dst=positions[is_copy],
        add_src=src[~is_copy],
        add_dst=positions[~is_copy],
        unvisited=np.flatnonzero(~seen).astype(np.int64),
        n_l=net.n_l,
        n_b=net.n_b,
    )


@nb.njit(cache=True)
def _two_step(jv, src, copy_src, copy_dst, add_src, add_dst, unvisited):
    for i in range(len(copy_src)):
        jv[copy_dst[i]] = src[copy_src[i]]
    for i in range(len(unvisited)):
        jv[unvisited[i]] = 0.0
    for i in range(len(add_src)):
        jv[add_dst[i]] += src[add_src[i]]


@nb.njit(cache=True)
def _copy_add(jv, src, positions):
    for k in range(len(jv)):
        jv[k] = 0.0
    for s in range(len(src)):
        jv[positions[s]] += src[s]


def reduce_jacobian_two_step(plan: ScatterPlan, ws: ElemWorkspace) -> CscMatrix:
    """Copy first visitors, then copy-add the remaining elements."""
    plan.check(ws)
    _two_step(plan.j_pattern.nzval, ws.jac, plan.copy_src, plan.copy_dst,
              plan.add_src, plan.add_dst, plan.unvisited)
    return plan.j_pattern


def reduce_jacobian_copy_add(plan: ScatterPlan, ws: ElemWorkspace) -> CscMatrix:
    """Zero the pattern values, then add every element at its position."""
    plan.check(ws)
    _copy_add(plan.j_pattern.nzval, ws.jac, plan.positions)
    return plan.j_pattern


def reduce_jacobian_new_matrix(net: IndexedNetwork, ws: ElemWorkspace) -> CscMatrix:
    """Baseline: build triplets and compress them into a new matrix every call."""
    if ws.n_l != net.n_l or ws.n_b != net.n_b:
        raise StalePlanError("workspace does not match the network")
    rows, cols = jacobian_coordinates(net.from_idx, net.to_idx, net.n_b)
    return csc_from_triplets(TripletList(rows, cols, ws.jac.copy(), 2 * net.n_b, 2 * net.n_b))
