"""Admittance-matrix method: Ybus build, injections, derivatives, J assembly.

Fast path: phasor update -> sparse mat-vec -> two-pass derivatives on the
Ybus pattern -> copy into a frozen J pattern through precomputed indices.
The literal matrix-product derivatives and block concatenation are kept as
baselines for benchmarking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InconsistencyError, StalePlanError
from .netcase import IndexedNetwork
from .sparse import (
    CscMatrix,
    TripletList,
    _spmv_into,
    concat4,
    csc_from_triplets,
    pattern_clone_with_values,
)

INTERLEAVED = "interleaved"
SEPARATE = "separate"


def branch_stamps(net: IndexedNetwork):
    """Per-branch primitive admittances ``(yff, yft, ytf, ytt)``.

    The tap ``m e^{j phi}`` sits on the from side.
    """
    ys = net.y_series
    m = net.tap_m
    shift = np.exp(1j * net.tap_phi)
    yff = (net.y_sh_from + ys) / (m * m)
    yft = -(ys / m) * shift
    ytf = -(ys / m) * np.conj(shift)
    ytt = net.y_sh_to + ys
    return yff, yft, ytf, ytt


def build_ybus(net: IndexedNetwork) -> CscMatrix:
    """Stamp branches and bus shunts into a complex CSC Ybus.

    Every diagonal entry is structurally present, even when its value is 0.
    """
    yff, yft, ytf, ytt = branch_stamps(net)
    f, t = net.from_idx, net.to_idx
    diag = np.arange(net.n_b, dtype=np.int64)
    rows = np.concatenate([diag, f, f, t, t])
    cols = np.concatenate([diag, f, t, f, t])
    vals = np.concatenate([net.bus_shunt.astype(np.complex128), yff, yft, ytf, ytt])
    return csc_from_triplets(TripletList(rows, cols, vals, net.n_b, net.n_b))


class YbusModel:
    """Voltage state and work arrays for the Ybus path.

    ``storage_mode`` picks how the phasor update lays out complex data:
    ``interleaved`` writes complex arrays directly; ``separate`` computes
    real and imaginary parts in their own contiguous arrays, then packs
    them into the interleaved arrays the mat-vec reads.
    """

    def __init__(self, ybus: CscMatrix, vm=None, va=None, storage_mode: str = INTERLEAVED):
        if ybus.n_rows != ybus.n_cols:
            raise DomainError("Ybus must be square")
        if storage_mode not in (INTERLEAVED, SEPARATE):
            raise DomainError(f"unknown storage mode {storage_mode!r}")
        n = ybus.n_cols
        self.ybus = ybus
        self.storage_mode = storage_mode
        self.vm = np.ones(n) if vm is None else np.array(vm, dtype=np.float64)
        self.va = np.zeros(n) if va is None else np.array(va, dtype=np.float64)
        if self.vm.shape != (n,) or self.va.shape != (n,):
            raise DomainError("voltage arrays do not match Ybus size")
        self.u = np.empty(n, dtype=np.complex128)
        self.v = np.empty(n, dtype=np.complex128)
        self.i_bus = np.zeros(n, dtype=np.complex128)
        self.s = np.zeros(n, dtype=np.complex128)
        self.u_re = np.empty(n)
        self.u_im = np.empty(n)
        self.v_re = np.empty(n)
        self.v_im = np.empty(n)
        self._scipy_ybus = None

    @classmethod
    def from_network(cls, net: IndexedNetwork, storage_mode: str = INTERLEAVED,
                     vm=None, va=None) -> "YbusModel":
        return cls(build_ybus(net), net.vm0 if vm is None else vm,
                   net.va0 if va is None else va, storage_mode)

    @property
    def n_b(self) -> int:
        return self.ybus.n_cols

    def set_state(self, vm, va) -> None:
        self.vm[:] = vm
        self.va[:] = va

    def scipy_ybus(self) -> sp.csc_matrix:
        """SciPy view over the same buffers, for the matrix-product baseline."""
        if self._scipy_ybus is None:
            y = self.ybus
            self._scipy_ybus = sp.csc_matrix((y.nzval, y.row_idx, y.col_start), shape=y.shape)
        return self._scipy_ybus


@nb.njit(cache=True)
def _phasors_interleaved(vm, va, u, v):
    for i in range(len(vm)):
        ui = complex(np.cos(va[i]), np.sin(va[i]))
        u[i] = ui
        v[i] = vm[i] * ui


@nb.njit(cache=True)
def _phasors_separate(vm, va, u_re, u_im, v_re, v_im, u, v):
    n = len(vm)
    for i in range(n):
        u_re[i] = np.cos(va[i])
    for i in range(n):
        u_im[i] = np.sin(va[i])
    for i in range(n):
        v_re[i] = vm[i] * u_re[i]
        v_im[i] = vm[i] * u_im[i]
    # layout conversion for the mat-vec
    for i in range(n):
        u[i] = complex(u_re[i], u_im[i])
        v[i] = complex(v_re[i], v_im[i])


def update_phasors(model: YbusModel) -> YbusModel:
    """Recompute ``u = e^{j va}`` and ``v = vm * u`` in the model's layout."""
    if model.storage_mode == SEPARATE:
        _phasors_separate(model.vm, model.va, model.u_re, model.u_im,
                          model.v_re, model.v_im, model.u, model.v)
    else:
        _phasors_interleaved(model.vm, model.va, model.u, model.v)
    return model


@nb.njit(cache=True)
def _vi_conj_interleaved(v, i_bus, s):
    for i in range(len(v)):
        s[i] = v[i] * np.conj(i_bus[i])


@nb.njit(cache=True)
def _vi_conj_separate(v_re, v_im, i_bus, s):
    for i in range(len(v_re)):
        ir = i_bus[i].real
        ii = i_bus[i].imag
        s[i] = complex(v_re[i] * ir + v_im[i] * ii, v_im[i] * ir - v_re[i] * ii)


def power_injection_ybus(model: YbusModel) -> np.ndarray:
    """``S = V * conj(Ybus V)``; keeps ``model.i_bus`` for the Jacobian."""
    y = model.ybus
    if len(model.v) != y.n_cols:
        raise DomainError("voltage vector does not match Ybus size")
    _spmv_into(y.col_start, y.row_idx, y.nzval, model.v, model.i_bus)
    if model.storage_mode == SEPARATE:
        _vi_conj_separate(model.v_re, model.v_im, model.i_bus, model.s)
    else:
        _vi_conj_interleaved(model.v, model.i_bus, model.s)
    return model.s


@dataclass
class JacobianPlanYbus:
    """Frozen J pattern and the write positions of each Ybus entry per block."""

    j_pattern: CscMatrix
    p11: np.ndarray
    p12: np.ndarray
    p21: np.ndarray
    p22: np.ndarray
    ds_dtheta: CscMatrix
    ds_dvm: CscMatrix
    ybus_col_start: np.ndarray
    ybus_row_idx: np.ndarray

    def matches(self, ybus: CscMatrix) -> bool:
        if ybus.col_start is self.ybus_col_start and ybus.row_idx is self.ybus_row_idx:
            return True
        return (np.array_equal(ybus.col_start, self.ybus_col_start)
                and np.array_equal(ybus.row_idx, self.ybus_row_idx))


@nb.njit(cache=True)
def _find_positions(jp, ji, y_row, y_col, row_off, col_off, out):
    for i in range(len(y_col)):
        col = y_col[i] + col_off
        row = y_row[i] + row_off
        out[i] = -1
        for k in range(jp[col], jp[col + 1]):
            if ji[k] == row:
                out[i] = k
                break


def build_jacobian_plan(ybus: CscMatrix, j_pattern: CscMatrix | None = None) -> JacobianPlanYbus:
    """Build the 2n x 2n J pattern and map every Ybus entry into each block.

    ``j_pattern`` may be supplied when J carries entries beyond the four
    Ybus-shaped blocks; it must contain all of them.
    """
    n = ybus.n_cols
    y_row = ybus.row_idx
    y_col = ybus.col_indices()
    diag_present = np.zeros(n, dtype=bool)
    diag_present[y_row[y_row == y_col]] = True
    if not diag_present.all():
        raise InconsistencyError("Ybus is missing structural diagonal entries")

    if j_pattern is None:
        rows = np.concatenate([y_row, y_row + n, y_row, y_row + n])
        cols = np.concatenate([y_col, y_col, y_col + n, y_col + n])
        j_pattern = csc_from_triplets(
            TripletList(rows, cols, np.zeros(len(rows)), 2 * n, 2 * n))

    positions = {}
    for x in (1, 2):
        for y in (1, 2):
            out = np.empty(ybus.nnz, dtype=np.int64)
            _find_positions(j_pattern.col_start, j_pattern.row_idx, y_row, y_col,
                            (x - 1) * n, (y - 1) * n, out)
            if np.any(out < 0):
                raise InconsistencyError(f"J pattern does not cover block ({x},{y})")
            if len(np.unique(out)) != len(out):
                raise InconsistencyError(f"block ({x},{y}) positions are not injective")
            positions[f"p{x}{y}"] = out

    return JacobianPlanYbus(
        j_pattern=j_pattern,
        ds_dtheta=pattern_clone_with_values(ybus, 0.0, dtype=np.complex128),
        ds_dvm=pattern_clone_with_values(ybus, 0.0, dtype=np.complex128),
        ybus_col_start=ybus.col_start,
        ybus_row_idx=ybus.row_idx,
        **positions,
    )


@nb.njit(cache=True)
def _two_pass(yp, yi, yv, dsa, dsv, i_bus, v, u):
    n = len(yp) - 1
    for k in range(len(yv)):
        dsa[k] = yv[k]
        dsv[k] = yv[k]
    for i in range(n):
        i_bus[i] = 0.0
    # pass 1: column scaling and current injection
    for j in range(n):
        vj = v[j]
        uj = u[j]
        for k in range(yp[j], yp[j + 1]):
            i_bus[yi[k]] += yv[k] * vj
            dsa[k] *= vj
            dsv[k] *= uj
    # pass 2: conjugation, diagonal terms, row scaling
    for j in range(n):
        for k in range(yp[j], yp[j + 1]):
            i = yi[k]
            dsv[k] = v[i] * np.conj(dsv[k])
            if i == j:
                dsa[k] -= i_bus[j]
                dsv[k] += np.conj(i_bus[j]) * u[j]
            # -1j: with +1j the angle derivative comes out negated
            dsa[k] = -1j * np.conj(dsa[k]) * v[i]


def derivatives_two_pass(model: YbusModel, plan: JacobianPlanYbus):
    """dS/dtheta and dS/dVm on the Ybus pattern, plus the bus currents.

    Writes into ``plan.ds_dtheta``, ``plan.ds_dvm`` and ``model.i_bus``.
    """
    y = model.ybus
    if not plan.matches(y):
        raise StalePlanError("plan was built for a different Ybus pattern")
    _two_pass(y.col_start, y.row_idx, y.nzval, plan.ds_dtheta.nzval, plan.ds_dvm.nzval,
              model.i_bus, model.v, model.u)
    return plan.ds_dtheta, plan.ds_dvm, model.i_bus


@nb.njit(cache=True)
def _align_to_pattern(src_cs, src_ri, src_v, dst_cs, dst_ri, dst_v):
    for j in range(len(dst_cs) - 1):
        k = dst_cs[j]
        end = dst_cs[j + 1]
        for s in range(src_cs[j], src_cs[j + 1]):
            r = src_ri[s]
            while k < end and dst_ri[k] < r:
                dst_v[k] = 0.0
                k += 1
            if k == end or dst_ri[k] != r:
                return False
            dst_v[k] = src_v[s]
            k += 1
        while k < end:
            dst_v[k] = 0.0
            k += 1
    return True


def _onto_pattern(m, pattern: CscMatrix) -> CscMatrix:
    m = m.tocsc()
    if not m.has_sorted_indices:
        m.sort_indices()
    out = pattern_clone_with_values(pattern, 0.0, dtype=np.complex128)
    if not _align_to_pattern(m.indptr.astype(np.int64), m.indices.astype(np.int64),
                             m.data.astype(np.complex128), out.col_start, out.row_idx, out.nzval):
        raise InconsistencyError("matrix product produced entries outside the Ybus pattern")
    return out


def derivatives_matmul(model: YbusModel):
    """Literal diagonal/sparse matrix products for dS/dtheta and dS/dVm.

    Slow baseline. Results are placed on the Ybus pattern so they can be
    compared position by position and assembled with the same plan.
    """
    y = model.scipy_ybus()
    v, u = model.v, model.u
    i_c = y @ v
    diag_v = sp.diags(v, format="csc")
    ds_dtheta = 1j * diag_v @ (sp.diags(np.conj(i_c), format="csc") - (y @ diag_v).conj())
    ds_dvm = sp.diags(np.conj(i_c) * u, format="csc") + diag_v @ (y @ sp.diags(u, format="csc")).conj()
    return _onto_pattern(ds_dtheta, model.ybus), _onto_pattern(ds_dvm, model.ybus)


@nb.njit(cache=True)
def _scatter_blocks(jv, p11, p12, p21, p22, dsa, dsv):
    for i in range(len(dsa)):
        jv[p11[i]] = dsa[i].real
    for i in range(len(dsv)):
        jv[p12[i]] = dsv[i].real
    for i in range(len(dsa)):
        jv[p21[i]] = dsa[i].imag
    for i in range(len(dsv)):
        jv[p22[i]] = dsv[i].imag


def assemble_jacobian_inplace(plan: JacobianPlanYbus, ds_dtheta: CscMatrix | None = None,
                              ds_dvm: CscMatrix | None = None) -> CscMatrix:
    """Copy the real/imag parts of both derivative matrices into ``plan.j_pattern``."""
    dsa = plan.ds_dtheta if ds_dtheta is None else ds_dtheta
    dsv = plan.ds_dvm if ds_dvm is None else ds_dvm
    if dsa.nnz != len(plan.p11) or dsv.nnz != len(plan.p12):
        raise StalePlanError("derivative matrices do not match the plan")
    _scatter_blocks(plan.j_pattern.nzval, plan.p11, plan.p12, plan.p21, plan.p22,
                    dsa.nzval, dsv.nzval)
    return plan.j_pattern


def _part(m: CscMatrix, values: np.ndarray) -> CscMatrix:
    return CscMatrix(m.n_rows, m.n_cols, m.col_start, m.row_idx, values)


def assemble_jacobian_concat(ds_dtheta: CscMatrix, ds_dvm: CscMatrix) -> CscMatrix:
    """Baseline: build J by concatenating the four real blocks."""
    return concat4(_part(ds_dtheta, ds_dtheta.nzval.real.copy()),
                   _part(ds_dvm, ds_dvm.nzval.real.copy()),
                   _part(ds_dtheta, ds_dtheta.nzval.imag.copy()),
                   _part(ds_dvm, ds_dvm.nzval.imag.copy()))
