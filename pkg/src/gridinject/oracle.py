"""Dense reference computations used only for verification.

Nothing here is on a timed path. Dense matrices are plain 2-D numpy arrays
(row-major). Stamping is written out again here on purpose, so the oracle
does not share code with either method it checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OracleRefusal
from .netcase import IndexedNetwork
from .sparse import CscMatrix

DEFAULT_CAP = 5000


def _check_cap(n_b: int, cap: int) -> None:
    if n_b > cap:
        raise OracleRefusal(f"dense oracle refuses {n_b} buses (cap {cap})")


def dense_ybus(net: IndexedNetwork, cap: int = DEFAULT_CAP) -> np.ndarray:
    _check_cap(net.n_b, cap)
    y = np.zeros((net.n_b, net.n_b), dtype=np.complex128)
    y[np.diag_indices(net.n_b)] += net.bus_shunt
    tap = net.tap_m * np.exp(1j * net.tap_phi)
    f, t, ys = net.from_idx, net.to_idx, net.y_series
    np.add.at(y, (f, f), (ys + net.y_sh_from) / (tap * np.conj(tap)))
    np.add.at(y, (f, t), -ys / np.conj(tap))
    np.add.at(y, (t, f), -ys / tap)
    np.add.at(y, (t, t), ys + net.y_sh_to)
    return y


def _injections(y: np.ndarray, vm, va) -> np.ndarray:
    v = np.asarray(vm) * np.exp(1j * np.asarray(va))
    return v * np.conj(y @ v)


def dense_power_oracle(net: IndexedNetwork, vm, va, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Complex bus injections from a densely stamped admittance matrix."""
    return _injections(dense_ybus(net, cap), vm, va)


def finite_difference_jacobian(net: IndexedNetwork, vm, va, h: float = 1e-6,
                               cap: int = DEFAULT_CAP) -> np.ndarray:
    """Central-difference J of ``[P; Q]`` w.r.t. ``[va; vm]`` (angle columns first)."""
    if not h > 0:
        raise DomainError("step must be positive")
    y = dense_ybus(net, cap)
    n = net.n_b
    vm = np.asarray(vm, dtype=np.float64)
    va = np.asarray(va, dtype=np.float64)
    jac = np.empty((2 * n, 2 * n))
    for col in range(2 * n):
        up_m, dn_m, up_a, dn_a = vm.copy(), vm.copy(), va.copy(), va.copy()
        if col < n:
            up_a[col] += h
            dn_a[col] -= h
        else:
            up_m[col - n] += h
            dn_m[col - n] -= h
        ds = (_injections(y, up_m, up_a) - _injections(y, dn_m, dn_a)) / (2 * h)
        jac[:n, col] = ds.real
        jac[n:, col] = ds.imag
    return jac


@dataclass(frozen=True)
class Mismatch:
    """Result of :func:`compare_sparse_dense`."""

    max_abs: float
    max_rel: float
    worst: tuple[int, int]
    passed: bool

    def __str__(self):
        state = "ok" if self.passed else "FAIL"
        return (f"{state}: max abs {self.max_abs:.3e}, max rel {self.max_rel:.3e} "
                f"at {self.worst}")


def compare_sparse_dense(j: CscMatrix, d: np.ndarray, rel_tol: float = 1e-5,
                         abs_floor: float = 1e-7) -> Mismatch:
    """Compare every position of ``j`` (absent entries are 0) against ``d``.

    An entry passes when ``|j - d| <= max(rel_tol * |d|, abs_floor)``.
    ``max_rel`` is taken over entries with ``|d| > abs_floor``.
    """
    d = np.asarray(d)
    if d.shape != j.shape:
        raise DomainError(f"shape {j.shape} vs {d.shape}")
    diff = np.abs(j.to_dense() - d)
    mag = np.abs(d)
    if diff.size == 0:
        return Mismatch(0.0, 0.0, (0, 0), True)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    big = mag > abs_floor
    max_rel = float((diff[big] / mag[big]).max()) if big.any() else 0.0
    passed = bool(np.all(diff <= np.maximum(rel_tol * mag, abs_floor)))
    return Mismatch(float(diff.max()), max_rel, (int(worst[0]), int(worst[1])), passed)
