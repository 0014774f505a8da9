import numpy as np
import pytest

from gridinject.errors import DomainError, OracleRefusal
from gridinject.oracle import (
    compare_sparse_dense,
    dense_power_oracle,
    dense_ybus,
    finite_difference_jacobian,
)
from gridinject.sparse import CscMatrix

from conftest import make_net


def test_flat_lossless_is_zero():
    net = make_net(3, [(0, 1, -5j, 0j, 1.0, 0.0), (1, 2, -8j, 0j, 1.0, 0.0)])
    s = dense_power_oracle(net, net.vm0, net.va0)
    np.testing.assert_allclose(s, 0, atol=1e-15)


def test_two_bus_hand_values(two_bus):
    s = dense_power_oracle(two_bus, two_bus.vm0, two_bus.va0)
    assert s[0].real == pytest.approx(10 * np.sin(0.1), abs=1e-12)
    assert s[0].imag == pytest.approx(10 * (1 - np.cos(0.1)), abs=1e-12)
    assert s[0].real == pytest.approx(0.998334, abs=1e-6)
    assert s[0].imag == pytest.approx(0.049958, abs=1e-6)


def test_shunt_only_bus():
    y = 0.3 + 0.19j
    v = 1.05
    net = make_net(1, shunts=[y], vm=[v])
    s = dense_power_oracle(net, net.vm0, net.va0)
    assert s[0] == pytest.approx(v * v * np.conj(y), abs=1e-15)
    jac = finite_difference_jacobian(net, net.vm0, net.va0)
    # d/dv of v^2 conj(y)
    assert jac[0, 1] == pytest.approx(2 * v * y.real, abs=1e-7)
    assert jac[1, 1] == pytest.approx(2 * v * np.imag(np.conj(y)), abs=1e-7)
    assert jac[1, 1] == pytest.approx(-2 * v * 0.19, abs=1e-7)
    np.testing.assert_allclose(jac[:, 0], 0, atol=1e-12)


def test_phase_shifter_stamp_is_asymmetric():
    net = make_net(2, [(0, 1, 1 - 10j, 0j, 1.05, 0.2)])
    y = dense_ybus(net)
    assert y[0, 1] != y[1, 0]
    assert abs(y[0, 1]) == pytest.approx(abs(y[1, 0]))


def test_cap_refuses(case14):
    with pytest.raises(OracleRefusal):
        dense_power_oracle(case14, case14.vm0, case14.va0, cap=10)
    with pytest.raises(OracleRefusal):
        finite_difference_jacobian(case14, case14.vm0, case14.va0, cap=10)


def test_step_must_be_positive(case14):
    with pytest.raises(DomainError):
        finite_difference_jacobian(case14, case14.vm0, case14.va0, h=0.0)


def test_fd_second_order_convergence(case14):
    """Halving h shrinks the change between successive estimates about fourfold."""
    vm, va = case14.vm0, case14.va0
    j1, j2, j3 = (finite_difference_jacobian(case14, vm, va, h=h) for h in (2e-2, 1e-2, 5e-3))
    ratio = np.abs(j1 - j2).max() / np.abs(j2 - j3).max()
    assert 3.5 < ratio < 4.5


def test_compare_self_is_zero():
    m = CscMatrix.from_dense(np.array([[1.0, 0.0], [2.0, 3.0]]))
    r = compare_sparse_dense(m, m.to_dense())
    assert r.max_abs == 0 and r.max_rel == 0 and r.passed


def test_compare_single_perturbation():
    d = np.array([[1.0, 0.0], [2.0, 3.0]])
    m = CscMatrix.from_dense(d)
    eps = 1e-4
    d2 = d.copy()
    d2[0, 1] += eps
    r = compare_sparse_dense(m, d2, rel_tol=1e-5, abs_floor=1e-7)
    assert r.max_abs == pytest.approx(eps)
    assert r.worst == (0, 1)
    assert not r.passed


def test_compare_dimension_mismatch():
    m = CscMatrix.from_dense(np.eye(2))
    with pytest.raises(DomainError):
        compare_sparse_dense(m, np.eye(3))
