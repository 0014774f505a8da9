import numpy as np
import pytest

from gridinject.netcase import IndexedNetwork, load_case

BUNDLED = ("case14", "case118", "case300")


def make_net(n_b, branches=(), shunts=None, vm=None, va=None):
    """Build an IndexedNetwork directly.

    ``branches`` holds ``(f, t, y_series, y_sh, m, phi)`` tuples; ``y_sh`` is
    used at both terminals.
    """
    br = list(branches)
    col = lambda i, dtype: np.array([b[i] for b in br], dtype=dtype)
    return IndexedNetwork(
        n_b=n_b,
        from_idx=col(0, np.int64),
        to_idx=col(1, np.int64),
        y_series=col(2, np.complex128),
        y_sh_from=col(3, np.complex128),
        y_sh_to=col(3, np.complex128),
        tap_m=col(4, np.float64),
        tap_phi=col(5, np.float64),
        bus_shunt=np.zeros(n_b, complex) if shunts is None else np.asarray(shunts, complex),
        vm0=np.ones(n_b) if vm is None else np.asarray(vm, float),
        va0=np.zeros(n_b) if va is None else np.asarray(va, float),
        name="synthetic",
    )


@pytest.fixture
def two_bus():
    """Lossless line y_hk = -10j, v_h = 1 at 0.1 rad, v_k = 1 at 0."""
    return make_net(2, [(0, 1, -10j, 0j, 1.0, 0.0)], va=[0.1, 0.0])


@pytest.fixture(scope="session")
def case14():
    return load_case("case14")


@pytest.fixture(scope="session")
def case118():
    return load_case("case118")


@pytest.fixture(scope="session")
def case300():
    return load_case("case300")


@pytest.fixture(scope="session", params=BUNDLED)
def bundled(request):
    return load_case(request.param)


def random_state(net, seed, scale=0.05):
    rng = np.random.default_rng(seed)
    return (net.vm0 + rng.uniform(-scale, scale, net.n_b),
            net.va0 + rng.uniform(-scale, scale, net.n_b))
