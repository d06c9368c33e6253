import numpy as np
import pytest

from dqdnoise.model import ModelParams, build_hamiltonian, build_jc_hamiltonian, build_operators
from dqdnoise.steady import solve_steady_state
from dqdnoise.superop import build_liouvillian


def transport_bundle(params: ModelParams, hamiltonian: str = "full"):
    """(ops, liouvillian, steady state) for one parameter point."""
    space = params.space()
    ops = build_operators(space)
    build = build_jc_hamiltonian if hamiltonian == "jc" else build_hamiltonian
    h = build(params, space, ops)
    liouv = build_liouvillian(h, params)
    return ops, liouv, solve_steady_state(liouv)


@pytest.fixture(scope="session")
def fig2_params():
    return ModelParams(epsilon=0.0, delta=0.5, g=0.2, omega_b=1.0,
                       gamma_L=0.01, gamma_R=0.01, gamma_b=0.05,
                       temperature=0.0, n_fock=6)


@pytest.fixture(scope="session")
def fig2_bundle(fig2_params):
    return transport_bundle(fig2_params)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
