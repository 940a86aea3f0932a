import numpy as np
import pytest

from latentopt.latent import TrainConfig, train
from latentopt.thermal import BuildingModel, DisturbanceProfile, generate_dataset, make_desk_building


def toy_building(zones=2, kappa=0.0, conductance=0.2, **kw):
    U = np.zeros((zones, zones))
    for i in range(zones - 1):
        U[i, i + 1] = U[i + 1, i] = conductance
    return BuildingModel(np.full(zones, 2.0), U, np.full(zones, 0.1), np.full(zones, 0.5), kappa=kappa, **kw)


@pytest.fixture(scope="session")
def small_building():
    return make_desk_building(zones=3, seed=1)


@pytest.fixture(scope="session")
def small_data(small_building):
    return generate_dataset(small_building, DisturbanceProfile(seed=1), 3)


@pytest.fixture(scope="session")
def small_model(small_data):
    cfg = TrainConfig(epochs=3, latent_dims=(2, 2, 3), state_hidden=(6,), action_hidden=(6,), disturbance_hidden=(8,), dynamics_hidden=(8,))
    return train(small_data, cfg).model


# filled by test_acceptance: criterion number -> (passed, detail)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
