from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from weylcalc.connection import WeylManifold
from weylcalc.mapping import ConformalMapping

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

XYZ = ["x", "y", "z"]
CURVED_POINT = (0.3, -0.2, 0.15)


@pytest.fixture
def curved3() -> WeylManifold:
    return WeylManifold.build(
        XYZ,
        [["1", "0", "0"], ["0", "1 + x^2", "0"], ["0", "0", "1 + y^2"]],
        ["y*z/3", "0.2 + x^2/4", "x/7"],
        ["y^2/2 + z/3", "x*z", "1/3 + x/5"],
        name="curved3",
    )


@pytest.fixture
def general_mapping() -> ConformalMapping:
    return ConformalMapping.build(XYZ, ["y/3 + x*z/5", "z^2/4", "x"], ["x*y/2", "0.25", "y/3"])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def flat(n: int, T=None, S=None) -> WeylManifold:
    coords = ["x", "y", "z", "w"][:n]
    g = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    return WeylManifold.build(coords, g, T, S)
