import numpy as np
import pytest

from hilltrunc import oracle, propagate
from hilltrunc._backend import available_backends
from hilltrunc.coeffs import (ConstantShift, FreeParticle, KronigPenney, Mathieu,
                              PeriodicCoefficients, PiecewiseConstant)

BACKENDS = sorted(available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    mod = available_backends()[request.param]
    monkeypatch.setattr(propagate, "kernels", mod)
    monkeypatch.setattr(oracle, "kernels", mod)
    return mod


@pytest.fixture(scope="session")
def free():
    return PeriodicCoefficients(1.0, FreeParticle())


@pytest.fixture(scope="session")
def shifted():
    return PeriodicCoefficients(1.0, ConstantShift(3.0))


@pytest.fixture(scope="session")
def kp():
    return PeriodicCoefficients(1.0, KronigPenney(10.0, 0.5))


@pytest.fixture(scope="session")
def mathieu():
    return PeriodicCoefficients(1.0, Mathieu(20.0))


@pytest.fixture(scope="session")
def stepped_p():
    # p, q and s all jump; exercises the general segment path
    return PeriodicCoefficients(2.0, PiecewiseConstant(((0.7, 1.0, 2.0, 1.0),
                                                        (0.8, 2.5, -1.0, 0.5),
                                                        (0.5, 0.8, 4.0, 1.5))))


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
