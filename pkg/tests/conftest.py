import pytest
from hypothesis import HealthCheck, settings

from redshiftai.model import SR88_WAVENUMBER, Constants, Species

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def sr():
    """Strontium-88 constants and species in SI units."""
    return Constants(), Species()


@pytest.fixture
def scaled():
    """Scaled units (c = 10, hbar = g = 1) with a unit reference mass."""
    constants = Constants.scaled()
    return constants, Species.with_mass_defect(1.0, 1e-4, constants)


@pytest.fixture
def k_sr():
    return SR88_WAVENUMBER
