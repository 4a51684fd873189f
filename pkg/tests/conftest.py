import math

import pytest

import hopflab as hl


@pytest.fixture(scope="session")
def hopf_family():
    return hl.HOPF_FAMILY


@pytest.fixture(scope="session")
def wavy_family():
    """Two-harmonic family used wherever a non-symmetric Phi is needed."""
    return hl.OneDFamily(
        zeta=0.0, phi=hl.TrigPolynomial(sin_coeffs=(1.0, 0.1)))


@pytest.fixture(scope="session")
def default_system():
    return hl.HopfSystem(L=10.0)


@pytest.fixture(scope="session")
def certified_100():
    """Certified pair at L_lo = 100 with the full 10^4 horizon."""
    a, L, cert = hl.find_misiurewicz_pair(hl.HOPF_FAMILY, 100.0)
    return a, L, cert


@pytest.fixture(scope="session")
def certified_300():
    """Shorter-horizon pair used by the recovery/distortion estimates."""
    a, L, cert = hl.find_misiurewicz_pair(
        hl.HOPF_FAMILY, 300.0, hl.SearchConfig(horizon_N=1000, depth_cap=12))
    return a, L, cert


@pytest.fixture(scope="session")
def certified_40():
    """Moderate-expansion pair for the parameter-derivative growth checks."""
    a, L, cert = hl.find_misiurewicz_pair(
        hl.HOPF_FAMILY, 40.0, hl.SearchConfig(horizon_N=500, depth_cap=12))
    return a, L, cert
