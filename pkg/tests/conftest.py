import pytest

from mtsurf import (
    builtin_family,
    find_parallel_H,
    solve_mt_rotational,
    solve_mt_screw,
)
from mtsurf.families import rotational_seed


@pytest.fixture(scope="session")
def plane():
    return builtin_family("plane")


@pytest.fixture(scope="session")
def lightlike_graph():
    return builtin_family("lightlike-graph")


@pytest.fixture(scope="session")
def light_cone_slice():
    return builtin_family("light-cone-slice")


@pytest.fixture(scope="session")
def mt_cylinder():
    # rotational template defaults to the flat marginally trapped cylinder
    return builtin_family("rotational")


@pytest.fixture(scope="session")
def mt_rotational():
    """Generic marginally trapped rotational surface (non-parallel H)."""
    return solve_mt_rotational()


@pytest.fixture(scope="session")
def mt_rotational_b():
    """A second, independently seeded non-parallel fixture."""
    return solve_mt_rotational(
        initial_state=rotational_seed(rho0=1.2, psi=0.25, chi=-0.15),
        span=1.1,
        kappa=(0.9, -0.35),
    )


@pytest.fixture(scope="session")
def mt_screw():
    """Screw-invariant marginally trapped surface; nu is nonzero here."""
    return solve_mt_screw()


@pytest.fixture(scope="session")
def parallel_h():
    """Parallel-H marginally trapped surface found by the compass search."""
    return find_parallel_H("cmc-hyperboloid")
