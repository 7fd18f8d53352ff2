import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from isoplate import mesh as ms
from isoplate.dgspace import DGSpace

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def square_space(nx=2, ny=None, bounds=((0.0, 1.0), (0.0, 1.0)), sides=("left", "bottom"), split="crisscross"):
    ny = nx if ny is None else ny
    m = ms.build_structured(nx, ny, bounds, split)
    m = ms.classify_edges(m, ms.side_predicate(bounds, sides) if sides else None)
    return DGSpace(m)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def weak_force_space(n=10):
    return square_space(n, bounds=((0.0, 4.0), (0.0, 4.0)))


def fd_jacobian_error(space, seed=0, tau=0.8, h=1e-6):
    """Relative Frobenius gap between the assembled Newton Jacobian and central differences
    of the full residual, at a random state with a random Stiefel field G."""
    from isoplate import forms, solver, stiefel
    from isoplate.dgspace import FEFunction, M, S, V

    rng = np.random.default_rng(seed)
    n = space.mesh.n_cells
    problem = solver.PlateProblem(space, rng.standard_normal(3), forms.PenaltyParams(),
                                  forms.BoundaryData.compressed_strip(0.2))
    G = stiefel.random_stiefel(rng, n)
    L1, L2 = forms.assemble_l_h_blocks(space, G)
    dm = space.dofmap
    x0 = rng.standard_normal(dm.total)
    x0[dm.n_y : dm.n_y + dm.n_mu] *= 0.5

    def R(x):
        a, b, c = dm.split(x)
        return problem.residual(G, tau, FEFunction(V, a), FEFunction(M, b), FEFunction(S, c), L1, L2)

    J = problem.jacobian(G, tau, FEFunction(M, dm.split(x0)[1]), L1, L2).toarray()
    Jfd = np.empty_like(J)
    for j in range(dm.total):
        e = np.zeros(dm.total)
        e[j] = h
        Jfd[:, j] = (R(x0 + e) - R(x0 - e)) / (2 * h)
    # the exp block is where the nonlinearity lives; report it separately as well
    mu_rows = slice(dm.n_y, dm.n_y + dm.n_mu)
    full = np.linalg.norm(J - Jfd) / np.linalg.norm(J)
    block = np.linalg.norm(J[mu_rows, mu_rows] - Jfd[mu_rows, mu_rows]) / np.linalg.norm(J[mu_rows, mu_rows])
    return max(full, block)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
