import numpy as np
import pytest

from homctl import mimo, synthesis


def integrator_chain(n):
    """Controllable chain: d x_i/dt = x_{i+1}, d x_n/dt = u."""
    A = np.zeros((n, n))
    A[np.arange(n - 1), np.arange(1, n)] = 1.0
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    return A, B


def closed_form_gain_pair(mu, rho, x11=1.0):
    """One-parameter family of exact gain-equation solutions for the
    double integrator (X scaled by x11)."""
    X = x11 * np.array([
        [1.0, -rho * (1.0 - mu)],
        [-rho * (1.0 - mu), 7.0 * (2.0 - mu) ** 2 * rho ** 2 * (1.0 - mu) / 8.0],
    ])
    Y = rho ** 2 * (2.0 - mu) * (1.0 - mu) * x11 * np.array([
        [(8.0 - 7.0 * (2.0 - mu)) / 8.0, -7.0 * rho * (2.0 - mu) / 8.0],
    ])
    return X, Y


@pytest.fixture(scope="session")
def chain3():
    return integrator_chain(3)


@pytest.fixture(scope="session")
def chain2():
    return integrator_chain(2)


@pytest.fixture(scope="session")
def design_ft(chain3):
    """Finite-time triple integrator design (degree -0.25, rate 1)."""
    A, B = chain3
    return synthesis.build_controller(A, B, -0.25, 1.0)


@pytest.fixture(scope="session")
def design_fxt(chain3):
    """Nearly fixed-time triple integrator design (degree +0.25, rate 1)."""
    A, B = chain3
    return synthesis.build_controller(A, B, 0.25, 1.0)


@pytest.fixture(scope="session")
def design_db2(chain2):
    """Double integrator with the closed-form gain pair (degree -1/2, rate 2)."""
    A, B = chain2
    X, Y = closed_form_gain_pair(-0.5, 2.0)
    return synthesis.design_from_solution(A, B, -0.5, 2.0, X, Y)


@pytest.fixture(scope="session")
def design_db2_deg1(chain2):
    """Double integrator, uniformly bounded-time design (degree -1, rate 2)."""
    A, B = chain2
    X, Y = closed_form_gain_pair(-1.0, 2.0)
    return synthesis.design_from_solution(A, B, -1.0, 2.0, X, Y)


def cascade_plant():
    """Triple integrator driven by a double integrator through one coupling."""
    A3, B3 = integrator_chain(3)
    A2, B2 = integrator_chain(2)
    A = np.zeros((5, 5))
    A[:3, :3] = A3
    A[3:, 3:] = A2
    A[0, 3] = 1.0
    B = np.zeros((5, 2))
    B[:3, 0:1] = B3
    B[3:, 1:2] = B2
    return A, B


@pytest.fixture(scope="session")
def cascade52():
    A, B = cascade_plant()
    skeleton = mimo.decompose(A, B, [3, 2])
    return mimo.cascade_design(skeleton, [-0.25, -1.0], [1.0, 2.0])
