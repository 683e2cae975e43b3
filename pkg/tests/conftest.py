import numpy as np
import pytest

from schurdirac import assemble, positivity_margin


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def random_block_operator(rng, n, margin_target=None, coupling=1.0):
    """Random structured instance; margin_target pins lambda_min(M_0)."""
    a = rng.standard_normal((n, n))
    S = symmetrize(a @ a.T / n + 0.5 * np.eye(n))
    T = coupling * rng.standard_normal((n, n)) / np.sqrt(n)
    P = symmetrize(rng.standard_normal((n, n)))
    B = assemble(P, T, S)
    if margin_target is None:
        return B
    shift = margin_target - positivity_margin(B, 0.0)
    return assemble(P + shift * np.eye(n), T, S)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
