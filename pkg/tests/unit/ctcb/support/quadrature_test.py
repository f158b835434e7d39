"""Quadrature module unit tests."""
import numpy as np
import pytest
from ctcb.support.quadrature import integrate, midpoint_grid


@pytest.mark.parametrize(
    ("a", "b", "step", "cells"),
    [(0.0, 1.0, 0.01, 100), (0.0, 3.0, 0.01, 300), (1.0, 1.25, 0.1, 3), (0.0, 0.004, 0.01, 1)],
)
def test_midpoint_grid(a: float, b: float, step: float, cells: int) -> None:
    """Test cell counts, node placement and weights."""
    nodes, weights = midpoint_grid(a, b, step)
    assert nodes.size == cells
    assert weights.sum() == pytest.approx(b - a)
    assert nodes[0] == pytest.approx(a + 0.5 * (b - a) / cells)


def test_empty_interval() -> None:
    """Test reversed and empty intervals."""
    assert midpoint_grid(2.0, 1.0)[0].size == 0
    assert integrate(lambda t: t, 1.0, 1.0) == 0.0
    np.testing.assert_array_equal(integrate(lambda t: np.ones((t.size, 3)), 2.0, 1.0), np.zeros(3))


def test_integrate_exact_for_linear() -> None:
    """Test the midpoint rule is exact on linear integrands."""
    assert integrate(lambda t: 3.0 * t + 1.0, 0.0, 2.0) == pytest.approx(8.0, abs=1e-12)


def test_integrate_vector() -> None:
    """Test vector integrands integrate per component."""
    value = integrate(lambda t: np.column_stack([np.ones_like(t), np.exp(-t)]), 0.0, 5.0)
    np.testing.assert_allclose(value, [5.0, 1.0 - np.exp(-5.0)], rtol=1e-5)


def test_integrate_smooth() -> None:
    """Test the error of the rule on a smooth integrand is second order in the step."""
    exact = 1.0 - np.cos(1.0)
    coarse = abs(integrate(np.sin, 0.0, 1.0, 0.1) - exact)
    fine = abs(integrate(np.sin, 0.0, 1.0, 0.05) - exact)
    assert fine == pytest.approx(coarse / 4.0, rel=0.01)
