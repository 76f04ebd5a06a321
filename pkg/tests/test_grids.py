import numpy as np
import pytest

from centrisk.diffops import derivative, fd_weights, integral, second_derivative
from centrisk.grids import PathGrid


def test_grid_validation():
    t = np.linspace(0, 1, 11)
    grid = PathGrid(t, {"a": np.ones(11)})
    assert grid.dt == pytest.approx(0.1)
    with pytest.raises(ValueError):
        PathGrid(t, {"a": np.ones(10)})
    with pytest.raises(ValueError):
        PathGrid(np.array([0.0, 0.1, 0.15, 0.3]), {})
    with pytest.raises(ValueError):
        PathGrid(np.array([0.0, 0.1, 0.1]), {})


def test_long_linspace_grid_accepted():
    # ULP-level jitter of linspace must pass the uniformity check.
    PathGrid(np.linspace(0.0, 1000.0, 10**6 + 1), {})


def test_csv_round_trip(tmp_path):
    t = np.linspace(0, 2, 21)
    rng = np.random.default_rng(1)
    grid = PathGrid(t, {"x0": rng.normal(size=21), "xbar": rng.normal(size=21)})
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == "t,x0,xbar"
    assert "\r" not in text
    back = PathGrid.from_csv(path)
    assert np.array_equal(back.t, grid.t)
    for name in grid.names():
        assert np.array_equal(back[name], grid[name])


def test_fd_weights_classic_stencils():
    assert np.allclose(fd_weights([-1, 0, 1], 1), [-0.5, 0.0, 0.5])
    assert np.allclose(fd_weights([-1, 0, 1], 2), [1.0, -2.0, 1.0])


@pytest.mark.parametrize("op,exact", [
    (derivative, lambda t: 3 * np.cos(3 * t)),
    (second_derivative, lambda t: -9 * np.sin(3 * t)),
])
def test_diffops_fourth_order(op, exact):
    errs = []
    for n in (81, 161):
        t = np.linspace(0, 2, n)
        err = np.max(np.abs(op(np.sin(3 * t), t[1] - t[0]) - exact(t)))
        errs.append(err)
    assert errs[0] / errs[1] > 12  # 4th order gives ~16


def test_integral_fourth_order():
    errs = []
    exact = (1 - np.cos(6)) / 3
    for n in (81, 161):
        t = np.linspace(0, 2, n)
        errs.append(abs(integral(np.sin(3 * t), t[1] - t[0]) - exact))
    assert errs[0] / errs[1] > 12
