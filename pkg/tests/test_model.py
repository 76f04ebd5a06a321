import pytest
from hypothesis import given, strategies as st

from centrisk.errors import ConfigError
from centrisk.model import (
    ControlParams,
    ModelParams,
    SimConfig,
    default_horizon,
    format_config,
    parse_config,
)

TABLE_SIM = "h0=0.5\nsigma0=0.1\ntheta0=0.1\nsigma=1.0\ntheta=10\nN=100\nT=1000\ndt=0.001\nseed=1\nh=0"
TABLE_CONTROL = (
    "h0=0.7\nsigma0=0.5\ntheta0=1.0\nsigma=5.0\ntheta=1.0\nN=100\nT=1000\ndt=0.01\nh=0\nseed=1"
)


def test_parse_simulation_table():
    params, sim, ctrl = parse_config(TABLE_SIM)
    assert params == ModelParams(
        h0=0.5, h=0.0, sigma0=0.1, sigma=1.0, theta0=0.1, theta=10.0, n_agents=100
    )
    assert sim == SimConfig(t_final=1000.0, dt=0.001, seed=1, burn_in_fraction=0.1)
    assert ctrl is None


def test_parse_control_table():
    params, sim, ctrl = parse_config(TABLE_CONTROL)
    assert params.h0 == 0.7
    assert params.sigma == 5.0
    assert params.theta == 1.0
    assert sim.t_final == 1000.0 and sim.dt == 0.01
    assert ctrl is None


def test_sigma_zero_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config(TABLE_SIM.replace("sigma=1.0", "sigma=0"))
    assert err.value.key == "sigma"


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config(TABLE_SIM + "\nbogus=1")
    assert err.value.key == "bogus"


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        parse_config(TABLE_SIM + "\nh0=0.4")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError):
        parse_config("h0 0.5")


def test_missing_required_key():
    with pytest.raises(ConfigError) as err:
        parse_config("h0=0.5")
    assert err.value.key in ("sigma0", "sigma", "theta0", "theta", "N", "T", "dt", "seed")


def test_comments_and_blank_lines():
    text = "# comment\n\n" + TABLE_SIM + "  # trailing\n"
    params, _, _ = parse_config(text)
    assert params.h0 == 0.5


def test_h0_without_theta_c_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config(TABLE_SIM + "\nH0=1.0")
    assert err.value.key == "H0"


def test_control_params_defaults():
    params, _, ctrl = parse_config(TABLE_CONTROL + "\ntheta_c=10")
    assert ctrl is not None
    assert ctrl.theta_c == 10.0
    assert ctrl.h_cap0 == pytest.approx(2 * params.h0)
    assert ctrl.horizon == default_horizon(10.0, params.theta)


def test_dt_must_divide_t():
    with pytest.raises(ConfigError) as err:
        parse_config(TABLE_SIM.replace("dt=0.001", "dt=0.0007"))
    assert err.value.key == "dt"


def test_round_trip_exact():
    params, sim, ctrl = parse_config(TABLE_CONTROL + "\ntheta_c=2.5\nH0=0.3")
    text = format_config(params, sim, ctrl)
    again = parse_config(text)
    assert again == (params, sim, ctrl)


@given(
    h0=st.floats(0, 10),
    sigma0=st.floats(0, 5),
    sigma=st.floats(0.01, 5),
    theta0=st.floats(0, 20),
    theta=st.floats(0, 20),
    n=st.integers(1, 10**6),
    seed=st.integers(0, 2**64 - 1),
)
def test_round_trip_property(h0, sigma0, sigma, theta0, theta, n, seed):
    params = ModelParams(
        h0=h0, h=0.0, sigma0=sigma0, sigma=sigma, theta0=theta0, theta=theta, n_agents=n
    )
    sim = SimConfig(t_final=10.0, dt=0.01, seed=seed)
    assert parse_config(format_config(params, sim)) == (params, sim, None)


def test_invalid_records_raise():
    with pytest.raises(ConfigError):
        ModelParams(h0=-1, h=0, sigma0=0, sigma=1, theta0=0, theta=0, n_agents=1)
    with pytest.raises(ConfigError):
        SimConfig(t_final=1.0, dt=2.0, seed=0)
    with pytest.raises(ConfigError):
        ControlParams(theta_c=0.0, h_cap0=0.0, horizon=1.0)
