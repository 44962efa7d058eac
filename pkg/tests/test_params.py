import math

import pytest

from amchooser import MarketParams, NumericsConfig, RejectedParams, load_config, validate
from amchooser.params import default_truncation, format_config, parse_config_text

from conftest import market


def test_standard_accepted(std_cfg):
    assert std_cfg.market == MarketParams.standard()
    assert std_cfg.numerics.M == 800 and std_cfg.numerics.N == 400


@pytest.mark.parametrize(
    "changes, message",
    [
        (dict(K_p=110.0, K_c=90.0), "K_p < K_c violated"),
        (dict(T=1.0, T_c=1.0, T_p=1.0), "T < min(T_c,T_p) violated"),
        (dict(r=0.0), "r > 0 violated"),
        (dict(sigma=-0.1), "sigma > 0 violated"),
        (dict(q=-0.01), "q >= 0 violated"),
        (dict(K_p=0.0), "K_p > 0 violated"),
        (dict(T=0.0), "T > 0 violated"),
        (dict(r=math.nan), "finite"),
    ],
)
def test_rejections(changes, message):
    with pytest.raises(RejectedParams, match=message.replace("(", r"\(").replace(")", r"\)")):
        validate(market(**changes))


def test_q_zero_needs_flag():
    with pytest.raises(RejectedParams, match="q > 0 required"):
        validate(market(q=0.0))
    cfg = validate(market(q=0.0), degenerate_q0=True)
    assert cfg.degenerate_q0


def test_default_truncation_rule(std_market):
    expected = max(math.log(max(1.0, 0.05 / 0.02) * 110.0), abs(math.log(min(1.0, 0.05 / 0.02) * 90.0))) + 3.0
    assert default_truncation(std_market) == pytest.approx(expected)
    assert validate(std_market).numerics.L == pytest.approx(expected)


def test_step_count_made_commensurable():
    cfg = validate(market(T=0.5, T_c=0.8, T_p=1.0), NumericsConfig(N=7))
    gap_c = (0.8 - 0.5) / cfg.dt
    gap_p = (1.0 - 0.5) / cfg.dt
    assert abs(gap_c - round(gap_c)) < 1e-9 and abs(gap_p - round(gap_p)) < 1e-9
    assert cfg.numerics.N >= 7
    assert cfg.call_offset == round(gap_c) and cfg.put_offset == round(gap_p)


def test_validate_idempotent(std_cfg):
    again = validate(std_cfg)
    assert again == std_cfg


def test_numerics_rejections(std_market):
    for kw, msg in [(dict(M=2), "grid_m"), (dict(N=0), "grid_n"), (dict(theta=0.3), "theta"),
                    (dict(eps=0.0), "eps"), (dict(boundary_mode="robin"), "boundary_mode"),
                    (dict(psor_omega=2.0), "psor_omega")]:
        with pytest.raises(RejectedParams, match=msg):
            validate(std_market, NumericsConfig(**kw))


def test_config_round_trip(tmp_path, std_cfg):
    text = format_config(std_cfg)
    path = tmp_path / "std.cfg"
    path.write_text("# standard market\n" + text)
    assert load_config(path) == std_cfg


def test_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="config not found"):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(RejectedParams, match="unknown key"):
        parse_config_text("volatility = 0.2\n")
    with pytest.raises(RejectedParams, match="bad value"):
        parse_config_text("r = fast\n")
    p = tmp_path / "partial.cfg"
    p.write_text("r = 0.05\n")
    with pytest.raises(RejectedParams, match="missing market keys"):
        load_config(p)


def test_config_keys_exact():
    from amchooser.params import CONFIG_KEYS

    assert list(CONFIG_KEYS) == ["r", "q", "sigma", "k_call", "k_put", "t_chooser", "t_call", "t_put",
                                 "grid_l", "grid_m", "grid_n", "theta", "eps", "boundary_mode"]
