import pytest

from turing_passage.config import (ExperimentSpec, format_nu, parse_config, parse_config_text,
                                   parse_nu, validate)
from turing_passage.numerics import ConfigurationError, DomainError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    spec, warnings = parse_config(p)
    assert (spec.eps, spec.order, spec.rho_in, spec.zeta) == (1e-3, 5, 1.0, 0.1)
    assert spec.sections.rho_mid == pytest.approx(0.1 ** -0.5)
    assert warnings == []


def test_negative_eps_names_constraint():
    with pytest.raises(DomainError, match=r"eps must be in \(0,1\)"):
        validate(parse_config_text("[physics]\neps = -1\n"))


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="bogus"):
        parse_config_text("[grid]\nbogus = 3\n")
    with pytest.raises(ConfigurationError, match="extra"):
        parse_config_text("[extra]\nx = 1\n")


def test_thin_delay_margin_warns():
    spec = parse_config_text("experiment = delay\n[sections]\nrho_out = 0.9\n")
    warnings = validate(spec)
    assert len(warnings) == 1 and "thin" in warnings[0]
    assert validate(parse_config_text("[sections]\nrho_out = 0.9\n")) == []
    assert validate(parse_config_text("delay = true\n[sections]\nrho_out = 0.5\n")) == []


def test_sections_and_values():
    spec = parse_config_text("order = 4\nseed = 7\n[physics]\neps = 0.002\nnu = 1:0.002, 2:0.1+0.2j\n"
                             "[grid]\nperiods = 3\n[run]\neps_list = 0.004, 0.002\n")
    assert spec.order == 4 and spec.seed == 7 and spec.periods == 3
    assert spec.nu == {1: 0.002, 2: 0.1 + 0.2j}
    assert spec.eps_list == (0.004, 0.002)
    validate(spec)


@pytest.mark.parametrize("text,msg", [
    ("order = 7", "order"), ("convention = other", "convention"),
    ("stop_at = end", "stop_at"), ("[physics]\nnu = 0:1j", "nu"),
    ("[physics]\neps = 0.5", "rho_in"), ("[grid]\nh = 0", "step"),
])
def test_domain_errors(text, msg):
    with pytest.raises(DomainError, match=msg):
        validate(parse_config_text(text))


def test_bad_values():
    with pytest.raises(ConfigurationError):
        parse_config_text("order = four")
    with pytest.raises(ConfigurationError):
        parse_nu("1 0.3")


def test_nu_round_trip_and_hash():
    nu = {1: 0.002 + 0j, 2: 0.1 + 0.2j, 0: -0.5 + 0j}
    assert parse_nu(format_nu(nu)) == nu
    a, b = ExperimentSpec(), ExperimentSpec(out_dir="elsewhere")
    assert a.spec_hash() == b.spec_hash()
    assert a.spec_hash() != ExperimentSpec(seed=1).spec_hash()
