import pytest
from hypothesis import given, settings, strategies as st

from axisonic.config import DEMO_CONFIG, RunConfig, format_config, load_config, parse_config
from axisonic.errors import ParseError, ValidationError


class TestParse:
    def test_demo_defaults(self):
        cfg = parse_config(DEMO_CONFIG)
        assert isinstance(cfg, RunConfig)
        assert cfg.gas.L0 == -2.0 and cfg.gas.gamma == 1.4
        assert cfg.force.kind == "linear" and cfg.force.calibrate
        assert (cfg.discretization.N_modes, cfg.discretization.Q_nodes, cfg.discretization.M_x1) == (12, 96, 160)
        assert cfg.sigma.levels == 40 and cfg.sigma.tol_sigma == 1e-8
        assert cfg.fixed_point.eps == 1e-3 and cfg.fixed_point.delta0_override is None
        assert cfg.inlet.power == 8
        assert cfg.outputs.formats == ("csv", "json", "dat", "svg")

    def test_keys_case_insensitive_and_comments(self):
        text = DEMO_CONFIG + "\n[discretization]\nN_MODES = 6   # fewer modes\nq_nodes = 24\n; a comment\n"
        cfg = parse_config(text)
        assert cfg.discretization.N_modes == 6 and cfg.discretization.Q_nodes == 24

    def test_lists_and_optionals(self):
        text = DEMO_CONFIG + "[fixed_point]\nsweep_eps = 1e-3, 5e-4\ndelta0_override = 0.05\n[outputs]\nformats = csv json\n"
        cfg = parse_config(text)
        assert cfg.fixed_point.sweep_eps == (1e-3, 5e-4)
        assert cfg.fixed_point.delta0_override == 0.05
        assert cfg.outputs.formats == ("csv", "json")


class TestErrors:
    def test_duplicate_key_has_line(self):
        with pytest.raises(ParseError) as info:
            parse_config(DEMO_CONFIG.replace("u0 = 0.5", "u0 = 0.5\nu0 = 0.4"))
        assert info.value.line == 5

    def test_key_outside_section(self):
        with pytest.raises(ParseError) as info:
            parse_config("gamma = 1.4\n" + DEMO_CONFIG)
        assert info.value.line == 1

    def test_bad_line(self):
        with pytest.raises(ParseError):
            parse_config(DEMO_CONFIG + "[sigma]\njust some words\n")

    @pytest.mark.parametrize("extra, key", [
        ("[gas2]\na = 1\n", "gas2"),
        ("[sigma]\nsigma1 = 1\n", "sigma.sigma1"),
        ("[sigma]\nlevels = many\n", "sigma.levels"),
        ("[discretization]\nn_modes = 40\nq_nodes = 100\n", "discretization.Q_nodes"),
        ("[fixed_point]\ndamping = 0\n", "fixed_point.damping"),
        ("[outputs]\nformats = csv pdf\n", "outputs.formats"),
    ])
    def test_validation_names_the_key(self, extra, key):
        with pytest.raises(ValidationError) as info:
            parse_config(DEMO_CONFIG + "\n" + extra)
        assert info.value.key == key

    def test_missing_required(self):
        with pytest.raises(ValidationError) as info:
            parse_config(DEMO_CONFIG.replace("gamma = 1.4\n", ""))
        assert info.value.key == "gas.gamma"
        with pytest.raises(ValidationError):
            parse_config("[gas]\ngamma=1.4\nrho0=1\nu0=0.5\nL0=-1\nL1=1\n")

    def test_physical_checks(self):
        with pytest.raises(ValidationError, match="gamma must exceed 1"):
            parse_config(DEMO_CONFIG.replace("gamma = 1.4", "gamma = 0.9"))
        with pytest.raises(ValidationError, match="subsonic"):
            parse_config(DEMO_CONFIG.replace("u0 = 0.5", "u0 = 1.5"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(tmp_path / "nope.cfg")


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(
    gamma=st.floats(1.05, 3.0, **finite),
    L0=st.floats(-10.0, -0.1, **finite),
    L1=st.floats(0.1, 10.0, **finite),
    N=st.integers(1, 32),
    extra_q=st.integers(0, 50),
    levels=st.integers(1, 200),
    eps=st.floats(0.0, 1e-2, **finite),
    sweep=st.lists(st.floats(1e-6, 1e-2, **finite), min_size=2, max_size=5),
    delta0=st.one_of(st.none(), st.floats(1e-4, 1.0, **finite)),
    calibrate=st.booleans(),
)
def test_format_parse_roundtrip(gamma, L0, L1, N, extra_q, levels, eps, sweep, delta0, calibrate):
    text = (f"[gas]\ngamma = {gamma!r}\nrho0 = 1.0\nu0 = 0.1\nL0 = {L0!r}\nL1 = {L1!r}\n"
            f"[force]\nkind = linear\ncalibrate = {'yes' if calibrate else 'no'}\n"
            f"[discretization]\nn_modes = {N}\nq_nodes = {4 * N + extra_q}\n"
            f"[sigma]\nlevels = {levels}\n"
            f"[fixed_point]\neps = {eps!r}\nsweep_eps = {', '.join(repr(v) for v in sweep)}\n"
            f"delta0_override = {'none' if delta0 is None else repr(delta0)}\n")
    cfg = parse_config(text)
    assert parse_config(format_config(cfg)) == cfg
