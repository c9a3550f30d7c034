import pytest

from plasmonls import ConfigurationError, MINUS
from plasmonls.config import load_config, parse_config

FULL = """
[run]
seed = 7
workers = 2

[medium]
shape = box
size = 0.6, 0.6, 0.3
h = 0.3
dielectric = drude
plasma_freq = 1.2   # inline comment
damping = 0.2

[grid]
n_k = 3
n_theta = 2
n_eta = 2
n_nu = 3
k_max = 5.0
nu_max = 4.0
nu_lo = 0.4

[solver]
sign = minus
eta_rel = 8, 4, 2

[study]
scales = 0.2, 0.1, 0.05
points = 2, 0, 0; 0, 2, 1
"""


def test_defaults():
    cfg = parse_config("")
    assert cfg.seed == 42
    assert cfg.medium().n_voxels == 1
    reg = cfg.regularization()
    assert reg.eta_scale == "grid" and reg.eta_rel == (4.0, 2.0)
    assert cfg.grid().n_k == 4


def test_full_parse():
    cfg = parse_config(FULL)
    assert cfg.seed == 7 and cfg.workers() == 2 and cfg.workers(0) >= 1
    assert cfg.medium().n_voxels == 4
    assert cfg["medium"]["plasma_freq"] == 1.2
    reg = cfg.regularization()
    assert reg.sign == MINUS and reg.eta_rel == (8.0, 4.0, 2.0)
    assert cfg["study"]["points"] == ((2.0, 0.0, 0.0), (0.0, 2.0, 1.0))
    assert cfg.dense_grid().n_nu == 2


@pytest.mark.parametrize("text,match", [
    ("[mystery]\na = 1\n", "unknown config section"),
    ("[run]\nseeed = 3\n", "unknown config key"),
    ("[run]\nseed = three\n", "bad value"),
    ("[grid]\npv_mode = perhaps\n", "bad value"),
    ("[solver]\nsign = sideways\n", "bad value"),
    ("[grid]\nn_k = 0\n", "positive"),
    ("[medium]\nshape = sphere\n", "missing dimensions"),
    ("[medium]\ndielectric = constant\n", "required"),
    ("[study]\npoints = 1, 2\n", "three coordinates"),
    ("[run\nseed = 1\n", "syntax"),
    ("[solver]\neta_rel = 1e-3, 1e-2\n", "decreasing"),
])
def test_invalid_configs(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_hash_is_stable_and_sensitive():
    a = parse_config(FULL)
    b = parse_config(FULL.replace("# inline comment", ""))
    c = parse_config(FULL.replace("seed = 7", "seed = 8"))
    assert a.hash == b.hash
    assert a.hash != c.hash
    assert len(a.hash) == 16


def test_tabulated_dielectric_relative_path(tmp_path):
    (tmp_path / "eps.csv").write_text("# nu, eps_i\n0.1,0.5\n2.0,0.5\n6.0,0.1\n")
    (tmp_path / "run.ini").write_text("[medium]\ndielectric = tabulated\ntable = eps.csv\n")
    cfg = load_config(str(tmp_path / "run.ini"))
    assert cfg.medium().eps_i_table([1.0])[0, 0] == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "missing.ini"))


def test_lorentz_oscillators():
    cfg = parse_config("[medium]\ndielectric = lorentz\noscillators = 1.0, 0.1, 0.0; 0.5, 0.05, 1.5\n")
    assert len(cfg.dielectric().terms) == 2
