import numpy as np
import pytest

from particle_learning.config import load_config, parse_config
from particle_learning.errors import ConfigError, InvalidData
from particle_learning.io import isclose_rows, read_csv, read_observations, write_csv

BASE = """
[model]
name = local_level
sigma2 = 1.0
tau2 = 0.1
learn = sigma2, tau2
prior_sigma2 = 5, 4
"""


def test_parse_minimal():
    cfg = parse_config(BASE)
    assert cfg.model.name == "local_level"
    assert cfg.model.kwargs["learn"] == ("sigma2", "tau2")
    assert cfg.model.kwargs["prior_sigma2"] == (5.0, 4.0)
    assert cfg.filter.algorithm == "PL" and cfg.T == 100 and cfg.seed == 0
    m = cfg.model.build()
    assert m.learn == ("sigma2", "tau2")


def test_filter_blocks_and_sections():
    cfg = parse_config(BASE + """
[filter.a]
algorithm = bf
n_particles = 300
[filter.b]
algorithm = LW
lw_delta = 0.9
[replications]
datasets = 2
runs = 3
[compare]
alphas = 0.05, 0.5
reference = BF
[bench]
n_values = 100, 200
repeats = 2
[smooth]
paths = 50
raw_paths = yes
""")
    assert list(cfg.filters) == ["a", "b"]
    assert cfg.filters["a"].algorithm == "BF" and cfg.filters["a"].n_particles == 300
    assert cfg.filters["b"].lw_delta == 0.9
    assert (cfg.datasets, cfg.runs) == (2, 3)
    assert cfg.compare["alphas"] == (0.05, 0.5) and cfg.compare["reference"] == "BF"
    assert cfg.bench == {"n_values": (100, 200), "repeats": 2}
    assert cfg.smooth == {"paths": 50, "raw_paths": True}


@pytest.mark.parametrize("extra", [
    "[model2]\nx = 1\n",
    "[filter]\nparticles = 10\n",
    "[data]\nT = 0\n",
    "[data]\nT = 2.5\n",
    "[filter]\nalgorithm = MCMC\n",
    "[filter]\nn_particles = 1\n",
    "[run]\nseed = -1\n",
    "[data]\npath = missing.csv\n",
    "[smooth]\nraw_paths = maybe\n",
])
def test_rejections(extra):
    with pytest.raises(ConfigError):
        parse_config(BASE + extra)


def test_model_rejections():
    with pytest.raises(ConfigError):
        parse_config("[filter]\nalgorithm = PL\n")
    with pytest.raises(ConfigError):
        parse_config("[model]\nname = arima\n")
    with pytest.raises(ConfigError):
        parse_config("[model]\nname = local_level\nsigma2 = one\n")
    with pytest.raises(ConfigError):
        parse_config("[model]\nname = local_level\nprior_tau2 = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[model\nname")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.ini")


def test_relative_paths(tmp_path):
    write_csv(tmp_path / "y.csv", ("t", "y1"), [(1, 0.5), (2, 1.5)])
    (tmp_path / "c.ini").write_text(BASE + "[data]\npath = y.csv\n[output]\ndirectory = out\n")
    cfg = load_config(str(tmp_path / "c.ini"))
    assert cfg.data_path == str(tmp_path / "y.csv")
    assert cfg.output_dir == str(tmp_path / "out")
    assert np.array_equal(read_observations(cfg.data_path), [0.5, 1.5])


def test_csv_round_trip(tmp_path):
    g = np.random.default_rng(0)
    vals = g.normal(size=(20, 3)) * 10.0 ** g.integers(-300, 300, size=(20, 3))
    rows = [("PL", t + 1, *v) for t, v in enumerate(vals.tolist())]
    rows.append(("BF", 21, float("nan"), 1e-320, -0.0))
    p = tmp_path / "x.csv"
    write_csv(p, ("filter", "t", "a", "b", "c"), rows)
    header, back = read_csv(p)
    assert header == ["filter", "t", "a", "b", "c"]
    assert isclose_rows([list(r) for r in rows], back)
    assert not isclose_rows([list(r) for r in rows[:-1]], back)


def test_bad_observation_files(tmp_path):
    p = tmp_path / "y.csv"
    write_csv(p, ("t", "z"), [(1, 0.5)])
    with pytest.raises(InvalidData):
        read_observations(p)
    write_csv(p, ("t", "y1"), [])
    with pytest.raises(InvalidData):
        read_observations(p)
    write_csv(p, ("t", "y1"), [(1, "inf")])
    with pytest.raises(InvalidData):
        read_observations(p)
    p.write_text("")
    with pytest.raises(InvalidData):
        read_observations(p)
