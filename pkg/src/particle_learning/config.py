"""Run configuration files.

A flat INI file with the sections below; unknown sections and keys are
rejected.  Relative paths resolve against the directory of the file.

::

    [model]
    name = local_level
    sigma2 = 1.0
    tau2 = 0.1
    learn = sigma2, tau2
    prior_sigma2 = 5, 4
    prior_tau2 = 5, 0.4
    m0 = 0
    C0 = 10
    x0 = 0            ; or "prior"

    [filter]          ; more blocks as [filter.NAME] for ``compare``
    algorithm = PL
    n_particles = 1000

    [data]
    T = 100           ; simulate, or
    path = data.csv   ; read observations

    [output]
    directory = out

    [run]
    seed = 1
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .filters import ALGORITHMS, FilterConfig
from .models import MODELS

_THETA = {"sigma2", "tau2", "beta", "nu", "beta1", "beta2", "p", "q"}
_PAIRS = {"prior_sigma2", "prior_tau2", "prior_beta", "prior_beta1", "prior_beta2",
          "prior_p", "prior_q"}
_MODEL_KEYS = {"name", "learn", "m0", "C0", "x0", "lambda0"} | _THETA | _PAIRS
_FILTER_KEYS = {"algorithm", "n_particles", "resampler", "lw_delta", "apf_guess",
                "storvik_proposal"}
SECTIONS = {
    "model": _MODEL_KEYS,
    "filter": _FILTER_KEYS,
    "data": {"path", "T"},
    "output": {"directory"},
    "run": {"seed"},
    "replications": {"datasets", "runs"},
    "smooth": {"paths", "raw_paths"},
    "compare": {"target", "alphas", "reference", "reference_particles"},
    "bench": {"n_values", "t_values", "T", "N", "repeats"},
}


def _float(section, key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {text!r}") from None


def _int(section, key, text):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {text!r}") from None
    if v != int(v):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {text!r}")
    return int(v)


def _list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _bool(section, key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {text!r}")


@dataclass
class ModelSpec:
    name: str
    kwargs: dict

    def build(self):
        from .models import build_model
        return build_model(self.name, **self.kwargs)


@dataclass
class RunConfig:
    """Parsed configuration.

    Attributes
    ----------
    model : ModelSpec
    filters : dict of str -> FilterConfig
        ``"filter"`` for the main block, the suffix for ``[filter.NAME]``.
    data_path : str or None
    T : int or None
    output_dir : str
    seed : int
    datasets, runs : int
    smooth, compare, bench : dict
    source : str or None
        Path of the file the configuration came from.
    """

    model: ModelSpec
    filters: dict
    data_path: str = None
    T: int = None
    output_dir: str = "."
    seed: int = 0
    datasets: int = 1
    runs: int = 1
    smooth: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    source: str = None

    @property
    def filter(self):
        """The first filter block."""
        return next(iter(self.filters.values()))


def _check_keys(section, base, keys):
    unknown = sorted(set(keys) - SECTIONS[base])
    if unknown:
        raise ConfigError(f"[{section}] unknown keys {unknown}; allowed: {sorted(SECTIONS[base])}")


def _parse_model(sec):
    if "name" not in sec:
        raise ConfigError("[model] name is required")
    name = sec["name"].strip()
    if name not in MODELS:
        raise ConfigError(f"[model] unknown model {name!r}; choose from {sorted(MODELS)}")
    kw = {}
    for key, text in sec.items():
        if key == "name":
            continue
        if key == "learn":
            kw["learn"] = tuple(_list(text))
        elif key in _PAIRS:
            parts = _list(text)
            if len(parts) != 2:
                raise ConfigError(f"[model] {key}: expected two numbers, got {text!r}")
            kw[key] = tuple(_float("model", key, p) for p in parts)
        elif key == "x0":
            kw["x0"] = None if text.strip().lower() == "prior" else _float("model", key, text)
        elif key == "lambda0":
            kw[key] = _int("model", key, text)
        else:
            kw[key] = _float("model", key, text)
    return ModelSpec(name, kw)


def _parse_filter(section, sec):
    kw = {}
    for key, text in sec.items():
        if key == "n_particles":
            kw[key] = _int(section, key, text)
        elif key == "lw_delta":
            kw[key] = _float(section, key, text)
        elif key == "algorithm":
            kw[key] = text.strip().upper()
            if kw[key] not in ALGORITHMS:
                raise ConfigError(f"[{section}] unknown algorithm {text!r}; choose from {list(ALGORITHMS)}")
        else:
            kw[key] = text.strip()
    return FilterConfig(**kw)


def parse_config(text, base_dir="."):
    """Parse configuration text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, or invalid values.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    filters = {}
    seen = {}
    for section in cp.sections():
        base = section.split(".", 1)[0]
        if base not in SECTIONS or ("." in section and base != "filter"):
            raise ConfigError(f"unknown section [{section}]; allowed: {sorted(SECTIONS)}")
        _check_keys(section, base, cp[section].keys())
        seen[base] = True
        if base == "filter":
            label = section.split(".", 1)[1] if "." in section else "filter"
            filters[label] = _parse_filter(section, cp[section])
    if "model" not in seen:
        raise ConfigError("[model] section is required")
    if not filters:
        filters["filter"] = FilterConfig()
    model = _parse_model(cp["model"])

    def get(section, key, conv, default=None):
        if cp.has_option(section, key):
            return conv(section, key, cp[section][key])
        return default

    data_path = cp["data"].get("path") if cp.has_section("data") else None
    if data_path is not None:
        data_path = os.path.normpath(os.path.join(base_dir, data_path.strip()))
        if not os.path.isfile(data_path):
            raise ConfigError(f"[data] path {data_path!r} does not exist")
    T = get("data", "T", _int)
    if T is not None and T < 1:
        raise ConfigError(f"[data] T must be positive, got {T}")
    if data_path is None and T is None:
        T = 100
    out = cp["output"].get("directory", ".") if cp.has_section("output") else "."
    seed = get("run", "seed", _int, 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"[run] seed must be an unsigned 64-bit integer, got {seed}")
    datasets = get("replications", "datasets", _int, 1)
    runs = get("replications", "runs", _int, 1)
    if datasets < 1 or runs < 1:
        raise ConfigError("[replications] datasets and runs must be at least 1")

    smooth = {}
    if cp.has_section("smooth"):
        smooth["paths"] = get("smooth", "paths", _int)
        smooth["raw_paths"] = get("smooth", "raw_paths", _bool, False)
    compare = {}
    if cp.has_section("compare"):
        s = cp["compare"]
        compare["target"] = s.get("target", "state").strip()
        if "alphas" in s:
            compare["alphas"] = tuple(_float("compare", "alphas", a) for a in _list(s["alphas"]))
        if "reference" in s:
            compare["reference"] = s["reference"].strip()
        compare["reference_particles"] = get("compare", "reference_particles", _int)
    bench = {}
    if cp.has_section("bench"):
        s = cp["bench"]
        if "n_values" in s:
            bench["n_values"] = tuple(_int("bench", "n_values", v) for v in _list(s["n_values"]))
        if "t_values" in s:
            bench["t_values"] = tuple(_int("bench", "t_values", v) for v in _list(s["t_values"]))
        for key in ("T", "N", "repeats"):
            if key in s:
                bench[key] = _int("bench", key, s[key])
    return RunConfig(model=model, filters=filters, data_path=data_path, T=T,
                     output_dir=os.path.normpath(os.path.join(base_dir, out.strip())),
                     seed=seed, datasets=datasets, runs=runs, smooth=smooth,
                     compare=compare, bench=bench)


def load_config(path):
    """Read and parse a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path!r}: {exc.strerror}") from None
    cfg = parse_config(text, os.path.dirname(os.path.abspath(path)))
    cfg.source = path
    return cfg


__all__ = ["RunConfig", "ModelSpec", "SECTIONS", "parse_config", "load_config"]
