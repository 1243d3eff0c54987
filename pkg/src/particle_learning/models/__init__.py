"""State-space models: local level, heavy-tailed nonlinear, dynamic factor."""
from ..errors import ConfigError
from .base import SimulatedData, StateSpaceModel
from .dynamic_factor import DynamicFactor
from .scalar import HeavyTailed, LocalLevel, ScalarModel

MODELS = {
    "local_level": LocalLevel,
    "heavy_tailed": HeavyTailed,
    "dynamic_factor": DynamicFactor,
}


def build_model(name, **kwargs):
    """Instantiate a model by registry name."""
    try:
        cls = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


__all__ = ["DynamicFactor", "HeavyTailed", "LocalLevel", "ScalarModel", "SimulatedData",
           "StateSpaceModel", "MODELS", "build_model"]
