"""Exception types shared across the package."""

from __future__ import annotations


class IsoflowError(Exception):
    """Base class; ``code`` is a short machine-readable tag."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def as_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        out.update({k: _plain(v) for k, v in self.details.items()})
        return out


class ConfigError(IsoflowError):
    code = "config"


class GeometryError(IsoflowError):
    """A geometric precondition failed (interior point, no intersection, ...)."""

    code = "geometry"


class NumericalError(IsoflowError):
    code = "numerical"


class FlowHalted(IsoflowError):
    """The flow left the admissible class (self-intersection or entry into the body)."""

    code = "flow_halted"


def _plain(v):
    try:
        import numpy as np

        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
    except ImportError:  # pragma: no cover
        pass
    return v
