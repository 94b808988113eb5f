"""Physical parameters of the bending models and the constraint penalties."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

MODEL_KINDS = ("minimal", "sc", "bc", "ade")
ALPHA_DEFAULT = 2.0 / math.pi
ALPHA_LARGE = 1000.0 * ALPHA_DEFAULT


class UnsupportedModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Bending model coefficients.

    ``H0`` is half the spontaneous curvature (1/length).  The reference
    area difference is given either dimensionally (``dA0``) or reduced as
    ``da0 = dA0 / (4 pi R D)``; the reduced form is resolved against the
    reference radius when coefficients are packed.
    """

    kind: str = "minimal"
    kappa: float = 0.01
    H0: float = 0.0
    alpha: float | None = None
    D: float = 0.001
    da0: float | None = None
    dA0: float | None = None
    kappa_tilde: float | None = None
    theta0: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.alpha is None:
            object.__setattr__(
                self, "alpha", {"minimal": 0.0, "sc": 0.0, "ade": ALPHA_DEFAULT, "bc": ALPHA_LARGE}[self.kind]
            )
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.D > 0:
            raise ValueError("bilayer thickness D must be positive")
        if self.kind == "minimal" and (self.H0 != 0 or self.alpha != 0):
            raise ValueError("the minimal model has H0 = 0 and alpha = 0")
        if self.kind == "sc" and self.alpha != 0:
            raise ValueError("the SC model has alpha = 0")
        if self.kind in ("ade", "bc") and self.da0 is None and self.dA0 is None:
            raise ValueError(f"{self.kind} model needs a reference area difference (da0 or dA0)")
        if self.da0 is not None and self.dA0 is not None:
            raise ValueError("give either da0 or dA0, not both")

    @property
    def scheme_a_kappa(self) -> float:
        return math.sqrt(3.0) * self.kappa if self.kappa_tilde is None else self.kappa_tilde

    def delta_A0(self, R: float) -> float:
        if self.dA0 is not None:
            return float(self.dA0)
        if self.da0 is not None:
            return float(self.da0) * 4.0 * math.pi * R * self.D
        return 0.0

    def bend_vector(self, R: float = 1.0) -> np.ndarray:
        """Packed ``[kappa, H0, alpha, D, dA0]`` for the kernels."""
        return np.array([self.kappa, self.H0, self.alpha, self.D, self.delta_A0(R)], dtype=float)

    def combined_da_prime0(self, A: float, R: float = 1.0) -> float:
        """Reduced combination ``2 D H0 / (alpha pi) + dA0 / A`` (needs alpha > 0)."""
        return 2.0 * self.D * self.H0 / (self.alpha * math.pi) + self.delta_A0(R) / A

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ConstraintParams:
    """Quadratic penalties on total area, triangle areas and enclosed volume."""

    k_area_global: float = 2.0
    A0: float | None = None
    k_area_local: float = 1.0
    At0: np.ndarray | None = field(default=None, compare=False, repr=False)
    k_volume: float = 1.0
    V0: float | None = None

    def __post_init__(self):
        for name in ("k_area_global", "k_area_local", "k_volume"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.k_area_global > 0 and not (self.A0 and self.A0 > 0):
            raise ValueError("A0 target required when k_area_global > 0")
        if self.k_volume > 0 and not (self.V0 and self.V0 > 0):
            raise ValueError("V0 target required when k_volume > 0")
        if self.k_area_local > 0:
            if self.At0 is None and not (self.A0 and self.A0 > 0):
                raise ValueError("triangle targets (At0 or A0) required when k_area_local > 0")

    @classmethod
    def none(cls) -> "ConstraintParams":
        return cls(0.0, None, 0.0, None, 0.0, None)

    @classmethod
    def for_targets(cls, R: float, v: float, n_triangles: int, k_area_global=2.0, k_area_local=1.0, k_volume=1.0):
        """Targets from radius and reduced volume: ``A0 = 4 pi R^2``, ``V0 = v 4/3 pi R^3``."""
        A0 = 4.0 * math.pi * R**2
        V0 = v * 4.0 / 3.0 * math.pi * R**3
        return cls(k_area_global, A0, k_area_local, np.full(n_triangles, A0 / n_triangles), k_volume, V0)

    def triangle_targets(self, n_triangles: int) -> np.ndarray:
        if self.At0 is not None:
            at0 = np.asarray(self.At0, dtype=float)
            if at0.shape != (n_triangles,):
                raise ValueError("At0 length does not match the triangle count")
            return at0
        if self.A0:
            return np.full(n_triangles, self.A0 / n_triangles)
        return np.ones(n_triangles)

    def pen_vector(self) -> np.ndarray:
        return np.array(
            [self.k_area_global, self.A0 or 1.0, self.k_area_local, self.k_volume, self.V0 or 1.0], dtype=float
        )

    def retarget_local(self, n_triangles: int) -> "ConstraintParams":
        A0 = self.A0 if self.A0 else float(np.sum(self.triangle_targets(n_triangles)))
        return replace(self, At0=np.full(n_triangles, A0 / n_triangles))

    def with_(self, **kw) -> "ConstraintParams":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# flat key = value parameter files

_MODEL_KEYS = {f.name for f in fields(ModelParams)}
_CONSTRAINT_KEYS = {f.name for f in fields(ConstraintParams)} - {"At0"}


def _coerce(value: str):
    v = value.strip()
    if v.lower() in ("none", "null", ""):
        return None
    try:
        return float(v)
    except ValueError:
        return v


def read_params(path) -> tuple[dict, dict]:
    """Parse ``key = value`` lines into (model kwargs, constraint kwargs)."""
    model, cons = {}, {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _MODEL_KEYS:
            model[key] = _coerce(value)
        elif key in _CONSTRAINT_KEYS:
            cons[key] = _coerce(value)
        else:
            raise ValueError(f"{path}:{n}: unknown parameter {key!r}")
    if "kind" in model and model["kind"] is not None:
        model["kind"] = str(model["kind"])
    return model, cons


def format_params(model: ModelParams, cons: ConstraintParams | None = None) -> str:
    lines = [f"{k} = {v}" for k, v in asdict(model).items()]
    if cons is not None:
        lines += [f"{k} = {getattr(cons, k)}" for k in sorted(_CONSTRAINT_KEYS)]
    return "\n".join(lines) + "\n"
