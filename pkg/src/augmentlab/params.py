"""Structural parameters, firm state, and the plain-text parameter file format.

Parameter files are `key = value` lines grouped by dotted section prefixes
(``model.``, ``firm.``, ``dynamics.``, ``externality.``, ``energy.``), with
``#`` comments and comma-separated vectors. The loader rejects unknown keys.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

__all__ = [
    "ModelParams",
    "FirmState",
    "ParamError",
    "validate_design",
    "read_params_file",
    "load_bundle",
    "default_params_path",
    "trap_params_path",
]

N_DIMS = 5


class ParamError(ValueError):
    """Raised for malformed parameter files or invalid parameter values."""


def _freeze(a, n):
    arr = np.asarray(a, dtype=float).reshape(n).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Every structural parameter of the static economy.

    Vector fields are read-only float arrays. ``g_exponents`` are the inner
    aggregator exponents a_k, ``g_comp_base``/``g_comp_slope`` parametrize the
    composition-dependent slope of the design multiplier, ``w_auto``/``w_min``
    are the neutral and minimal designs, and ``prod_shares`` are the
    Cobb-Douglas sector shares. ``g_comp_slope`` may be 0, in which case the
    design-composition complementarity property is deliberately absent.
    """

    phi0_bound: float
    phi0_rate: float
    g_floor: float
    g_ceiling: float
    g_exponents: np.ndarray
    g_comp_base: float
    g_comp_slope: float
    w_auto: np.ndarray
    w_min: np.ndarray
    w_max: np.ndarray
    cost_coeffs: np.ndarray
    ai_unit_cost: float
    output_price: float
    wages: np.ndarray
    prod_shares: np.ndarray
    robot_rate: float
    labor_mode: str

    def __post_init__(self):
        for name, n in (
            ("g_exponents", N_DIMS),
            ("w_auto", N_DIMS),
            ("w_min", N_DIMS),
            ("w_max", N_DIMS),
            ("cost_coeffs", N_DIMS),
            ("wages", 3),
            ("prod_shares", 3),
        ):
            object.__setattr__(self, name, _freeze(getattr(self, name), n))
        if not self.phi0_bound > 1.0:
            raise ParamError("phi0_bound must exceed 1")
        if not self.phi0_rate > 0.0:
            raise ParamError("phi0_rate must be positive")
        a = self.g_exponents
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ParamError("g_exponents must lie strictly in (0, 1)")
        if not a.sum() < 1.0:
            raise ParamError("g_exponents must sum to less than 1")
        if not (0.0 < self.g_floor < 1.0 <= self.g_ceiling):
            raise ParamError("need 0 < g_floor < 1 <= g_ceiling")
        if self.g_comp_base <= 0.0 or self.g_comp_slope < 0.0:
            raise ParamError("g_comp_base must be > 0 and g_comp_slope >= 0")
        if np.any(self.w_min < 0.0) or np.any(self.w_min >= self.w_auto):
            raise ParamError("w_min must be nonnegative and below w_auto componentwise")
        if np.any(self.w_max <= self.w_auto):
            raise ParamError("w_max must exceed w_auto componentwise")
        if np.any(self.cost_coeffs <= 0.0):
            raise ParamError("cost_coeffs must be positive")
        if self.ai_unit_cost < 0.0 or self.output_price <= 0.0 or np.any(self.wages < 0.0):
            raise ParamError("prices and wages must be nonnegative (output_price positive)")
        th = self.prod_shares
        if np.any(th <= 0.0) or abs(th.sum() - 1.0) > 1e-12:
            raise ParamError("prod_shares must be strictly positive and sum to 1 within 1e-12")
        if self.robot_rate < 0.0:
            raise ParamError("robot_rate must be nonnegative")
        if self.labor_mode not in ("fixed", "optimized"):
            raise ParamError("labor_mode must be 'fixed' or 'optimized'")

    def key(self) -> tuple:
        """Hashable identity of the parameter set (used for caching)."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(tuple(v) if isinstance(v, np.ndarray) else v)
        return tuple(out)

    def replace(self, **changes) -> "ModelParams":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ModelParams(**kw)


@dataclass(frozen=True)
class FirmState:
    """Quasi-fixed inputs of a single firm scenario.

    ``labor`` and ``human_capital`` are (L^P, L^C, L^A) and (H^P, H^C, H^A);
    ``ai_stock`` is the deployed AI capital D.
    """

    capital_k: float
    robot_capital: float
    labor: np.ndarray
    human_capital: np.ndarray
    ai_stock: float

    def __post_init__(self):
        object.__setattr__(self, "labor", _freeze(self.labor, 3))
        object.__setattr__(self, "human_capital", _freeze(self.human_capital, 3))
        vals = np.concatenate(
            [[self.capital_k, self.robot_capital, self.ai_stock], self.labor, self.human_capital]
        )
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise ParamError("firm state entries must be finite and nonnegative")

    def key(self) -> tuple:
        return (
            self.capital_k,
            self.robot_capital,
            tuple(self.labor),
            tuple(self.human_capital),
            self.ai_stock,
        )

    def replace(self, **changes) -> "FirmState":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return FirmState(**kw)

    def with_ha(self, ha: float) -> "FirmState":
        """Copy of the state with the augmentable human capital H^A replaced."""
        hc = np.array(self.human_capital)
        hc[2] = ha
        return self.replace(human_capital=hc)


def validate_design(w, p: ModelParams) -> np.ndarray:
    """Check a workplace design vector against its box bounds and return it.

    Raises ``ParamError`` if any component is negative, above ``w_max``, or
    not finite.
    """
    w = np.asarray(w, dtype=float).reshape(N_DIMS)
    if not np.all(np.isfinite(w)):
        raise ParamError("design vector must be finite")
    if np.any(w < 0.0) or np.any(w > p.w_max):
        raise ParamError("design vector outside [0, w_max]")
    return w


# ---------------------------------------------------------------------------
# parameter files

_SECTIONS = ("model", "firm", "dynamics", "externality", "energy")

_VECTOR_KEYS = {
    "g_exponents",
    "w_auto",
    "w_min",
    "w_max",
    "cost_coeffs",
    "wages",
    "prod_shares",
    "labor",
    "human_capital",
}

_KNOWN_KEYS = {
    "model": {f.name for f in fields(ModelParams)},
    "firm": {f.name for f in fields(FirmState)},
    # populated lazily from the owning modules to avoid import cycles
    "dynamics": None,
    "externality": None,
    "energy": None,
}


def _section_fields(section: str):
    if _KNOWN_KEYS[section] is None:
        if section == "dynamics":
            from .dynamics import DynamicsParams as cls
        elif section == "externality":
            from .social import ExternalityParams as cls
        else:
            from .sustainability import EnergyParams as cls
        _KNOWN_KEYS[section] = {f.name for f in fields(cls)}
    return _KNOWN_KEYS[section]


def read_params_file(path) -> dict:
    """Parse a parameter file into ``{section: {key: value}}``.

    Values are floats, float arrays (comma-separated), or bare strings for
    enum-like keys. Unknown sections or keys raise ``ParamError`` naming the
    offender.
    """
    path = Path(path)
    sections: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError(f"{path.name}:{lineno}: expected 'section.key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if "." not in key:
            raise ParamError(f"{path.name}:{lineno}: key '{key}' missing section prefix")
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ParamError(f"{path.name}:{lineno}: unknown section '{section}'")
        if name not in _section_fields(section):
            raise ParamError(f"{path.name}:{lineno}: unknown key '{key}'")
        if name in sections.get(section, {}):
            raise ParamError(f"{path.name}:{lineno}: duplicate key '{key}'")
        if name == "labor_mode":
            parsed: object = val
        elif name in _VECTOR_KEYS:
            try:
                parsed = np.array([float(x) for x in val.split(",")])
            except ValueError:
                raise ParamError(f"{path.name}:{lineno}: bad vector for '{key}'") from None
        else:
            try:
                parsed = float(val)
            except ValueError:
                raise ParamError(f"{path.name}:{lineno}: bad number for '{key}'") from None
        sections.setdefault(section, {})[name] = parsed
    return sections


@dataclass(frozen=True)
class ParamBundle:
    """Everything a run needs, as parsed from one parameter file."""

    model: ModelParams
    firm: FirmState
    dynamics: object | None
    externality: object | None
    energy: object | None


def load_bundle(path) -> ParamBundle:
    """Load a parameter file into typed parameter objects.

    The ``model`` and ``firm`` sections are mandatory; the others are
    optional and come back as ``None`` when absent.
    """
    sections = read_params_file(path)
    for required in ("model", "firm"):
        if required not in sections:
            raise ParamError(f"{Path(path).name}: missing [{required}] section keys")
    missing_model = _KNOWN_KEYS["model"] - set(sections["model"])
    if missing_model:
        raise ParamError(f"model section missing keys: {sorted(missing_model)}")
    missing_firm = _KNOWN_KEYS["firm"] - set(sections["firm"])
    if missing_firm:
        raise ParamError(f"firm section missing keys: {sorted(missing_firm)}")
    model = ModelParams(**sections["model"])
    firm = FirmState(**sections["firm"])
    dyn = ext = en = None
    if "dynamics" in sections:
        from .dynamics import DynamicsParams

        dyn = DynamicsParams(**sections["dynamics"])
    if "externality" in sections:
        from .social import ExternalityParams

        ext = ExternalityParams(**sections["externality"])
    if "energy" in sections:
        from .sustainability import EnergyParams

        en = EnergyParams(**sections["energy"])
    return ParamBundle(model=model, firm=firm, dynamics=dyn, externality=ext, energy=en)


def default_params_path() -> Path:
    """Path of the packaged calibration-default parameter file."""
    return Path(importlib.resources.files("augmentlab") / "data" / "default.params")


def trap_params_path() -> Path:
    """Path of the packaged automation-trap calibration."""
    return Path(importlib.resources.files("augmentlab") / "data" / "trap.params")
