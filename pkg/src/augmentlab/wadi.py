"""Survey scoring engine for the 36-item workplace augmentation design index.

Scoring steps: reverse-code flagged items (v -> 8 - v), z-score Likert items
per item across the scoring population, pass binary items through as
{-0.5, +0.5}, average item scores into the five dimension scores (blending
management and worker means 50/50 on dual-level items), then form equal,
externally-weighted, and theory-weighted composites plus the diagnostic
metrics (authority gap, balance, composite x H^A).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .params import ModelParams, ParamError

__all__ = [
    "ItemSpec",
    "WadiResponseSet",
    "StandardizedItems",
    "WadiReport",
    "ROLES",
    "EXPECTED_DIMENSION_SIZES",
    "standardize_items",
    "dimension_scores",
    "composite",
    "theory_weights_from_model",
    "diagnostics",
    "score_firm",
    "score_firms",
    "read_catalog_csv",
    "read_responses_csv",
    "default_catalog_path",
]

ROLES = ("management", "worker")
EXPECTED_DIMENSION_SIZES = {1: 8, 2: 8, 3: 7, 4: 7, 5: 6}


@dataclass(frozen=True)
class ItemSpec:
    """Catalog entry: which dimension an item scores and how it is coded."""

    dimension: int
    reverse: bool = False
    binary: bool = False
    dual_level: bool = False

    def __post_init__(self):
        if self.dimension not in (1, 2, 3, 4, 5):
            raise ParamError("item dimension must be 1..5")
        if self.reverse and self.binary:
            raise ParamError("an item cannot be both reverse-coded and binary")


@dataclass
class WadiResponseSet:
    """One firm's raw responses plus the item catalog they score against.

    ``responses`` rows are (respondent_id, role, item_id, value); Likert
    values lie in [1, 7], binary in {0, 1}. The catalog must cover the
    8/8/7/7/6 dimension structure and every answered item.
    """

    firm_id: str
    responses: list
    item_catalog: dict

    def __post_init__(self):
        counts = {k: 0 for k in EXPECTED_DIMENSION_SIZES}
        for item_id, spec in self.item_catalog.items():
            if not isinstance(spec, ItemSpec):
                raise ParamError(f"catalog entry for '{item_id}' is not an ItemSpec")
            counts[spec.dimension] += 1
        if counts != EXPECTED_DIMENSION_SIZES:
            raise ParamError(
                f"catalog dimension sizes {counts} do not match "
                f"{EXPECTED_DIMENSION_SIZES}"
            )
        seen = set()
        for rid, role, item_id, value in self.responses:
            if role not in ROLES:
                raise ParamError(f"unknown role '{role}' for respondent '{rid}'")
            spec = self.item_catalog.get(item_id)
            if spec is None:
                raise ParamError(f"item '{item_id}' missing from the catalog")
            if spec.binary:
                if value not in (0, 0.0, 1, 1.0):
                    raise ParamError(f"binary item '{item_id}' needs value 0 or 1")
            elif not 1.0 <= float(value) <= 7.0:
                raise ParamError(f"Likert item '{item_id}' needs value in [1, 7]")
            if (rid, item_id) in seen:
                raise ParamError(f"duplicate response: respondent '{rid}' item '{item_id}'")
            seen.add((rid, item_id))

    def respondent_counts(self) -> dict:
        out = {r: 0 for r in ROLES}
        for rid in {(rid, role) for rid, role, _, _ in self.responses}:
            out[rid[1]] += 1
        return out


@dataclass
class StandardizedItems:
    """Per-respondent standardized item matrix (NaN marks missing)."""

    respondent_ids: list
    roles: list
    item_ids: list
    values: np.ndarray  # (n_respondents, n_items)
    dropped_items: list
    item_stats: dict    # item_id -> (mean, sd) for Likert items


def _raw_matrix(rs: WadiResponseSet):
    respondents = sorted({(rid, role) for rid, role, _, _ in rs.responses})
    items = sorted(rs.item_catalog)
    r_index = {r: i for i, r in enumerate(respondents)}
    c_index = {c: j for j, c in enumerate(items)}
    mat = np.full((len(respondents), len(items)), np.nan)
    for rid, role, item_id, value in rs.responses:
        mat[r_index[(rid, role)], c_index[item_id]] = float(value)
    return respondents, items, mat


def item_pool_stats(response_sets, catalog) -> dict:
    """Per-item (mean, sd) over all firms' respondents, after reverse-coding.

    Used for cross-firm ("global") standardization pools.
    """
    values: dict = {}
    for rs in response_sets:
        for _, _, item_id, value in rs.responses:
            spec = catalog[item_id]
            if spec.binary:
                continue
            v = 8.0 - float(value) if spec.reverse else float(value)
            values.setdefault(item_id, []).append(v)
    stats = {}
    for item_id, vals in values.items():
        arr = np.asarray(vals)
        stats[item_id] = (float(arr.mean()), float(arr.std()))
    return stats


def standardize_items(rs: WadiResponseSet, pool_stats: dict | None = None) -> StandardizedItems:
    """Reverse-code, z-score Likert items, map binary items to {-0.5, +0.5}.

    z-statistics use the within-firm population (ddof=0) unless
    ``pool_stats`` supplies cross-firm moments. Items with fewer than two
    distinct values have no defined z-score; they are dropped from the
    z-pool with a warning.
    """
    respondents, items, mat = _raw_matrix(rs)
    out = np.full_like(mat, np.nan)
    dropped, stats = [], {}
    for j, item_id in enumerate(items):
        spec = rs.item_catalog[item_id]
        col = mat[:, j]
        present = ~np.isnan(col)
        if not present.any():
            continue
        if spec.binary:
            out[present, j] = col[present] - 0.5
            continue
        vals = 8.0 - col[present] if spec.reverse else col[present]
        if pool_stats is not None and item_id in pool_stats:
            mean, sd = pool_stats[item_id]
        else:
            mean, sd = float(vals.mean()), float(vals.std())
        if sd < 1e-12 or (pool_stats is None and np.unique(vals).size < 2):
            dropped.append(item_id)
            continue
        stats[item_id] = (mean, sd)
        out[present, j] = (vals - mean) / sd
    if dropped:
        warnings.warn(
            f"firm {rs.firm_id}: zero-variance items dropped from the z-pool: "
            f"{sorted(dropped)}",
            stacklevel=2,
        )
    return StandardizedItems(
        respondent_ids=[r[0] for r in respondents],
        roles=[r[1] for r in respondents],
        item_ids=items,
        values=out,
        dropped_items=dropped,
        item_stats=stats,
    )


def _item_score(col, roles, dual: bool):
    """Score of one item: 50/50 role blend on dual-level items, plain mean else."""
    present = ~np.isnan(col)
    if not present.any():
        return None, False
    if dual:
        means = {}
        for role in ROLES:
            sel = present & (roles == role)
            if sel.any():
                means[role] = float(col[sel].mean())
        if len(means) == 2:
            return 0.5 * means["management"] + 0.5 * means["worker"], False
        if len(means) == 1:
            return next(iter(means.values())), True
    return float(col[present].mean()), False


def dimension_scores(std: StandardizedItems, catalog: dict):
    """Aggregate item scores into the five dimension scores.

    Returns (scores, role_means, flags): ``scores`` is a (5,) array with
    dimensions scored 0.0 by convention when every item was dropped
    (flagged); ``role_means`` maps dimension -> {role: mean} for the
    dimensions and roles that have responses.
    """
    roles = np.asarray(std.roles)
    scores = np.zeros(5)
    flags = []
    role_means = {}
    single_role_blend = False
    for dim in range(1, 6):
        cols = [j for j, it in enumerate(std.item_ids) if catalog[it].dimension == dim]
        item_scores = []
        for j in cols:
            s, single = _item_score(std.values[:, j], roles, catalog[std.item_ids[j]].dual_level)
            single_role_blend |= single
            if s is not None:
                item_scores.append(s)
        if not item_scores:
            flags.append(f"dimension {dim}: no scorable items; score 0 by convention")
            continue
        scores[dim - 1] = float(np.mean(item_scores))
        for role in ROLES:
            per_item = []
            for j in cols:
                sel = ~np.isnan(std.values[:, j]) & (roles == role)
                if sel.any():
                    per_item.append(float(std.values[sel, j].mean()))
            if per_item:
                role_means.setdefault(dim, {})[role] = float(np.mean(per_item))
    if single_role_blend:
        flags.append("dual-level blending degraded to a single role on some items")
    return scores, role_means, flags


def composite(ds, mode: str, weights=None) -> float:
    """Weighted dimension-score composite.

    ``equal`` is the unweighted mean; ``cfa`` and ``theory`` use the supplied
    weights (nonnegative, normalized to sum 1).
    """
    ds = np.asarray(ds, dtype=float).reshape(5)
    if mode == "equal":
        return float(ds.mean())
    if mode not in ("cfa", "theory"):
        raise ParamError(f"unknown composite mode '{mode}'")
    if weights is None:
        raise ParamError(f"composite mode '{mode}' needs a weight vector")
    w = np.asarray(weights, dtype=float).reshape(5)
    if np.any(w < 0.0):
        raise ParamError("composite weights must be nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise ParamError("composite weights must not all be zero")
    return float(ds @ (w / total))


def theory_weights_from_model(p: ModelParams, reference: tuple) -> np.ndarray:
    """Weights proportional to the design-multiplier gradient at a reference.

    ``reference`` is (w, ha); the point must be inside the unclipped region.
    """
    w, ha = reference
    grad, clipped = model.grad_g(w, ha, p)
    if clipped:
        raise ParamError("theory weights need an unclipped reference point")
    return grad / grad.sum()


def diagnostics(role_means: dict, ds, ha: float | None = None):
    """(authority_gap, balance, wadi_x_ha).

    The authority gap needs both roles on dimension 2 (None + caller flag
    otherwise); balance is the population SD of the dimension scores;
    wadi_x_ha is composite_equal * ha when ha is supplied.
    """
    ds = np.asarray(ds, dtype=float).reshape(5)
    dim2 = role_means.get(2, {})
    gap = None
    if "management" in dim2 and "worker" in dim2:
        gap = abs(dim2["management"] - dim2["worker"])
    balance = float(ds.std())
    wadi_x_ha = float(ds.mean() * ha) if ha is not None else None
    return gap, balance, wadi_x_ha


@dataclass
class WadiReport:
    """Scored dimensions, composites, and diagnostics for one firm."""

    firm_id: str
    dimension_scores: np.ndarray
    composite_equal: float
    composite_cfa: float | None
    composite_theory: float | None
    authority_gap: float | None
    balance: float
    wadi_x_ha: float | None
    respondent_counts: dict
    flags: list = field(default_factory=list)


def score_firm(
    rs: WadiResponseSet,
    cfa_weights=None,
    theory_weights=None,
    ha: float | None = None,
    pool_stats: dict | None = None,
) -> WadiReport:
    """Full scoring pipeline for one firm's response set."""
    std = standardize_items(rs, pool_stats=pool_stats)
    ds, role_means, flags = dimension_scores(std, rs.item_catalog)
    gap, balance, wadi_x_ha = diagnostics(role_means, ds, ha=ha)
    if gap is None:
        flags = flags + ["authority gap unavailable: need both roles on dimension 2"]
    return WadiReport(
        firm_id=rs.firm_id,
        dimension_scores=ds,
        composite_equal=composite(ds, "equal"),
        composite_cfa=composite(ds, "cfa", cfa_weights) if cfa_weights is not None else None,
        composite_theory=(
            composite(ds, "theory", theory_weights) if theory_weights is not None else None
        ),
        authority_gap=gap,
        balance=balance,
        wadi_x_ha=wadi_x_ha,
        respondent_counts=rs.respondent_counts(),
        flags=flags,
    )


def score_firms(
    response_sets,
    catalog: dict,
    norm_pool: str = "firm",
    cfa_weights=None,
    theory_weights=None,
) -> list:
    """Score a batch of firms with within-firm or cross-firm z-pools."""
    if norm_pool not in ("firm", "global"):
        raise ParamError("norm_pool must be 'firm' or 'global'")
    pool = item_pool_stats(response_sets, catalog) if norm_pool == "global" else None
    return [
        score_firm(rs, cfa_weights=cfa_weights, theory_weights=theory_weights, pool_stats=pool)
        for rs in response_sets
    ]


# ---------------------------------------------------------------------------
# CSV interfaces


def _parse_flag(s: str) -> bool:
    if s.strip().lower() in ("1", "true", "yes"):
        return True
    if s.strip().lower() in ("0", "false", "no"):
        return False
    raise ParamError(f"bad boolean flag '{s}' in catalog")


def read_catalog_csv(path) -> dict:
    """Item catalog CSV: item_id, dimension, reverse, binary, dual_level."""
    catalog = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "dimension", "reverse", "binary", "dual_level"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ParamError(f"catalog CSV needs columns {sorted(required)}")
        for row in reader:
            catalog[row["item_id"]] = ItemSpec(
                dimension=int(row["dimension"]),
                reverse=_parse_flag(row["reverse"]),
                binary=_parse_flag(row["binary"]),
                dual_level=_parse_flag(row["dual_level"]),
            )
    return catalog


def read_responses_csv(path, catalog: dict) -> list:
    """Response CSV: firm_id, respondent_id, role, item_id, value."""
    firms: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"firm_id", "respondent_id", "role", "item_id", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ParamError(f"response CSV needs columns {sorted(required)}")
        for row in reader:
            firms.setdefault(row["firm_id"], []).append(
                (row["respondent_id"], row["role"], row["item_id"], float(row["value"]))
            )
    return [
        WadiResponseSet(firm_id=firm_id, responses=rows, item_catalog=catalog)
        for firm_id, rows in sorted(firms.items())
    ]


def default_catalog_path() -> Path:
    """Packaged default 36-item catalog."""
    import importlib.resources

    return Path(importlib.resources.files("augmentlab") / "data" / "wadi_catalog_default.csv")
