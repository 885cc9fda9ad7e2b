"""Parameter sweeps, figure presets and delimited result tables."""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import optimize

from . import __version__
from .errors import ConfigError, InvalidParameterError, NumericalFailureError, QDSqueezeError
from .observables import report
from .operators import build_operators
from .phonons import IncoherentRates, bath_model, incoherent_rates
from .steady import converge_truncation
from .units import (
    BATH_KEYS,
    CONFIG_KEYS,
    FIELD_TO_KEY,
    PhononBathParams,
    PhysicalParams,
    get_param,
    params_from_config,
    params_to_config,
    set_param,
)

LOGGER = logging.getLogger(__name__)

STEADY_OUTPUTS = (
    "variance",
    "population",
    "coherence_sq",
    "coherence_re",
    "coherence_im",
    "theta_star_rad",
    "squeezing_dB",
    "photon_number",
)
RATE_OUTPUTS = (
    "rate_sigma_plus_perps",
    "rate_sigma_minus_perps",
    "rate_sigma_plus_a_perps",
    "rate_a_dag_sigma_minus_perps",
)
_REPORT_FIELDS = {
    "variance": "variance_min",
    "population": "population",
    "coherence_sq": "coherence_sq",
    "coherence_re": "coherence_re",
    "coherence_im": "coherence_im",
    "theta_star_rad": "theta_star",
    "squeezing_dB": "squeezing_db",
    "photon_number": "photon_number",
}
_RATE_FIELDS = dict(zip(RATE_OUTPUTS, (f.name for f in dataclasses.fields(IncoherentRates))))
NORMALIZATIONS = ("generalized_rabi",)
FIGURE_IDS = ("fig1", "fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b")


@dataclass(frozen=True)
class Axis:
    """One sweep axis over a :class:`PhysicalParams` field.

    With ``normalized=True`` the values are multiples of the sweep's
    normalization scale rather than physical values.
    """

    name: str
    values: tuple[float, ...]
    normalized: bool = False

    def __post_init__(self):
        key = FIELD_TO_KEY.get(self.name)
        if key is None or self.name in ("phonons_enabled",):
            raise InvalidParameterError(f"cannot sweep over {self.name!r}", self.name)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            raise InvalidParameterError(f"axis {self.name} needs a non-empty finite grid", self.name)
        d = np.diff(v)
        if v.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidParameterError(f"axis {self.name} grid must be strictly monotone", self.name)

    @classmethod
    def linear(cls, name, start, stop, count, normalized=False):
        return cls(name, tuple(float(x) for x in np.linspace(start, stop, int(count))), normalized)

    @property
    def column(self) -> str:
        return FIELD_TO_KEY[self.name]


@dataclass(frozen=True)
class Link:
    """Set ``target = factor * source`` at every grid point; source may be ``generalized_rabi``."""

    target: str
    source: str
    factor: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    base: PhysicalParams
    axis1: Axis
    axis2: Axis | None = None
    links: tuple[Link, ...] = ()
    normalization: str | None = None
    outputs: tuple[str, ...] = STEADY_OUTPUTS
    kind: str = "steady"
    method: str = "effective"
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("steady", "rates"):
            raise InvalidParameterError(f"unknown sweep kind {self.kind!r}", "kind")
        if self.method not in ("effective", "full"):
            raise InvalidParameterError(f"unknown method {self.method!r}", "method")
        if self.normalization not in (None, *NORMALIZATIONS):
            raise InvalidParameterError(f"unknown normalization {self.normalization!r}", "normalization")
        known = STEADY_OUTPUTS if self.kind == "steady" else RATE_OUTPUTS
        bad = [o for o in self.outputs if o not in known]
        if bad:
            raise InvalidParameterError(f"unknown outputs for {self.kind} sweep: {bad}", "outputs")
        axes = [self.axis1] + ([self.axis2] if self.axis2 else [])
        if any(ax.normalized for ax in axes) and self.normalization is None:
            raise InvalidParameterError("normalized axis requires a normalization, e.g. normalize = 'generalized_rabi'", "normalization")
        if self.axis2 and self.axis2.name == self.axis1.name:
            raise InvalidParameterError("the two sweep axes must differ", "axis2")
        if self.axis1.normalized and self.axis1.name in ("omega_R", "delta_xl"):
            raise InvalidParameterError("the normalized axis cannot enter its own normalization", "axis1")
        for link in self.links:
            FIELD_TO_KEY.get(link.target) or _bad_param(link.target)
            if link.source not in NORMALIZATIONS:
                FIELD_TO_KEY.get(link.source) or _bad_param(link.source)

    def points(self) -> list[tuple[PhysicalParams, dict[str, float]]]:
        """Every grid point with its parameters and axis coordinates, axis2 outermost."""
        outer = self.axis2.values if self.axis2 else (None,)
        pts = []
        for v2 in outer:
            for v1 in self.axis1.values:
                p = self.base
                coords: dict[str, float] = {}
                if self.axis2:
                    p = set_param(p, self.axis2.name, v2)
                p = set_param(p, self.axis1.name, v1)
                p = _apply_links(p, self.links)
                if self.axis1.normalized:
                    scale = _normalization(p, self.normalization)
                    p = _apply_links(set_param(p, self.axis1.name, v1 * scale), self.links)
                    coords[self.axis1.name + "_norm"] = v1
                pts.append((p, coords))
        return pts


def _bad_param(name):
    raise InvalidParameterError(f"unknown parameter {name!r}", name)


def _normalization(p: PhysicalParams, name):
    if name == "generalized_rabi":
        return p.generalized_rabi
    raise InvalidParameterError(f"unknown normalization {name!r}", "normalization")


def _apply_links(p: PhysicalParams, links: Sequence[Link]) -> PhysicalParams:
    for link in links:
        source = _normalization(p, link.source) if link.source in NORMALIZATIONS else get_param(p, link.source)
        p = set_param(p, link.target, link.factor * source)
    return p


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float if name != "error" else object)

    def where(self, **equal) -> "ResultTable":
        idx = {k: self.columns.index(k) for k in equal}
        rows = [r for r in self.rows if all(np.isclose(r[idx[k]], v) for k, v in equal.items())]
        return ResultTable(list(self.columns), rows, dict(self.meta))

    @property
    def failed_rows(self) -> int:
        i = self.columns.index("error") if "error" in self.columns else None
        return 0 if i is None else sum(1 for r in self.rows if r[i])


# --- point evaluation -----------------------------------------------------


@functools.lru_cache(maxsize=65536)
def _rates_cached(bath: PhononBathParams, temperature, omega_R, g_R, delta_xl, delta_cl) -> IncoherentRates:
    p = PhysicalParams(
        omega_R=omega_R, g_R=g_R, delta_xl=delta_xl, delta_cl=delta_cl, temperature=temperature, bath=bath
    )
    return incoherent_rates(p, bath_model(bath, temperature))


def point_rates(p: PhysicalParams) -> IncoherentRates:
    if not p.phonons_enabled or p.bath.alpha_p == 0:
        return IncoherentRates()
    return _rates_cached(p.bath, p.temperature, p.omega_R, p.g_R, p.delta_xl, p.delta_cl)


def evaluate_point(p: PhysicalParams, kind="steady", method="effective") -> dict[str, float]:
    """All output fields for one parameter point."""
    if kind == "rates":
        r = point_rates(p)
        return {col: getattr(r, name) for col, name in _RATE_FIELDS.items()}
    model = bath_model(p.bath, p.temperature) if p.phonons_enabled and p.bath.alpha_p > 0 else None
    rates = point_rates(p) if method == "effective" else None
    n, sol = converge_truncation(p, model, method, rates=rates)
    rep = report(sol.rho, build_operators(n)).as_dict()
    out = {col: rep[name] for col, name in _REPORT_FIELDS.items()}
    out["fock_n"] = n
    return out


def _columns(spec: SweepSpec) -> list[str]:
    cols = []
    for ax in (spec.axis2, spec.axis1):
        if ax is None:
            continue
        cols.append(ax.column)
        if ax.normalized:
            cols.append(ax.name + "_norm")
    for link in spec.links:
        c = FIELD_TO_KEY[link.target]
        if c not in cols:
            cols.append(c)
    if spec.kind == "rates" and "delta_cx_ueV" not in cols:
        cols.append("delta_cx_ueV")
    cols.extend(spec.outputs)
    if spec.kind == "steady":
        cols.append("fock_n")
    cols.append("error")
    return cols


def _row(spec: SweepSpec, cols, p: PhysicalParams, coords) -> list[Any]:
    values: dict[str, Any] = {}
    try:
        values.update(evaluate_point(p, spec.kind, spec.method))
        values["error"] = ""
    except (QDSqueezeError, np.linalg.LinAlgError) as exc:
        LOGGER.warning("grid point failed: %s", exc)
        values["error"] = f"{type(exc).__name__}: {exc}"
    row = []
    for c in cols:
        if c in values:
            row.append(values[c])
        elif c in coords:
            row.append(coords[c])
        elif c == "delta_cx_ueV":
            row.append(p.delta_cx)
        elif c in CONFIG_KEYS or c in BATH_KEYS:
            row.append(float(get_param(p, c)))
        else:
            row.append(math.nan)
    return row


def spec_to_config(spec: SweepSpec) -> dict[str, Any]:
    """Canonical JSON-serializable form of a sweep, as accepted by :func:`spec_from_config`."""

    def axis_cfg(ax: Axis):
        return {"axis": ax.column, "values": list(ax.values), "normalized": ax.normalized}

    sweep = {
        "kind": spec.kind,
        "method": spec.method,
        **axis_cfg(spec.axis1),
        "normalize": spec.normalization,
        "outputs": list(spec.outputs),
        "links": [
            {
                "target": FIELD_TO_KEY[l.target],
                "source": l.source if l.source in NORMALIZATIONS else FIELD_TO_KEY[l.source],
                "factor": l.factor,
            }
            for l in spec.links
        ],
    }
    if spec.axis2:
        sweep["axis2"] = axis_cfg(spec.axis2)
    if spec.label:
        sweep["label"] = spec.label
    return {**params_to_config(spec.base), "sweep": sweep}


def config_hash(spec: SweepSpec) -> str:
    blob = json.dumps(spec_to_config(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_sweep(spec: SweepSpec, threads: int = 1) -> ResultTable:
    """Evaluate every grid point; failures are recorded per row.

    Raises :class:`NumericalFailureError` only when every point fails.
    """
    cols = _columns(spec)
    pts = spec.points()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda pc: _row(spec, cols, *pc), pts))
    else:
        rows = [_row(spec, cols, p, c) for p, c in pts]
    table = ResultTable(cols, rows)
    failed = table.failed_rows
    if rows and failed == len(rows):
        raise NumericalFailureError(f"all {failed} grid points failed; first error: {rows[0][-1]}")
    fock = [r[cols.index("fock_n")] for r in rows if "fock_n" in cols and not r[-1]]
    table.meta = {
        "tool": "qdsqueeze",
        "version": __version__,
        "config_hash": config_hash(spec),
        "label": spec.label,
        "kind": spec.kind,
        "method": spec.method,
        "truncation_max": max(fock) if fock else "",
        "rows": len(rows),
        "failed_rows": failed,
    }
    return table


# --- presets ----------------------------------------------------------------

_PRESET_BASE = PhysicalParams(gamma=2.0, gamma_prime=0.5, temperature=4.0, fock_truncation=4)


def figure_preset(figure_id: str) -> SweepSpec:
    """Sweep reproducing one figure of the squeezing study."""
    detuning = Axis.linear("delta_cl", -3.0, 3.0, 241, normalized=True)
    series = Axis("omega_R", (50.0, 100.0, 200.0))

    def cavity_links(sign):
        return (Link("g_R", "omega_R", 0.6), Link("kappa", "omega_R", 0.9), Link("delta_xl", "omega_R", sign))

    if figure_id == "fig1":
        base = dataclasses.replace(_PRESET_BASE, omega_R=100.0, g_R=100.0)
        return SweepSpec(
            base,
            Axis.linear("delta_xl", -2000.0, 2000.0, 401),
            Axis("temperature", (4.0, 10.0)),
            links=(Link("delta_cl", "delta_xl", 2.0),),
            outputs=RATE_OUTPUTS,
            kind="rates",
            label=figure_id,
        )
    if figure_id in ("fig2", "fig3a", "fig3b"):
        phonons = figure_id != "fig2"
        sign = -1.0 if figure_id == "fig3b" else 1.0
        base = dataclasses.replace(_PRESET_BASE, phonons_enabled=phonons, temperature=4.0 if phonons else 0.0)
        return SweepSpec(base, detuning, series, cavity_links(sign), "generalized_rabi", label=figure_id)
    if figure_id in ("fig4a", "fig4b"):
        phonons = figure_id == "fig4b"
        sign = -1.0 if phonons else 1.0
        base = dataclasses.replace(
            _PRESET_BASE,
            omega_R=200.0,
            kappa=180.0,
            delta_xl=sign * 200.0,
            phonons_enabled=phonons,
            temperature=4.0 if phonons else 0.0,
        )
        return SweepSpec(
            base,
            detuning,
            Axis("g_R", (120.0, 0.0)),
            normalization="generalized_rabi",
            outputs=("population", "coherence_sq", "variance", "photon_number"),
            label=figure_id,
        )
    if figure_id in ("fig5a", "fig5b"):
        phonons = figure_id == "fig5b"
        sign = -1.0 if phonons else 1.0
        base = dataclasses.replace(
            _PRESET_BASE,
            omega_R=200.0,
            g_R=120.0,
            kappa=180.0,
            delta_xl=sign * 200.0,
            phonons_enabled=phonons,
            temperature=4.0 if phonons else 0.0,
        )
        return SweepSpec(
            base,
            Axis.linear("gamma_prime", 0.5, 18.0, 36),
            Axis.linear("gamma", 1.0, 3.0, 21),
            links=(Link("delta_cl", "generalized_rabi", sign),),
            outputs=("variance", "population", "coherence_sq"),
            label=figure_id,
        )
    raise InvalidParameterError(f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")


# --- config -------------------------------------------------------------------


def _axis_from_config(cfg: Mapping[str, Any], where: str) -> Axis:
    allowed = {"axis", "start", "stop", "count", "scale", "values", "normalized"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}", sorted(unknown)[0])
    key = cfg.get("axis")
    name = CONFIG_KEYS.get(key) or BATH_KEYS.get(key)
    if name is None:
        raise ConfigError(f"{where}.axis must be a parameter key, got {key!r}", "axis")
    if cfg.get("scale", "linear") != "linear":
        raise ConfigError(f"{where}.scale must be 'linear'", "scale")
    normalized = bool(cfg.get("normalized", False))
    try:
        if "values" in cfg:
            return Axis(name, tuple(float(v) for v in cfg["values"]), normalized)
        return Axis.linear(name, float(cfg["start"]), float(cfg["stop"]), int(cfg["count"]), normalized)
    except KeyError as exc:
        raise ConfigError(f"{where} needs 'values' or start/stop/count (missing {exc})", str(exc)) from exc
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), exc.field) from exc


def spec_from_config(cfg: Mapping[str, Any]) -> SweepSpec:
    """Parse a sweep config: parameter keys plus a ``sweep`` block."""
    cfg = dict(cfg)
    sweep = cfg.pop("sweep", None)
    base = params_from_config(cfg)
    if not isinstance(sweep, Mapping):
        raise ConfigError("configuration has no 'sweep' block", "sweep")
    sweep = dict(sweep)
    allowed = {"kind", "method", "normalize", "outputs", "links", "axis2", "label"}
    axis_keys = {"axis", "start", "stop", "count", "scale", "values", "normalized"}
    unknown = set(sweep) - allowed - axis_keys
    if unknown:
        raise ConfigError(f"unknown keys in sweep: {sorted(unknown)}", sorted(unknown)[0])
    normalize = sweep.get("normalize")
    axis1_cfg = {k: sweep[k] for k in axis_keys if k in sweep}
    if normalize and "normalized" not in axis1_cfg:
        axis1_cfg["normalized"] = True
    axis1 = _axis_from_config(axis1_cfg, "sweep")
    axis2 = _axis_from_config(sweep["axis2"], "sweep.axis2") if sweep.get("axis2") else None
    links = []
    for item in sweep.get("links", []):
        try:
            src = item["source"]
            links.append(
                Link(
                    CONFIG_KEYS.get(item["target"]) or BATH_KEYS.get(item["target"]) or _bad_param(item["target"]),
                    src if src in NORMALIZATIONS else (CONFIG_KEYS.get(src) or BATH_KEYS.get(src) or _bad_param(src)),
                    float(item.get("factor", 1.0)),
                )
            )
        except (KeyError, TypeError, InvalidParameterError) as exc:
            raise ConfigError(f"malformed link {item!r}: {exc}", "links") from exc
    kind = sweep.get("kind", "steady")
    outputs = tuple(sweep.get("outputs") or (STEADY_OUTPUTS if kind == "steady" else RATE_OUTPUTS))
    try:
        return SweepSpec(
            base,
            axis1,
            axis2,
            tuple(links),
            normalize,
            outputs,
            kind,
            sweep.get("method", "effective"),
            sweep.get("label", ""),
        )
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), exc.field) from exc


def load_config(path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


# --- emission -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _json_value(value):
    if isinstance(value, str) or isinstance(value, (bool, np.bool_)):
        return value if isinstance(value, str) else bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    return None if math.isnan(value) else float(f"{value:.12g}")


def format_table(table: ResultTable, fmt="csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        for key, value in table.meta.items():
            buf.write(f"# {key}={_fmt(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        payload = {
            "meta": {k: _json_value(v) for k, v in table.meta.items()},
            "columns": list(table.columns),
            "rows": [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows],
        }
        return json.dumps(payload, indent=1) + "\n"
    raise InvalidParameterError(f"unknown format {fmt!r}", "format")


def emit(table: ResultTable, fmt="csv", path=None) -> str:
    """Write the table as CSV or JSON to ``path`` (or return the text when ``path`` is None)."""
    text = format_table(table, fmt)
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise QDSqueezeError(f"cannot write {path}: {exc}") from exc
    return text


def _parse_scalar(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path) -> ResultTable:
    """Parse a table written by :func:`emit` (format detected from content)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        cols = data["columns"]
        rows = [[math.nan if r[c] is None else r[c] for c in cols] for r in data["rows"]]
        return ResultTable(cols, rows, data["meta"])
    meta = {}
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            meta[key] = _parse_scalar(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    cols = next(reader)
    rows = []
    for rec in reader:
        rows.append([v if c == "error" else _parse_scalar(v) for c, v in zip(cols, rec)])
    return ResultTable(cols, rows, meta)


# --- analysis helpers ---------------------------------------------------------


def minimize_variance(p: PhysicalParams, name: str, lo: float, hi: float, normalized=False, method="effective", xatol=1e-4):
    """Minimize the steady-state variance over one parameter within [lo, hi].

    With ``normalized=True`` the parameter is ``x * generalized_rabi``.
    Returns ``(x_min, variance_min)`` in the same (possibly normalized) units.
    """
    scale = p.generalized_rabi if normalized else 1.0

    def objective(x):
        return evaluate_point(set_param(p, name, x * scale), "steady", method)["variance"]

    res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(res.x), float(res.fun)


def level_crossings(x, y, level) -> list[float]:
    """Positions where the sampled curve y(x) crosses ``level``, by linear interpolation."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(y, dtype=float) - level
    out = []
    for i in range(len(x) - 1):
        if d[i] == 0:
            out.append(float(x[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(x[i] - d[i] * (x[i + 1] - x[i]) / (d[i + 1] - d[i])))
    if len(d) and d[-1] == 0:
        out.append(float(x[-1]))
    return out
