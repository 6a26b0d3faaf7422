"""Evaluation: pointwise metrics, gridded prediction, latitude transects,
annual means and the transect comparison tables.

Gridded fields use NaN as the missing-value sentinel.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import nn
from .data import FEATURES, NormStats
from .errors import (DomainError, InsufficientDataError, NumericalError, SchemaError,
                     ShapeError)
from .nn import MlpParams

MISSING = math.nan
DEFAULT_LATITUDES = (0.0, 15.0, 30.0)


@dataclass(frozen=True)
class Metrics:
    mae: float
    r2: float
    mean_bias: float
    pearson: float
    stddev_diff: float
    n: int

    @property
    def accuracy_pct(self) -> float:
        """R^2 x 100, the reading used for the reported "accuracy" figures."""
        return 100.0 * self.r2

    def to_dict(self) -> dict:
        """JSON-ready dict; undefined (NaN) fields become ``None``."""
        d = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}
        d["accuracy_pct"] = d["r2"] if d["r2"] is None else self.accuracy_pct
        d["accuracy_label"] = "accuracy (R2 x 100)"
        return d


def compute_metrics(predicted, reference, strict: bool = False) -> Metrics:
    """MAE, R^2, mean bias, Pearson r and population std of ``predicted - reference``.

    R^2 is undefined when the reference is constant and Pearson r when
    either series is constant.  Those fields are NaN unless ``strict``,
    in which case a :class:`NumericalError` is raised.
    """
    p = np.asarray(predicted, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if p.shape != r.shape:
        raise ShapeError(f"{p.size} predictions vs {r.size} reference values")
    if p.size < 2:
        raise InsufficientDataError(f"need at least 2 paired values, got {p.size}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
        raise NumericalError("metrics require finite inputs")
    diff = p - r
    pc, rc = p - p.mean(), r - r.mean()
    sst = float(np.sum(rc * rc))
    spp = float(np.sum(pc * pc))
    if sst == 0:
        if strict:
            raise NumericalError("r2 undefined: reference has zero variance")
        r2 = math.nan
    else:
        r2 = float(1.0 - np.sum(diff * diff) / sst)
    if sst == 0 or spp == 0:
        if strict:
            raise NumericalError("pearson undefined: a series has zero variance")
        pearson = math.nan
    else:
        pearson = float(np.clip(np.sum(pc * rc) / math.sqrt(spp * sst), -1.0, 1.0))
    return Metrics(
        mae=float(np.mean(np.abs(diff))),
        r2=r2,
        mean_bias=float(np.mean(diff)),
        pearson=pearson,
        stddev_diff=float(np.std(diff)),
        n=int(p.size),
    )


def _strictly_monotonic(a: np.ndarray) -> bool:
    if a.size < 2:
        return True
    d = np.diff(a)
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass
class GridCube:
    lats: np.ndarray
    lons: np.ndarray
    times: list[str]
    values: np.ndarray          # [time, lat, lon]

    def __post_init__(self):
        self.lats = np.asarray(self.lats, dtype=np.float64)
        self.lons = np.asarray(self.lons, dtype=np.float64)
        self.times = list(self.times)
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = (len(self.times), self.lats.size, self.lons.size)
        if self.values.shape != shape:
            raise ShapeError(f"grid values have shape {self.values.shape}, coordinates imply {shape}")
        if not (_strictly_monotonic(self.lats) and _strictly_monotonic(self.lons)):
            raise ShapeError("grid coordinates must be strictly monotonic")
        if len(set(self.times)) != len(self.times):
            raise ShapeError("grid time stamps must be unique")

    def same_coords(self, other: "GridCube") -> bool:
        return (self.times == other.times and np.array_equal(self.lats, other.lats)
                and np.array_equal(self.lons, other.lons))


@dataclass
class Transect:
    latitude: float
    longitudes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.longitudes = np.asarray(self.longitudes, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.longitudes.shape != self.values.shape:
            raise ShapeError("transect longitudes and values differ in length")
        if self.longitudes.size > 1 and not np.all(np.diff(self.longitudes) > 0):
            raise ShapeError("transect longitudes must be strictly increasing")


def predict_grid(params: MlpParams, stats: NormStats, channels: Mapping[str, GridCube]) -> GridCube:
    """Run the network on every cell of a nine-channel feature grid."""
    names = stats.feature_names
    if params.input_dim != len(names):
        raise ShapeError(f"model takes {params.input_dim} inputs, stats describe {len(names)} features")
    for name in names:
        if name not in channels:
            raise SchemaError(f"feature grid is missing channel {name!r}")
    first = channels[names[0]]
    for name in names[1:]:
        if not channels[name].same_coords(first):
            raise ShapeError(f"channel {name!r} does not share coordinates with {names[0]!r}")
    stack = np.stack([channels[name].values for name in names], axis=-1)   # [T, L, M, 9]
    flat = stack.reshape(-1, len(names))
    ok = np.all(np.isfinite(flat), axis=1)
    out = np.full(flat.shape[0], MISSING)
    if ok.any():
        out[ok] = nn.predict(params, stats.apply(flat[ok]))
    return GridCube(first.lats.copy(), first.lons.copy(), list(first.times), out.reshape(first.values.shape))


def nearest_lat_index(lats: np.ndarray, latitude: float) -> int:
    lats = np.asarray(lats, dtype=np.float64)
    if lats.size == 0:
        raise DomainError("grid has no latitude rows")
    dist = np.abs(lats - latitude)
    best = dist.min()
    ties = np.flatnonzero(dist == best)
    idx = int(ties[np.argmin(lats[ties])])      # tie -> smaller latitude
    spacing = float(np.min(np.abs(np.diff(lats)))) if lats.size > 1 else 0.0
    if best > spacing:
        raise DomainError(f"latitude {latitude} is more than one grid spacing from the grid")
    return idx


def extract_transect(grid: GridCube, latitude: float, time_index: int = 0) -> Transect:
    if not 0 <= time_index < len(grid.times):
        raise DomainError(f"time index {time_index} outside 0..{len(grid.times) - 1}")
    i = nearest_lat_index(grid.lats, latitude)
    row = grid.values[time_index, i, :]
    lons = grid.lons
    order = np.argsort(lons)
    lons, row = lons[order], row[order]
    ok = np.isfinite(row)
    return Transect(float(grid.lats[i]), lons[ok], row[ok])


def annual_average(grid: GridCube, year: int) -> GridCube:
    """Per-cell mean over the months stamped in ``year``, ignoring missing cells."""
    sel = [k for k, t in enumerate(grid.times) if str(t)[:4] == f"{int(year):04d}"]
    if not sel:
        raise InsufficientDataError(f"grid has no months in {year}")
    block = grid.values[sel]
    present = np.isfinite(block)
    count = present.sum(axis=0)
    total = np.where(present, block, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), MISSING)
    return GridCube(grid.lats.copy(), grid.lons.copy(), [f"{int(year):04d}"], mean[None])


@dataclass(frozen=True)
class TransectComparison:
    latitude: float
    stddev_kg_m2: float
    correlation_pct: float
    n: int


def compare_transects(predicted: GridCube, reference: GridCube,
                      latitudes: Sequence[float] = DEFAULT_LATITUDES,
                      year: Optional[int] = None) -> list[TransectComparison]:
    """Standard deviation of differences and Pearson correlation (percent)
    between annual-mean transects of two grids.

    With ``year=None`` both grids are taken to be already averaged (their
    first time slot is used).
    """
    if year is not None:
        predicted = annual_average(predicted, year)
        reference = annual_average(reference, year)
    rows = []
    for lat in latitudes:
        tp = extract_transect(predicted, lat, 0)
        tr = extract_transect(reference, lat, 0)
        common, ip, ir = np.intersect1d(np.round(tp.longitudes, 9), np.round(tr.longitudes, 9),
                                        return_indices=True)
        if common.size < 2:
            raise InsufficientDataError(f"fewer than 2 aligned cells on the {lat} degree transect")
        m = compute_metrics(tp.values[ip], tr.values[ir], strict=True)
        rows.append(TransectComparison(float(lat), m.stddev_diff, 100.0 * m.pearson, m.n))
    return rows


def write_comparison_csv(rows: Sequence[TransectComparison], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["latitude", "stddev_kg_m2", "correlation_pct"])
        for row in rows:
            w.writerow([f"{row.latitude:g}", f"{row.stddev_kg_m2:.2f}", f"{row.correlation_pct:.2f}"])


def write_transects_csv(transects: Sequence[Transect], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["latitude", "longitude", "value"])
        for t in transects:
            for lon, v in zip(t.longitudes, t.values):
                w.writerow([repr(float(t.latitude)), repr(float(lon)), repr(float(v))])


def read_grid_csv(path, columns: Sequence[str]) -> dict[str, GridCube]:
    """Read long-format gridded CSV (``time, lat, lon, <columns>``) into cubes.

    Cells absent from the file or left empty become missing.  Latitudes
    and longitudes are sorted ascending; times are sorted as strings.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"grid file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        for name in ("time", "lat", "lon", *columns):
            if name not in header:
                raise SchemaError(f"{path}: missing required column {name!r}")
        ci = {name: header.index(name) for name in header}
        recs = []
        for row in reader:
            if not row:
                continue
            try:
                t, la, lo = row[ci["time"]].strip(), float(row[ci["lat"]]), float(row[ci["lon"]])
            except (ValueError, IndexError):
                raise SchemaError(f"{path}: unreadable coordinates in row {row!r}") from None
            vals = []
            for name in columns:
                try:
                    v = float(row[ci[name]])
                except (ValueError, IndexError):
                    v = MISSING
                vals.append(v if math.isfinite(v) else MISSING)
            recs.append((t, la, lo, vals))
    if not recs:
        raise InsufficientDataError(f"{path}: no grid rows")
    times = sorted({r[0] for r in recs})
    lats = np.array(sorted({r[1] for r in recs}))
    lons = np.array(sorted({r[2] for r in recs}))
    ti = {t: k for k, t in enumerate(times)}
    li = {v: k for k, v in enumerate(lats)}
    mi = {v: k for k, v in enumerate(lons)}
    cubes = {name: np.full((len(times), lats.size, lons.size), MISSING) for name in columns}
    for t, la, lo, vals in recs:
        for name, v in zip(columns, vals):
            cubes[name][ti[t], li[la], mi[lo]] = v
    return {name: GridCube(lats, lons, times, cubes[name]) for name in columns}


def write_grid_csv(grid: GridCube, path, column: str = "tcwv") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "lat", "lon", column])
        for k, t in enumerate(grid.times):
            for i, la in enumerate(grid.lats):
                for j, lo in enumerate(grid.lons):
                    v = grid.values[k, i, j]
                    w.writerow([t, repr(float(la)), repr(float(lo)), repr(float(v)) if math.isfinite(v) else ""])


def feature_channels(path) -> dict[str, GridCube]:
    return read_grid_csv(path, FEATURES)
