"""Sample tables: CSV ingestion, standardisation, seeded splitting and a
synthetic ERA5-like generator.

All randomness goes through ``numpy.random.default_rng`` (PCG64), whose
stream is stable across platforms for a given seed.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, InsufficientDataError, SchemaError

FEATURES = ("msl", "sp", "sst", "u100", "v100", "u10", "v10", "d2m", "t2m")
TARGET = "tcwv"
COLUMNS = FEATURES + (TARGET,)
COORDS = ("lat", "lon", "time")
UNITS = {
    "msl": "Pa", "sp": "Pa", "sst": "K",
    "u100": "m/s", "v100": "m/s", "u10": "m/s", "v10": "m/s",
    "d2m": "K", "t2m": "K", "tcwv": "kg/m^2",
    "lat": "degrees_north", "lon": "degrees_east", "time": "YYYY-MM",
}


@dataclass
class SampleTable:
    features: np.ndarray            # [N, 9], column order FEATURES
    target: np.ndarray              # [N]
    lat: Optional[np.ndarray] = None
    lon: Optional[np.ndarray] = None
    time: Optional[list[str]] = None
    feature_names: tuple[str, ...] = FEATURES

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, len(self.feature_names))
        self.target = np.asarray(self.target, dtype=np.float64).ravel()
        if self.features.shape[0] != self.target.shape[0]:
            raise SchemaError(f"{self.features.shape[0]} feature rows vs {self.target.shape[0]} targets")
        if self.lat is not None:
            self.lat = np.asarray(self.lat, dtype=np.float64)
            if np.any(np.abs(self.lat) > 90):
                raise SchemaError("lat outside [-90, 90]")
        if self.lon is not None:
            self.lon = np.asarray(self.lon, dtype=np.float64)
            if np.any(np.abs(self.lon) > 180):
                raise SchemaError("lon outside [-180, 180]")

    def __len__(self):
        return self.target.shape[0]

    def take(self, idx) -> "SampleTable":
        idx = np.asarray(idx, dtype=np.intp)
        return SampleTable(
            self.features[idx], self.target[idx],
            None if self.lat is None else self.lat[idx],
            None if self.lon is None else self.lon[idx],
            None if self.time is None else [self.time[i] for i in idx],
            self.feature_names,
        )


def _parse_float(cell: str) -> float:
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return value


def ingest_csv(path, missing_policy: str = "drop") -> SampleTable:
    """Read a CSV with the canonical lowercase header.

    Rows with an empty, non-numeric or non-finite value are dropped
    (``missing_policy="drop"``) or have that cell replaced by the column
    mean over valid cells (``"fill_mean"``).  Coordinate columns are
    optional; a row whose lat/lon is unusable is always dropped.
    """
    if missing_policy not in ("drop", "fill_mean"):
        raise ConfigError(f"unknown missing_policy {missing_policy!r}")
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        for name in COLUMNS:
            if name not in header:
                raise SchemaError(f"{path}: missing required column {name!r}")
        col = {name: header.index(name) for name in header}
        has = {c: c in col for c in COORDS}

        values, coords = [], []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                lat = _parse_float(row[col["lat"]]) if has["lat"] else None
                lon = _parse_float(row[col["lon"]]) if has["lon"] else None
                tstamp = row[col["time"]].strip() if has["time"] else None
            except (ValueError, IndexError):
                continue
            cells = []
            for name in COLUMNS:
                try:
                    cells.append(_parse_float(row[col[name]]))
                except (ValueError, IndexError):
                    cells.append(math.nan)
            values.append(cells)
            coords.append((lat, lon, tstamp))

    arr = np.array(values, dtype=np.float64).reshape(-1, len(COLUMNS))
    bad = np.isnan(arr)
    if missing_policy == "drop":
        keep = ~bad.any(axis=1)
    else:
        keep = np.ones(arr.shape[0], dtype=bool)
        for j in range(arr.shape[1]):
            ok = ~bad[:, j]
            if not ok.any():
                raise InsufficientDataError(f"{path}: column {COLUMNS[j]!r} has no valid values to fill from")
            arr[bad[:, j], j] = arr[ok, j].mean()
    arr = arr[keep]
    coords = [c for c, k in zip(coords, keep) if k]
    if arr.shape[0] == 0:
        raise InsufficientDataError(f"{path}: no valid rows")
    return SampleTable(
        arr[:, :-1], arr[:, -1],
        np.array([c[0] for c in coords]) if has["lat"] else None,
        np.array([c[1] for c in coords]) if has["lon"] else None,
        [c[2] for c in coords] if has["time"] else None,
    )


def write_csv(table: SampleTable, path) -> None:
    coord_cols = [c for c, v in (("lat", table.lat), ("lon", table.lon), ("time", table.time)) if v is not None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coord_cols + list(COLUMNS))
        for i in range(len(table)):
            row = []
            if table.lat is not None:
                row.append(repr(float(table.lat[i])))
            if table.lon is not None:
                row.append(repr(float(table.lon[i])))
            if table.time is not None:
                row.append(table.time[i])
            row.extend(repr(float(v)) for v in table.features[i])
            row.append(repr(float(table.target[i])))
            w.writerow(row)


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple[str, ...] = FEATURES

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def invert(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"features": list(self.feature_names),
                "mean": [float(v) for v in self.mean],
                "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        names = tuple(d.get("features", FEATURES))
        mean, std = d["mean"], d["std"]
        if not (len(mean) == len(std) == len(names)):
            raise SchemaError("norm_stats arrays have inconsistent lengths")
        return cls(np.array(mean, dtype=np.float64), np.array(std, dtype=np.float64), names)


def fit_norm_stats(X) -> NormStats:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 rows to standardise, got {X.shape[0]}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population std
    std = np.where(std > 0, std, 1.0)
    return NormStats(mean, std)


def standardize(table: SampleTable, stats: Optional[NormStats] = None) -> tuple[SampleTable, NormStats]:
    """Z-score the feature columns; the target stays in kg/m^2.

    When ``stats`` is given they are reused (held-out data), otherwise they
    are fitted on ``table``.
    """
    if stats is None:
        stats = fit_norm_stats(table.features)
    return replace(table, features=stats.apply(table.features)), stats


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.01
    test_fraction: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ConfigError(f"train_fraction must lie in (0, 1], got {self.train_fraction}")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in [0, 1), got {self.test_fraction}")
        if self.train_fraction + self.test_fraction > 1 + 1e-12:
            raise ConfigError("train_fraction + test_fraction must not exceed 1")


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int]:
    n_train = max(1, math.floor(n * spec.train_fraction))
    n_test = min(math.floor(n * spec.test_fraction), n - n_train)
    return n_train, n_test


def shuffle_split(table: SampleTable, spec: SplitSpec) -> tuple[SampleTable, SampleTable]:
    n = len(table)
    if n < 1:
        raise InsufficientDataError("cannot split an empty table")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train, n_test = split_sizes(n, spec)
    return table.take(perm[:n_train]), table.take(perm[n_train:n_train + n_test])


# Synthetic generator.  Constants are mirrored in docs/synthetic_reference.md;
# changing any of them requires bumping SYNTH_VERSION and the golden file.
SYNTH_VERSION = 1
SYNTH_SAT_COEF = 1.15        # kg/m^2 per hPa of saturation vapour pressure at d2m
SYNTH_STABILITY_COEF = 0.40  # kg/m^2 per K of (t2m - sst)
SYNTH_WIND_COEF = 0.25       # kg/m^2 per m/s of 10 m wind speed
SYNTH_ITCZ_AMP = 4.0         # kg/m^2
SYNTH_ITCZ_CENTER = 5.0      # degrees N
SYNTH_ITCZ_WIDTH = 8.0       # degrees
SYNTH_OFFSET = -4.5          # kg/m^2
TCWV_MIN, TCWV_MAX = 0.0, 60.0


def saturation_vapour_pressure(temp_k) -> np.ndarray:
    """Magnus formula over water, hPa."""
    tc = np.asarray(temp_k, dtype=np.float64) - 273.15
    return 6.112 * np.exp(17.67 * tc / (tc + 243.5))


def reference_tcwv(features, lat) -> np.ndarray:
    """Noise-free synthetic TCWV (kg/m^2) from the nine features and latitude."""
    X = np.asarray(features, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    d2m, t2m, sst = X[:, 7], X[:, 8], X[:, 2]
    wind10 = np.hypot(X[:, 5], X[:, 6])
    itcz = SYNTH_ITCZ_AMP * np.exp(-(((lat - SYNTH_ITCZ_CENTER) / SYNTH_ITCZ_WIDTH) ** 2))
    raw = (SYNTH_SAT_COEF * saturation_vapour_pressure(d2m)
           + SYNTH_STABILITY_COEF * (t2m - sst)
           + SYNTH_WIND_COEF * wind10
           + itcz
           + SYNTH_OFFSET)
    return np.clip(raw, TCWV_MIN, TCWV_MAX)


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 50_000
    noise_std: float = 1.0
    seed: int = 0
    lat_min: float = -5.0
    lat_max: float = 34.0
    lon_min: float = -34.0
    lon_max: float = 35.0
    resolution: float = 0.25
    start_year: int = 2004
    n_years: int = 3

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if not self.noise_std >= 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not -90 <= self.lat_min <= self.lat_max <= 90:
            raise ConfigError("lat bounds must satisfy -90 <= lat_min <= lat_max <= 90")
        if not -180 <= self.lon_min <= self.lon_max <= 180:
            raise ConfigError("lon bounds must satisfy -180 <= lon_min <= lon_max <= 180")
        if not self.resolution > 0:
            raise ConfigError(f"resolution must be > 0, got {self.resolution}")
        if int(self.n_years) < 1:
            raise ConfigError(f"n_years must be >= 1, got {self.n_years}")

    def grid_axes(self) -> tuple[np.ndarray, np.ndarray]:
        n_lat = int(math.floor((self.lat_max - self.lat_min) / self.resolution + 1e-9)) + 1
        n_lon = int(math.floor((self.lon_max - self.lon_min) / self.resolution + 1e-9)) + 1
        return (self.lat_min + self.resolution * np.arange(n_lat),
                self.lon_min + self.resolution * np.arange(n_lon))

    def months(self) -> list[str]:
        return [f"{self.start_year + k // 12:04d}-{k % 12 + 1:02d}" for k in range(12 * self.n_years)]


def synth_features(rng: np.random.Generator, lat: np.ndarray, month: np.ndarray) -> np.ndarray:
    """Draw the nine features for points at ``lat`` (degrees N) and ``month`` (1-12)."""
    n = lat.shape[0]
    # warm near the equator, cooler poleward; mild seasonal cycle in the north
    season = np.cos(2 * np.pi * (month - 7) / 12) * np.clip(lat, 0, None) / 34.0
    sst = np.clip(301.5 - 0.25 * np.abs(lat) + 2.0 * season + rng.uniform(-1.5, 1.5, n), 270.0, 305.0)
    t2m = np.clip(sst + rng.uniform(-4.0, 3.0, n), 270.0, 305.0)
    d2m = np.clip(t2m - rng.uniform(0.5, 18.0, n), 255.0, 305.0)
    msl = rng.uniform(99_500.0, 103_000.0, n)
    sp = np.clip(msl - rng.uniform(0.0, 6_000.0, n), 95_000.0, 103_000.0)
    u10 = rng.uniform(-10.0, 10.0, n)
    v10 = rng.uniform(-10.0, 10.0, n)
    u100 = np.clip(1.3 * u10 + rng.uniform(-2.0, 2.0, n), -15.0, 15.0)
    v100 = np.clip(1.3 * v10 + rng.uniform(-2.0, 2.0, n), -15.0, 15.0)
    return np.column_stack([msl, sp, sst, u100, v100, u10, v10, d2m, t2m])


def synth_generate(config: SynthConfig) -> SampleTable:
    rng = np.random.default_rng(config.seed)
    lats, lons = config.grid_axes()
    months = config.months()
    n = int(config.n_samples)
    lat = lats[rng.integers(0, lats.size, n)]
    lon = lons[rng.integers(0, lons.size, n)]
    tidx = rng.integers(0, len(months), n)
    X = synth_features(rng, lat, tidx % 12 + 1)
    y = reference_tcwv(X, lat)
    if config.noise_std > 0:
        y = y + rng.normal(0.0, config.noise_std, n)
    return SampleTable(X, y, lat, lon, [months[i] for i in tidx])


def synth_grid(config: SynthConfig) -> SampleTable:
    """Every grid cell for every month, in (time, lat, lon) order."""
    rng = np.random.default_rng(config.seed)
    lats, lons = config.grid_axes()
    months = config.months()
    T, L, M = len(months), lats.size, lons.size
    lat = np.tile(np.repeat(lats, M), T)
    lon = np.tile(lons, T * L)
    month_num = np.repeat(np.arange(T) % 12 + 1, L * M)
    X = synth_features(rng, lat, month_num)
    y = reference_tcwv(X, lat)
    if config.noise_std > 0:
        y = y + rng.normal(0.0, config.noise_std, y.shape[0])
    return SampleTable(X, y, lat, lon, list(np.repeat(months, L * M)))
