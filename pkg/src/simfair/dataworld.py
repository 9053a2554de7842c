"""Synthetic spatiotemporal worlds, train/test partitioners, and CSV I/O.

A world is a set of stations on a lat/lon grid observed daily.  The latent
temperature field combines a latitudinal gradient, a seasonal sinusoid, an
elevation term, and spatially correlated noise.  Simulator driver states
are smooth functions of the field with region-dependent offsets (the
distribution shift), and the observed features are the mechanistic model's
output plus band-scaled observation noise.  Everything is a pure function
of (config, seed).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .simulators import (STEFAN_BOLTZMANN, EnergyBalanceInputs, Pm1Model,
                         Pm2Model, default_model)


class DataError(ValueError):
    """Raised on malformed datasets, configs, or split specifications."""


# ---------------------------------------------------------------------------
# Core containers
# ---------------------------------------------------------------------------

@dataclass
class Station:
    location_id: str
    lat: float
    lon: float
    tags: dict = field(default_factory=dict)

    def validate(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise DataError(f"station {self.location_id}: lat {self.lat} out of range")
        if not (-180.0 <= self.lon <= 180.0):
            raise DataError(f"station {self.location_id}: lon {self.lon} out of range")


@dataclass
class StFeatures:
    """Feature-only view of an ST dataset: deliberately has no label field."""

    stations: list
    loc_ids: np.ndarray
    time_index: np.ndarray
    X: np.ndarray

    @property
    def n(self) -> int:
        return len(self.loc_ids)

    def subset(self, idx) -> "StFeatures":
        idx = np.asarray(idx)
        keep = set(np.asarray(self.loc_ids)[idx].tolist())
        return StFeatures([s for s in self.stations if s.location_id in keep],
                          self.loc_ids[idx], self.time_index[idx], self.X[idx])


PM1_DRIVERS = ("t_bveg", "t_bad", "t_canopy")
PM2_DRIVERS = ("t_atm", "t_dew", "t_air")
PM2_ENERGY = ("rs_down", "rs_up", "rl_down", "h_s", "h_l", "h_g", "emissivity")


def window_features(X, loc_ids, time_index, width: int):
    """Per-station sliding windows over rows; see StDataset.windows."""
    if width < 1:
        raise DataError(f"window width must be >= 1, got {width}")
    by_loc: dict = {}
    for i, s in enumerate(np.asarray(loc_ids)):
        by_loc.setdefault(s, []).append(i)
    xs, locs, times, ends = [], [], [], []
    for loc in by_loc:
        idx = np.asarray(by_loc[loc])
        order = idx[np.argsort(time_index[idx], kind="stable")]
        for j in range(width - 1, len(order)):
            xs.append(X[order[j - width + 1:j + 1]])
            locs.append(loc)
            times.append(time_index[order[j]])
            ends.append(order[j])
    if not xs:
        raise DataError(f"no station has {width} consecutive rows")
    return (np.stack(xs), np.asarray(locs, dtype=object),
            np.asarray(times), np.asarray(ends))


@dataclass
class StDataset:
    """Rows of (location, time, features, label) plus simulator ground-state."""

    stations: list
    loc_ids: np.ndarray
    time_index: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    state: dict = field(default_factory=dict)
    sim_kind: str | None = None
    obs_noise: np.ndarray | None = None

    def __post_init__(self):
        known = {s.location_id for s in self.stations}
        present = set(np.asarray(self.loc_ids).tolist())
        missing = present - known
        if missing:
            raise DataError(f"rows reference unknown stations: {sorted(missing)[:3]}")

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def station(self, loc_id) -> Station:
        for s in self.stations:
            if s.location_id == loc_id:
                return s
        raise DataError(f"unknown station {loc_id!r}")

    def features_only(self) -> StFeatures:
        return StFeatures(list(self.stations), self.loc_ids.copy(),
                          self.time_index.copy(), self.X.copy())

    def subset(self, idx) -> "StDataset":
        idx = np.asarray(idx)
        keep = set(np.asarray(self.loc_ids)[idx].tolist())
        return StDataset(
            stations=[s for s in self.stations if s.location_id in keep],
            loc_ids=self.loc_ids[idx], time_index=self.time_index[idx],
            X=self.X[idx], Y=self.Y[idx],
            state={k: v[idx] for k, v in self.state.items()},
            sim_kind=self.sim_kind,
            obs_noise=None if self.obs_noise is None else self.obs_noise[idx])

    def driver_names(self) -> tuple:
        if self.sim_kind == "pm1":
            return PM1_DRIVERS
        if self.sim_kind == "pm2":
            return PM2_DRIVERS
        raise DataError("dataset has no simulator ground-state drivers")

    def sim_side(self) -> np.ndarray:
        """(n, 4) simulator-side vectors: label first, then the driver columns."""
        cols = [np.asarray(self.Y, dtype=np.float64)]
        for name in self.driver_names():
            if name not in self.state:
                raise DataError(f"driver column state_{name} missing from dataset")
            cols.append(np.asarray(self.state[name], dtype=np.float64))
        return np.column_stack(cols)

    def energy_inputs(self) -> EnergyBalanceInputs:
        if self.sim_kind != "pm2":
            raise DataError("energy-balance inputs only exist for pm2 worlds")
        missing = [c for c in PM2_ENERGY if c not in self.state]
        if missing:
            raise DataError(f"energy columns missing from dataset: {missing}")
        return EnergyBalanceInputs(*[np.asarray(self.state[c], dtype=np.float64)
                                     for c in PM2_ENERGY])

    def per_location_indices(self) -> dict:
        out = {}
        for i, s in enumerate(np.asarray(self.loc_ids)):
            out.setdefault(s, []).append(i)
        return {k: np.asarray(v) for k, v in out.items()}

    def windows(self, width: int):
        """Sliding time windows per station for sequence models.

        Returns (X3 of shape (m, width, d), y, loc_ids, time_index, end_rows)
        where the label, indices, and source-row pointer come from the
        window's last row.
        """
        x3, locs, times, ends = window_features(self.X, self.loc_ids, self.time_index, width)
        return x3, self.Y[ends], locs, times, ends


# ---------------------------------------------------------------------------
# World configuration and generation
# ---------------------------------------------------------------------------

@dataclass
class WorldConfig:
    sim_kind: str = "pm1"
    n_stations: int = 120
    n_timesteps: int = 365
    shift: float = 1.0
    noise_frac: float = 0.01
    lat_range: tuple = (26.0, 49.0)
    lon_range: tuple = (-124.0, -67.0)
    regime_lon_threshold: float = -100.0
    regime_width_deg: float = 12.0
    # latent temperature field
    base_temp: float = 291.0
    lat_gradient: float = 0.55
    seasonal_amp: float = 11.0
    seasonal_phase_day: float = 105.0
    elev_scale_m: float = 1100.0
    lapse_rate: float = 0.0065
    spatial_corr_len_deg: float = 9.0
    spatial_sd: float = 2.2
    weather_rho: float = 0.8
    weather_sd: float = 1.6
    # driver fields and shift knobs; veg offset is in vegetation-index units
    veg_regime_offset: float = 1.0
    atm_regime_offset: float = 3.0
    dew_regime_offset: float = -6.0
    emissivity_regime_offset: float = -0.008
    driver_sd: float = 1.8
    energy_imbalance_sd: float = 2.0

    def validate(self):
        if self.sim_kind not in ("pm1", "pm2"):
            raise DataError(f"unknown sim_kind {self.sim_kind!r}")
        if self.n_stations < 4:
            raise DataError("need at least 4 stations")
        if self.n_timesteps < 1:
            raise DataError("need at least 1 timestep")
        if self.shift < 0.0:
            raise DataError("shift strength must be nonnegative")
        if not (0.0 <= self.noise_frac < 0.5):
            raise DataError("noise_frac must lie in [0, 0.5)")
        if self.lat_range[0] >= self.lat_range[1] or self.lon_range[0] >= self.lon_range[1]:
            raise DataError("degenerate lat/lon ranges")

    def model(self):
        return default_model(self.sim_kind)

    def expected_tau_offset(self) -> float:
        """Mean optical-depth offset implied by the vegetation regime shift (pm1)."""
        m = Pm1Model()
        return float(np.mean(m.tau_coeff) * self.veg_regime_offset * self.shift)

    def to_json(self) -> str:
        d = asdict(self)
        d["schema_version"] = 1
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WorldConfig":
        d = json.loads(text)
        d.pop("schema_version", None)
        for key in ("lat_range", "lon_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _spatial_field(lat, lon, corr_len, rng) -> np.ndarray:
    """Unit-variance draw from an exponential-kernel GP over the stations."""
    d = np.sqrt((lat[:, None] - lat[None, :]) ** 2 + (lon[:, None] - lon[None, :]) ** 2)
    cov = np.exp(-d / corr_len) + 1e-9 * np.eye(len(lat))
    return np.linalg.cholesky(cov) @ rng.standard_normal(len(lat))


def _ar1(rng, n_steps, rho, sd) -> np.ndarray:
    innov = rng.standard_normal(n_steps)
    out = np.empty(n_steps)
    out[0] = innov[0] * sd / np.sqrt(1.0 - rho * rho)
    for t in range(1, n_steps):
        out[t] = rho * out[t - 1] + sd * innov[t]
    return out


def generate_world(cfg: WorldConfig, seed: int) -> StDataset:
    """Generate a synthetic ST dataset; deterministic in (cfg, seed)."""
    cfg.validate()
    n, T = cfg.n_stations, cfg.n_timesteps
    model = cfg.model()

    rng_st = np.random.default_rng([seed, 1])
    lat = rng_st.uniform(cfg.lat_range[0], cfg.lat_range[1], n)
    lon = rng_st.uniform(cfg.lon_range[0], cfg.lon_range[1], n)

    rng_field = np.random.default_rng([seed, 2])
    gp = lambda: _spatial_field(lat, lon, cfg.spatial_corr_len_deg, rng_field)
    gp_base, gp_veg, gp_atm, gp_air, gp_dew, gp_alb = (gp() for _ in range(6))

    # per-station streams keep generation independent of iteration order
    weather = np.stack([_ar1(np.random.default_rng([seed, 7, i]),
                             T, cfg.weather_rho, cfg.weather_sd) for i in range(n)])
    air_jitter = np.stack([_ar1(np.random.default_rng([seed, 8, i]), T, 0.6, 0.5)
                           for i in range(n)])
    noise_raw = np.stack([np.random.default_rng([seed, 9, i]).standard_normal((T, 4))
                          for i in range(n)])
    imbalance = np.stack([cfg.energy_imbalance_sd
                          * np.random.default_rng([seed, 10, i]).standard_normal(T)
                          for i in range(n)])

    t = np.arange(T)
    season = np.sin(2.0 * np.pi * (t[None, :] - cfg.seasonal_phase_day) / 365.0)
    amp = cfg.seasonal_amp * (0.7 + 0.3 * (lat - cfg.lat_range[0])
                              / (cfg.lat_range[1] - cfg.lat_range[0]))
    elev = cfg.elev_scale_m * (0.5 + 0.5 * np.sin(0.11 * lon + 0.9) * np.cos(0.13 * lat + 0.4))

    y = (cfg.base_temp
         - cfg.lat_gradient * (lat[:, None] - 35.0)
         + amp[:, None] * season
         - cfg.lapse_rate * elev[:, None]
         + cfg.spatial_sd * gp_base[:, None]
         + weather)

    regime = _sigmoid((lon - cfg.regime_lon_threshold) / cfg.regime_width_deg)

    if cfg.sim_kind == "pm1":
        greening = np.sin(2.0 * np.pi * (t[None, :] - 150.0) / 365.0)
        t_bveg = (0.9 * y + 25.0 + 2.0 * greening
                  + cfg.driver_sd * gp_veg[:, None])
        t_bad = (228.0 + 0.10 * (y - 280.0)
                 + 5.0 * np.sin(2.0 * np.pi * (t[None, :] - 140.0) / 365.0)
                 + 1.4 * cfg.driver_sd * gp_atm[:, None]
                 + cfg.shift * cfg.atm_regime_offset * regime[:, None])
        # vegetation loading expressed on the canopy temperature scale
        w_field = (1.6 + 0.010 * (y - 280.0) + 0.25 * greening
                   + 0.4 * gp_air[:, None] + 0.08 * air_jitter
                   + cfg.shift * cfg.veg_regime_offset * regime[:, None])
        t_canopy = model.canopy_ref + model.canopy_scale * np.clip(
            w_field, model.w_clip[0] + 0.05, model.w_clip[1] - 0.05)
        drivers = {"t_bveg": t_bveg, "t_bad": t_bad, "t_canopy": t_canopy}
        extra = {}
    else:
        t_atm = (0.80 * y + 52.0 + cfg.driver_sd * gp_atm[:, None]
                 + cfg.shift * cfg.atm_regime_offset * regime[:, None])
        dryness = (16.0 + 1.5 * gp_dew[:, None]
                   + 4.0 * np.sin(2.0 * np.pi * (t[None, :] - 200.0) / 365.0)
                   - cfg.shift * cfg.dew_regime_offset * regime[:, None])
        t_dew = np.minimum(y - dryness, y - 1.0)
        t_air = y + 2.0 + 0.8 * gp_air[:, None] + air_jitter
        drivers = {"t_atm": t_atm, "t_dew": t_dew, "t_air": t_air}

        solar = 0.5 + 0.5 * np.sin(2.0 * np.pi * (t[None, :] - cfg.seasonal_phase_day) / 365.0)
        rs_down = (200.0 + 150.0 * solar) * (1.0 - 0.012 * (lat[:, None] - cfg.lat_range[0]))
        albedo = np.clip(0.21 + 0.04 * gp_alb[:, None], 0.05, 0.5)
        rs_up = albedo * rs_down
        rl_down = 0.85 * STEFAN_BOLTZMANN * t_atm ** 4
        eps_sfc = np.broadcast_to(
            np.clip(0.97 + 0.004 * gp_alb[:, None]
                    + cfg.shift * cfg.emissivity_regime_offset * regime[:, None],
                    0.85, 1.0), (n, T)).copy()
        h_s = 0.16 * (rs_down - rs_up)
        h_l = 0.18 * (rs_down - rs_up)
        h_g = (rs_down - rs_up + eps_sfc * rl_down
               - eps_sfc * STEFAN_BOLTZMANN * y ** 4) - h_s - h_l - imbalance
        extra = {"rs_down": rs_down, "rs_up": rs_up, "rl_down": rl_down,
                 "h_s": h_s, "h_l": h_l, "h_g": h_g, "emissivity": eps_sfc}

    ids = [f"s{i:03d}" for i in range(n)]
    flat = lambda a: a.reshape(-1)
    loc_ids = np.repeat(np.asarray(ids, dtype=object), T)
    time_index = np.tile(t, n)
    y_flat = flat(y)
    state = {k: flat(v) for k, v in {**drivers, **extra}.items()}

    sim_side = np.column_stack([y_flat] + [state[k] for k in
                                           (PM1_DRIVERS if cfg.sim_kind == "pm1" else PM2_DRIVERS)])
    x_clean = model.observe(sim_side)
    band_range = x_clean.max(axis=0) - x_clean.min(axis=0)
    noise = noise_raw.reshape(-1, 4) * (cfg.noise_frac * band_range)
    X = x_clean + noise

    mean_y = y.mean(axis=1)
    order = np.argsort(np.argsort(mean_y, kind="stable"), kind="stable")
    zone = np.where(order < n / 3.0, "cold", np.where(order < 2.0 * n / 3.0, "warm", "hot"))
    groups = np.random.default_rng([seed, 99]).permutation(n) % 4

    stations = []
    for i, sid in enumerate(ids):
        st = Station(sid, float(lat[i]), float(lon[i]),
                     tags={"geo_region": "west" if lon[i] < cfg.regime_lon_threshold else "east",
                           "temp_zone": str(zone[i]),
                           "random_group": f"g{groups[i]}"})
        st.validate()
        stations.append(st)

    return StDataset(stations=stations, loc_ids=loc_ids, time_index=time_index,
                     X=X, Y=y_flat, state=state, sim_kind=cfg.sim_kind,
                     obs_noise=noise)


# ---------------------------------------------------------------------------
# Train/test partitioners
# ---------------------------------------------------------------------------

@dataclass
class SplitSpec:
    kind: str = "geo-region"
    threshold_lon: float = -100.0
    train_side: str = "west"
    train_zone: str = "hot"
    test_zone: str = "cold"
    n_groups: int = 4
    group_seed: int = 0
    test_group: int = 1
    cut_time: int | None = None
    train_frac: float = 2.0 / 3.0
    name: str = ""

    KINDS = ("geo-region", "temperature-zone", "random-groups", "temporal")

    def validate(self):
        if self.kind not in self.KINDS:
            raise DataError(f"unknown split kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "geo-region" and self.train_side not in ("west", "east"):
            raise DataError(f"train_side must be west or east, got {self.train_side!r}")
        if self.kind == "temperature-zone":
            zones = ("hot", "warm", "cold")
            if self.train_zone not in zones or self.test_zone not in zones:
                raise DataError(f"zones must be in {zones}")
            if self.train_zone == self.test_zone:
                raise DataError("train and test zones must differ")
        if self.kind == "random-groups" and not (0 <= self.test_group < self.n_groups):
            raise DataError(f"test_group {self.test_group} outside 0..{self.n_groups - 1}")

    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "geo-region":
            other = "east" if self.train_side == "west" else "west"
            return f"geo-{self.train_side}-{other}"
        if self.kind == "temperature-zone":
            return f"zone-{self.train_zone}-{self.test_zone}"
        if self.kind == "random-groups":
            return f"groups-test{self.test_group}"
        return "temporal"

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = 1
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SplitSpec":
        d = dict(d)
        d.pop("schema_version", None)
        return cls(**d)


def _station_means(data: StDataset) -> dict:
    return {loc: float(data.Y[idx].mean()) for loc, idx in data.per_location_indices().items()}


def split(data: StDataset, spec: SplitSpec) -> tuple[StDataset, StDataset]:
    """Partition into (train, test) per the spec; both sides must be non-empty."""
    spec.validate()
    locs = np.asarray(data.loc_ids)

    if spec.kind == "temporal":
        tmax = int(data.time_index.max()) + 1
        cut = spec.cut_time if spec.cut_time is not None else int(round(tmax * spec.train_frac))
        train_mask = data.time_index < cut
        test_mask = ~train_mask
    else:
        if spec.kind == "geo-region":
            west = {s.location_id for s in data.stations if s.lon < spec.threshold_lon}
            train_set = west if spec.train_side == "west" else \
                {s.location_id for s in data.stations} - west
            test_set = {s.location_id for s in data.stations} - train_set
        elif spec.kind == "temperature-zone":
            means = _station_means(data)
            ranked = sorted(means, key=lambda k: (means[k], k))
            third = len(ranked) / 3.0
            zone_of = {}
            for rank, loc in enumerate(ranked):
                zone_of[loc] = "cold" if rank < third else ("warm" if rank < 2 * third else "hot")
            for s in data.stations:
                s.tags["temp_zone"] = zone_of[s.location_id]
            train_set = {k for k, z in zone_of.items() if z == spec.train_zone}
            test_set = {k for k, z in zone_of.items() if z == spec.test_zone}
        else:  # random-groups
            ordered = sorted({s.location_id for s in data.stations})
            perm = np.random.default_rng([spec.group_seed, 17]).permutation(len(ordered))
            group_of = {loc: int(perm[i] % spec.n_groups) for i, loc in enumerate(ordered)}
            for s in data.stations:
                s.tags["random_group"] = f"g{group_of[s.location_id]}"
            test_set = {k for k, g in group_of.items() if g == spec.test_group}
            train_set = {k for k in ordered} - test_set
        train_mask = np.isin(locs, sorted(train_set))
        test_mask = np.isin(locs, sorted(test_set))

    if not train_mask.any() or not test_mask.any():
        raise DataError(f"split {spec.label()}: one side is empty")
    return data.subset(np.where(train_mask)[0]), data.subset(np.where(test_mask)[0])


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def save_csv(data: StDataset, path):
    """Write the documented schema: location_id,lat,lon,time_index,x_*,y,state_*."""
    station_of = {s.location_id: s for s in data.stations}
    state_keys = sorted(data.state.keys())
    header = (["location_id", "lat", "lon", "time_index"]
              + [f"x_{j}" for j in range(data.d)] + ["y"]
              + [f"state_{k}" for k in state_keys])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n):
            st = station_of[data.loc_ids[i]]
            row = [st.location_id, _fmt(st.lat), _fmt(st.lon), str(int(data.time_index[i]))]
            row += [_fmt(v) for v in data.X[i]]
            row.append(_fmt(data.Y[i]))
            row += [_fmt(data.state[k][i]) for k in state_keys]
            w.writerow(row)


def load_csv(path) -> StDataset:
    """Read the schema back; errors carry 1-based data row numbers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = list(reader)

    required = ["location_id", "lat", "lon", "time_index", "y"]
    for col in required:
        if col not in header:
            raise DataError(f"{path}: missing column '{col}'")
    x_cols = sorted((c for c in header if c.startswith("x_")),
                    key=lambda c: int(c.split("_", 1)[1]))
    if not x_cols:
        raise DataError(f"{path}: missing feature columns x_0..")
    if [c for c in x_cols] != [f"x_{j}" for j in range(len(x_cols))]:
        raise DataError(f"{path}: feature columns must be contiguous x_0..x_{{d-1}}")
    state_cols = [c for c in header if c.startswith("state_")]
    pos = {c: header.index(c) for c in header}

    def parse(row_no, row, col):
        raw = row[pos[col]]
        try:
            return float(raw)
        except ValueError:
            raise DataError(f"{path}: row {row_no}: cannot parse {raw!r} in column {col}") from None

    n = len(rows)
    loc_ids = np.empty(n, dtype=object)
    time_index = np.empty(n, dtype=np.int64)
    X = np.empty((n, len(x_cols)))
    Y = np.empty(n)
    state = {c[len("state_"):]: np.empty(n) for c in state_cols}
    station_coords: dict = {}
    seen_pairs: dict = {}

    for i, row in enumerate(rows):
        row_no = i + 1
        if len(row) != len(header):
            raise DataError(f"{path}: row {row_no}: expected {len(header)} cells, got {len(row)}")
        sid = row[pos["location_id"]]
        lat = parse(row_no, row, "lat")
        lon = parse(row_no, row, "lon")
        ti_f = parse(row_no, row, "time_index")
        ti = int(ti_f)
        key = (sid, ti)
        if key in seen_pairs:
            raise DataError(f"{path}: row {row_no}: duplicate (location_id, time_index) pair {key}")
        seen_pairs[key] = row_no
        if sid in station_coords and station_coords[sid] != (lat, lon):
            raise DataError(f"{path}: row {row_no}: station {sid} has inconsistent coordinates")
        station_coords[sid] = (lat, lon)
        loc_ids[i] = sid
        time_index[i] = ti
        for j, c in enumerate(x_cols):
            X[i, j] = parse(row_no, row, c)
        Y[i] = parse(row_no, row, "y")
        for c in state_cols:
            state[c[len("state_"):]] = state[c[len("state_"):]]
            state[c[len("state_"):]][i] = parse(row_no, row, c)

    stations = [Station(sid, lat, lon) for sid, (lat, lon) in sorted(station_coords.items())]
    kind = None
    if set(PM1_DRIVERS) <= set(state):
        kind = "pm1"
    elif set(PM2_DRIVERS) <= set(state):
        kind = "pm2"
    return StDataset(stations=stations, loc_ids=loc_ids, time_index=time_index,
                     X=X, Y=Y, state=state, sim_kind=kind)
