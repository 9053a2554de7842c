"""Simplified mechanistic forward models: physical state -> satellite observation.

Two families are provided.  The passive-microwave model sums soil,
vegetation, and atmospheric brightness-temperature contributions per
(polarisation, incidence-angle) band.  The thermal-radiance model combines
surface Planck emission with atmospheric up/downwelling per wavelength
band.  A surface energy-balance helper closes the loop for the thermal
physics constraint.

All band formulas are written with plain arithmetic operators so they
accept either numpy arrays or autodiff Tensors and stay differentiable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import Tensor

STEFAN_BOLTZMANN = 5.670374419e-8  # W m^-2 K^-4 (CODATA)
PLANCK_C1 = 1.191042972e8          # W um^4 m^-2 sr^-1
PLANCK_C2 = 1.4387752e4            # um K

PM1_DEFAULT_BANDS = (("H", 40.0), ("V", 40.0), ("H", 55.0), ("V", 55.0))
PM2_DEFAULT_WAVELENGTHS = (3.9, 8.6, 10.9, 12.0)


def _exp(x):
    return x.exp() if isinstance(x, Tensor) else np.exp(x)


def _values(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


class SimulatorError(ValueError):
    """Raised when a state violates its physical invariants."""


# ---------------------------------------------------------------------------
# Passive microwave brightness temperature
# ---------------------------------------------------------------------------

@dataclass
class Pm1State:
    """Per-sample microwave state; r and tau are (n, bands) arrays.

    Temperatures are Kelvin.  Reflectivity r must lie in [0, 1] and the
    vegetation optical depth tau must be nonnegative.
    """

    t_eff: np.ndarray
    t_bveg: np.ndarray
    t_bad: np.ndarray
    r: np.ndarray
    tau: np.ndarray

    def validate(self):
        r = _values(self.r)
        tau = _values(self.tau)
        if np.any(r < 0.0) or np.any(r > 1.0):
            raise SimulatorError("pm1: reflectivity r must lie in [0, 1]")
        if np.any(tau < 0.0):
            raise SimulatorError("pm1: optical depth tau must be nonnegative")
        for label, t in (("t_eff", self.t_eff), ("t_bveg", self.t_bveg), ("t_bad", self.t_bad)):
            if not np.all(np.isfinite(_values(t))):
                raise SimulatorError(f"pm1: {label} contains non-finite values")


def _per_sample(x):
    """Numpy (n,) columns become (n, 1) so they broadcast over bands; Tensors pass through."""
    if isinstance(x, Tensor):
        return x
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def pm1_simulate(state: Pm1State, validate: bool = True):
    """Top-of-vegetation brightness temperature per band, shape (n, bands).

    T = (1-r) T_eff e^-tau + T_Bveg (1 + r e^-tau) + T_Bad r e^-2tau
    """
    if validate:
        state.validate()
    t_eff = _per_sample(state.t_eff)
    t_bveg = _per_sample(state.t_bveg)
    t_bad = _per_sample(state.t_bad)
    att = _exp(-1.0 * state.tau)
    return ((1.0 - state.r) * t_eff * att
            + t_bveg * (1.0 + state.r * att)
            + t_bad * state.r * att * att)


# ---------------------------------------------------------------------------
# Thermal band radiance
# ---------------------------------------------------------------------------

def planck_radiance(t, wavelength_um):
    """Spectral Planck radiance at a band-center wavelength (W m^-2 sr^-1 um^-1)."""
    tv = _values(t)
    lam = np.asarray(wavelength_um, dtype=np.float64)
    if np.any(tv <= 0.0):
        raise SimulatorError("planck_radiance: temperature must be positive")
    if np.any(lam <= 0.0):
        raise SimulatorError("planck_radiance: wavelength must be positive")
    if isinstance(t, Tensor):
        return PLANCK_C1 / (lam ** 5) / (_exp(PLANCK_C2 / lam / t) - 1.0)
    return PLANCK_C1 / (lam ** 5 * (np.exp(PLANCK_C2 / (lam * tv)) - 1.0))


@dataclass
class Pm2State:
    """Per-sample thermal-band state; per-band arrays are (n, bands)."""

    t_s: np.ndarray
    emissivity: np.ndarray
    transmittance: np.ndarray
    r_down: np.ndarray
    r_up: np.ndarray
    wavelengths: np.ndarray

    def validate(self):
        eps = _values(self.emissivity)
        tau = _values(self.transmittance)
        if np.any(eps <= 0.0) or np.any(eps > 1.0):
            raise SimulatorError("pm2: emissivity must lie in (0, 1]")
        if np.any(tau < 0.0) or np.any(tau > 1.0):
            raise SimulatorError("pm2: transmittance must lie in [0, 1]")
        if np.any(_values(self.r_down) < 0.0) or np.any(_values(self.r_up) < 0.0):
            raise SimulatorError("pm2: atmospheric radiances must be nonnegative")
        if np.any(_values(self.t_s) <= 0.0):
            raise SimulatorError("pm2: surface temperature must be positive")


def pm2_simulate(state: Pm2State, validate: bool = True):
    """Top-of-atmosphere radiance per band: (eps B(T_s) + (1-eps) Rdown) tau + Rup."""
    if validate:
        state.validate()
    b = planck_radiance(_per_sample(state.t_s), state.wavelengths)
    return (state.emissivity * b + (1.0 - state.emissivity) * state.r_down) * state.transmittance + state.r_up


# ---------------------------------------------------------------------------
# Surface energy balance
# ---------------------------------------------------------------------------

@dataclass
class EnergyBalanceInputs:
    """Per-sample surface fluxes (W m^-2) and broadband emissivity."""

    rs_down: np.ndarray
    rs_up: np.ndarray
    rl_down: np.ndarray
    h_s: np.ndarray
    h_l: np.ndarray
    h_g: np.ndarray
    emissivity: np.ndarray

    def forcing(self) -> np.ndarray:
        """Net non-emissive forcing: RSd - RSu + eps RLd - (Hs + Hl + Hg)."""
        return (np.asarray(self.rs_down, dtype=np.float64)
                - np.asarray(self.rs_up, dtype=np.float64)
                + np.asarray(self.emissivity, dtype=np.float64) * np.asarray(self.rl_down, dtype=np.float64)
                - (np.asarray(self.h_s, dtype=np.float64)
                   + np.asarray(self.h_l, dtype=np.float64)
                   + np.asarray(self.h_g, dtype=np.float64)))

    def subset(self, idx) -> "EnergyBalanceInputs":
        pick = lambda a: np.asarray(a, dtype=np.float64)[idx]
        return EnergyBalanceInputs(pick(self.rs_down), pick(self.rs_up), pick(self.rl_down),
                                   pick(self.h_s), pick(self.h_l), pick(self.h_g),
                                   pick(self.emissivity))


def energy_balance_residual(t, e: EnergyBalanceInputs):
    """-eps sigma T^4 + RSd - RSu + eps RLd - (Hs + Hl + Hg); Tensor-aware."""
    forcing = e.forcing()
    eps = np.asarray(e.emissivity, dtype=np.float64)
    return -1.0 * eps * STEFAN_BOLTZMANN * (t ** 4) + forcing


def equilibrium_temperature(e: EnergyBalanceInputs) -> np.ndarray:
    """Exact root of the energy-balance residual, ((forcing)/(eps sigma))^(1/4)."""
    eps = np.asarray(e.emissivity, dtype=np.float64)
    if np.any(eps <= 0.0):
        raise SimulatorError("equilibrium_temperature: emissivity must be positive")
    forcing = e.forcing()
    if np.any(forcing <= 0.0):
        raise SimulatorError("equilibrium_temperature: non-positive net forcing (unphysical world)")
    return (forcing / (eps * STEFAN_BOLTZMANN)) ** 0.25


# ---------------------------------------------------------------------------
# Parameterized models mapping the 4-vector simulator input to observations
# ---------------------------------------------------------------------------
#
# Both worlds expose a k=4 "simulator-side" vector whose first coordinate is
# the prediction target, with the remaining coordinates auxiliary
# temperature-scale drivers.  The model classes turn that vector into a full
# band state deterministically, so observation = model.observe(sim_side).

@dataclass
class Pm1Model:
    """Microwave parameterization: [T_eff, T_Bveg, T_Bad, T_canopy] -> 4 bands.

    T_canopy is the canopy thermodynamic state; its departure from
    ``canopy_ref`` sets the vegetation loading w, which drives both the
    per-band optical depth (tau = tau_coeff * w) and, through soil
    moisture, the reflectivity (r = refl_geom * (m0 + m1 * w)).  Keeping
    every input on the Kelvin scale keeps the inverse problem balanced.
    """

    # band diversity is deliberate: a transparent reflective band that sees
    # soil and sky, two mixed bands, and a nearly opaque canopy band
    bands: tuple = PM1_DEFAULT_BANDS
    tau_coeff: tuple = (0.12, 0.40, 0.75, 1.10)
    refl_geom: tuple = (1.60, 0.35, 1.20, 0.30)
    moisture_icept: float = 0.18
    moisture_slope: float = 0.09
    canopy_ref: float = 255.0
    canopy_scale: float = 12.0
    w_clip: tuple = (0.15, 4.0)

    kind: str = "pm1"

    def driver_names(self):
        return ("t_eff", "t_bveg", "t_bad", "t_canopy")

    def vegetation_index(self, sim_side: np.ndarray) -> np.ndarray:
        w = (sim_side[:, 3] - self.canopy_ref) / self.canopy_scale
        return np.clip(w, self.w_clip[0], self.w_clip[1])

    def state_from_sim_side(self, sim_side: np.ndarray) -> Pm1State:
        sim_side = np.asarray(sim_side, dtype=np.float64)
        w = self.vegetation_index(sim_side)
        tau = w[:, None] * np.asarray(self.tau_coeff)
        m = np.clip(self.moisture_icept + self.moisture_slope * w, 0.02, 0.6)
        r = np.clip(m[:, None] * np.asarray(self.refl_geom), 0.0, 0.95)
        return Pm1State(t_eff=sim_side[:, 0], t_bveg=sim_side[:, 1],
                        t_bad=sim_side[:, 2], r=r, tau=tau)

    def observe(self, sim_side: np.ndarray) -> np.ndarray:
        return pm1_simulate(self.state_from_sim_side(sim_side))

    def to_json(self) -> str:
        d = asdict(self)
        d["schema_version"] = 1
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Pm1Model":
        d = json.loads(text)
        d.pop("schema_version", None)
        for key in ("bands", "tau_coeff", "refl_geom", "w_clip"):
            if key in d:
                d[key] = tuple(tuple(b) if isinstance(b, list) else b for b in d[key]) \
                    if key == "bands" else tuple(d[key])
        return cls(**d)


@dataclass
class Pm2Model:
    """Thermal parameterization: [T_s, T_atm, T_dew, T_air] -> 4 band radiances.

    Water-vapor burden follows the dewpoint; per-band transmittance decays
    exponentially in the burden; up/downwelling radiances are emission of
    effective atmospheric layers.
    """

    # per-band weighting-function mixes let both atmospheric layers be
    # identified from the four radiances
    wavelengths: tuple = PM2_DEFAULT_WAVELENGTHS
    kappa: tuple = (0.06, 0.45, 0.16, 0.28)
    emissivity: tuple = (0.962, 0.975, 0.982, 0.978)
    vapor_ref: float = 273.15
    vapor_scale: float = 18.0
    up_mix: tuple = (0.15, 0.55, 0.35, 0.70)

    kind: str = "pm2"

    def driver_names(self):
        return ("t_s", "t_atm", "t_dew", "t_air")

    def vapor_burden(self, t_dew: np.ndarray) -> np.ndarray:
        return np.exp((np.asarray(t_dew, dtype=np.float64) - self.vapor_ref) / self.vapor_scale)

    def state_from_sim_side(self, sim_side: np.ndarray) -> Pm2State:
        sim_side = np.asarray(sim_side, dtype=np.float64)
        t_s, t_atm, t_dew, t_air = (sim_side[:, i] for i in range(4))
        q = self.vapor_burden(t_dew)
        lam = np.asarray(self.wavelengths)
        mix = np.asarray(self.up_mix)
        tau = np.exp(-np.asarray(self.kappa) * q[:, None])
        b_atm = planck_radiance(t_atm[:, None], lam)
        t_up = mix * t_atm[:, None] + (1.0 - mix) * t_air[:, None]
        b_up = planck_radiance(t_up, lam)
        return Pm2State(t_s=t_s,
                        emissivity=np.asarray(self.emissivity, dtype=np.float64),
                        transmittance=tau,
                        r_down=(1.0 - tau) * b_atm,
                        r_up=(1.0 - tau) * b_up,
                        wavelengths=lam)

    def observe(self, sim_side: np.ndarray) -> np.ndarray:
        return pm2_simulate(self.state_from_sim_side(sim_side))

    def to_json(self) -> str:
        d = asdict(self)
        d["schema_version"] = 1
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Pm2Model":
        d = json.loads(text)
        d.pop("schema_version", None)
        for key in ("wavelengths", "kappa", "emissivity", "up_mix"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def model_from_json(text: str):
    kind = json.loads(text).get("kind")
    if kind == "pm1":
        return Pm1Model.from_json(text)
    if kind == "pm2":
        return Pm2Model.from_json(text)
    raise SimulatorError(f"unknown simulator kind {kind!r}")


def default_model(kind: str):
    if kind == "pm1":
        return Pm1Model()
    if kind == "pm2":
        return Pm2Model()
    raise SimulatorError(f"unknown simulator kind {kind!r}")
