"""Scenario geometry and SINR at the base station for any RIS ON/OFF pattern.

All nodes lie in one plane. RIS_1 sits at the origin, the BS on the +x axis,
the desired user U_D at 150 degrees from the BS direction and the interfering
user U_I at ``theta`` degrees from U_D (towards the BS). Further RISs are
stacked below RIS_1 every ``ris_spacing`` meters.

Propagation is log-distance: ``(lambda / 4 pi)^2 * d^-n`` with a 1 m
reference. The desired user's reflections are phase-aligned at the BS, so each
RIS contributes ``N^2`` array gain and all desired paths add in amplitude. The
interferer is seen through the same steered beam pattern: ``N^2`` gain (see
``ScenarioParams.interferer_array_exp``) scaled by ``min(1, 30 / theta)``, and
every interference path adds in power.

Powers are linear milliwatts internally; dBm appears only on ``ScenarioParams``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
THETA_REF_DEG = 30.0


def dbm_to_mw(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw: float) -> float:
    with np.errstate(divide="ignore"):
        return float(10.0 * np.log10(p_mw))


@dataclass(frozen=True)
class ScenarioParams:
    """Geometry and link parameters for one evaluation scenario.

    Distances are from RIS_1; angles in degrees; powers in dBm.
    ``pl_exp_direct`` applies to the user-BS links, ``pl_exp_ris`` to both
    hops through an RIS. ``interferer_array_exp`` is the array-gain exponent
    of the interferer's reflection (2: the interferer falls inside the beam
    pattern steered at U_D, weighted by ``min(1, 30/theta)``; 1: fully
    incoherent). With 1, the reflected interference is always at least
    ~14 dB below the reflected desired signal and switching an RIS OFF never
    pays off for these geometries.
    """

    d_ris_ud: float = 60.0
    d_ris_ui: float = 10.0
    d_ris_bs: float = 80.0
    angle_bs_ud: float = 150.0
    theta: float = 90.0
    K: int = 1
    ris_spacing: float = 5.0
    N: int = 256
    amp_coeff: float = 1.0
    p_d: float = 23.0
    p_i: float = 10.0
    noise: float = -94.0
    carrier: float = 2.4e9
    pl_exp_direct: float = 3.5
    pl_exp_ris: float = 2.0
    interferer_array_exp: float = 2.0

    def __post_init__(self):
        for name in ("d_ris_ud", "d_ris_ui", "d_ris_bs", "ris_spacing", "carrier"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.theta <= self.angle_bs_ud:
            raise ValueError(f"theta must lie in [0, {self.angle_bs_ud}] degrees, got {self.theta}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not 0.0 < self.amp_coeff <= 1.0:
            raise ValueError("amp_coeff must lie in (0, 1]")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier

    def replace(self, **changes) -> "ScenarioParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Layout:
    bs: np.ndarray
    ud: np.ndarray
    ui: np.ndarray
    ris: np.ndarray  # (K, 2)
    d_ud_bs: float
    d_ui_bs: float
    d_ris_ud: np.ndarray  # (K,)
    d_ris_ui: np.ndarray
    d_ris_bs: np.ndarray

    @property
    def K(self) -> int:
        return len(self.ris)


def _polar(r: float, deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([r * math.cos(a), r * math.sin(a)])


def layout(params: ScenarioParams) -> Layout:
    bs = np.array([params.d_ris_bs, 0.0])
    ud = _polar(params.d_ris_ud, params.angle_bs_ud)
    ui = _polar(params.d_ris_ui, params.angle_bs_ud - params.theta)
    ris = np.zeros((params.K, 2))
    ris[:, 1] = -params.ris_spacing * np.arange(params.K)

    def dist(points, p):
        return np.hypot(points[:, 0] - p[0], points[:, 1] - p[1])

    return Layout(
        bs=bs,
        ud=ud,
        ui=ui,
        ris=ris,
        d_ud_bs=float(np.hypot(*(ud - bs))),
        d_ui_bs=float(np.hypot(*(ui - bs))),
        d_ris_ud=dist(ris, ud),
        d_ris_ui=dist(ris, ui),
        d_ris_bs=dist(ris, bs),
    )


def path_gain(d, exponent: float, wavelength: float, d0: float = 1.0):
    """Linear power gain ``(lambda / (4 pi d0))^2 * (d0 / d)^exponent``.

    With ``exponent == 2`` this is the Friis free-space factor.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    g = (wavelength / (4.0 * math.pi * d0)) ** 2 * (d0 / d) ** exponent
    return float(g) if g.ndim == 0 else g


def angle_factor(theta_deg: float) -> float:
    """Interference reflection weight ``min(1, 30 / theta)``."""
    if not theta_deg > 0:
        raise ValueError("theta must be positive for the interferer reflection model")
    return min(1.0, THETA_REF_DEG / theta_deg)


def ris_reflected_gain_desired(d1, d2, N: int, amp_coeff: float, exponent: float, wavelength: float):
    return amp_coeff**2 * N**2 * path_gain(d1, exponent, wavelength) * path_gain(d2, exponent, wavelength)


def ris_reflected_gain_interferer(
    d1, d2, N: int, amp_coeff: float, theta_deg: float, exponent: float, wavelength: float,
    array_exp: float = 2.0,
):
    return (
        amp_coeff**2
        * N**array_exp
        * path_gain(d1, exponent, wavelength)
        * path_gain(d2, exponent, wavelength)
        * angle_factor(theta_deg)
    )


@dataclass(frozen=True)
class LinkBudget:
    """Per-path contributions at the BS, ready for fast SINR evaluation.

    ``desired_amp`` holds sqrt(mW) amplitudes (coherent), the interference
    entries are mW powers (incoherent). Index 0 is always the direct link.
    """

    direct_amp: float
    ris_amp: np.ndarray
    direct_interference: float
    ris_interference: np.ndarray
    noise: float

    def sinr_linear(self, states) -> float:
        s = np.asarray(states, dtype=bool)
        amp = self.direct_amp + self.ris_amp[s].sum()
        return amp * amp / (self.direct_interference + self.ris_interference[s].sum() + self.noise)

    def sinr_db(self, states) -> float:
        with np.errstate(divide="ignore"):
            return float(10.0 * np.log10(self.sinr_linear(states)))


def link_budget(
    params: ScenarioParams,
    lay: Layout,
    desired_active: bool = True,
    interferer_active: bool = True,
) -> LinkBudget:
    lam = params.wavelength
    p_d = dbm_to_mw(params.p_d) if desired_active else 0.0
    p_i = dbm_to_mw(params.p_i) if interferer_active else 0.0

    direct_amp = math.sqrt(p_d * path_gain(lay.d_ud_bs, params.pl_exp_direct, lam))
    ris_amp = np.sqrt(
        p_d
        * ris_reflected_gain_desired(lay.d_ris_ud, lay.d_ris_bs, params.N, params.amp_coeff, params.pl_exp_ris, lam)
    )
    direct_int = p_i * path_gain(lay.d_ui_bs, params.pl_exp_direct, lam)
    if p_i > 0.0:
        ris_int = p_i * ris_reflected_gain_interferer(
            lay.d_ris_ui, lay.d_ris_bs, params.N, params.amp_coeff, params.theta, params.pl_exp_ris, lam,
            params.interferer_array_exp,
        )
    else:
        ris_int = np.zeros(lay.K)
    return LinkBudget(
        direct_amp=direct_amp,
        ris_amp=np.atleast_1d(ris_amp),
        direct_interference=direct_int,
        ris_interference=np.atleast_1d(ris_int),
        noise=dbm_to_mw(params.noise),
    )


@dataclass(frozen=True)
class SinrBreakdown:
    desired_power: float
    interference_power: float
    noise_power: float
    sinr_db: float


def sinr(
    params: ScenarioParams,
    lay: Optional[Layout],
    ris_states: Sequence[bool],
    desired_active: bool = True,
    interferer_active: bool = True,
) -> SinrBreakdown:
    """SINR at the BS with the given RISs switched ON.

    Set ``interferer_active=False`` (or ``desired_active=False``) to evaluate
    a hypothesised occupancy in which that user is silent.
    """
    if lay is None:
        lay = layout(params)
    states = np.asarray(ris_states, dtype=bool)
    if states.shape != (lay.K,):
        raise ValueError(f"expected {lay.K} RIS states, got {states.shape}")
    b = link_budget(params, lay, desired_active, interferer_active)
    amp = b.direct_amp + b.ris_amp[states].sum()
    desired = amp * amp
    interference = b.direct_interference + b.ris_interference[states].sum()
    with np.errstate(divide="ignore"):
        sinr_db = float(10.0 * np.log10(desired / (interference + b.noise)))
    return SinrBreakdown(desired, interference, b.noise, sinr_db)
