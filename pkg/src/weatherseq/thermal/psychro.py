"""Moist-air relations used by the moisture balance and the HVAC models.

Saturation vapour pressure uses the Magnus form (Alduchov & Eskridge
coefficients). Humidity ratios are kg water per kg dry air.
"""
from __future__ import annotations

import numpy as np

P_ATM = 101325.0  # Pa
LATENT_HEAT = 2.45e6  # J/kg, vaporization near 25 degC
CP_AIR = 1005.0  # J/(kg K)
RHO_AIR = 1.2  # kg/m3
EPSILON = 0.622

_T_RANGE = (-40.0, 60.0)


def _check_temperature(t) -> None:
    t = np.asarray(t, dtype=float)
    if np.any(t < _T_RANGE[0]) or np.any(t > _T_RANGE[1]):
        raise ValueError(f"temperature outside {_T_RANGE} degC")


def saturation_pressure(t):
    """Saturation vapour pressure over water, Pa."""
    _check_temperature(t)
    t = np.asarray(t, dtype=float)
    p = 610.94 * np.exp(17.625 * t / (t + 243.04))
    return p if p.ndim else float(p)


def humidity_ratio(t, rh, pressure=P_ATM):
    """Humidity ratio from dry-bulb temperature (degC) and relative humidity (%)."""
    pw = np.asarray(rh, dtype=float) / 100.0 * saturation_pressure(t)
    if np.any(pw >= pressure):
        raise ValueError("vapour pressure not below total pressure")
    w = EPSILON * pw / (pressure - pw)
    return w if np.ndim(w) else float(w)


def saturation_humidity_ratio(t, pressure=P_ATM):
    return humidity_ratio(t, 100.0, pressure)


def relative_humidity(t, w, pressure=P_ATM):
    """Relative humidity (%) of air at ``t`` degC with humidity ratio ``w``."""
    w = np.asarray(w, dtype=float)
    pw = pressure * w / (EPSILON + w)
    rh = 100.0 * pw / saturation_pressure(t)
    return rh if np.ndim(rh) else float(rh)


def wet_bulb_proxy(t, rh):
    """Stull's (2011) empirical wet-bulb estimate, degC.

    Valid for RH 5-99 % and -20..50 degC at sea level; used only as the
    indoor-condition input of the heat-pump performance map.
    """
    t = np.asarray(t, dtype=float)
    rh = np.clip(np.asarray(rh, dtype=float), 5.0, 99.0)
    tw = (t * np.arctan(0.151977 * np.sqrt(rh + 8.313659))
          + np.arctan(t + rh) - np.arctan(rh - 1.676331)
          + 0.00391838 * rh ** 1.5 * np.arctan(0.023101 * rh) - 4.686035)
    return tw if tw.ndim else float(tw)
