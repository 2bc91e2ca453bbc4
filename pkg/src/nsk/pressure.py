"""Barotropic pressure laws and the Taylor remainder P~ used by the nonlinear terms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = ["PressureLaw", "PolytropicLaw", "VanDerWaalsLaw", "ScaledLaw", "make_law"]


class PressureLaw:
    """P(rho) with derivatives, expanded around a reference density rho_*.

    P(a + rho_*) = P(rho_*) + gamma a + a P~(a), gamma = P'(rho_*).
    """

    rho_star: float

    def P(self, rho):
        raise NotImplementedError

    def dP(self, rho):
        raise NotImplementedError

    def d2P(self, rho):
        h = 1e-4 * self.rho_star
        return (self.dP(rho + h) - self.dP(rho - h)) / (2 * h)

    @property
    def gamma(self) -> float:
        return float(self.dP(self.rho_star))

    def P_tilde(self, a):
        a = np.asarray(a, dtype=float)
        rs = self.rho_star
        small = np.abs(a) < 1e-6 * rs
        safe = np.where(small, 1.0, a)
        direct = (self.P(a + rs) - self.P(rs) - self.gamma * a) / safe
        return np.where(small, 0.5 * self.d2P(rs) * a, direct)

    def scaled(self, factor: float) -> "ScaledLaw":
        return ScaledLaw(self, factor)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass
class PolytropicLaw(PressureLaw):
    """P = coeff * rho^exponent (monotone)."""

    coeff: float = 1.0
    exponent: float = 1.4
    rho_star: float = 1.0

    def P(self, rho):
        return self.coeff * np.asarray(rho, dtype=float) ** self.exponent

    def dP(self, rho):
        return self.coeff * self.exponent * np.asarray(rho, dtype=float) ** (self.exponent - 1)

    def d2P(self, rho):
        g = self.exponent
        return self.coeff * g * (g - 1) * np.asarray(rho, dtype=float) ** (g - 2)

    def describe(self) -> dict:
        return {"kind": "polytropic", "coeff": self.coeff, "exponent": self.exponent, "rho_star": self.rho_star}


class VanDerWaalsLaw(PressureLaw):
    """P = rho T / (1 - b rho) - a rho^2, non-monotone below the critical temperature.

    With ``rho_star=None`` the reference density is placed on a spinodal
    point (P'(rho_*) = 0), found numerically; ``branch`` selects the vapor
    ("low") or liquid ("high") side.  At a spinodal point gamma is reported
    as exactly zero.
    """

    def __init__(self, temperature: float = 0.9 * 8 / 3, attraction: float = 3.0, covolume: float = 1 / 3,
                 rho_star: float | None = None, branch: str = "low"):
        self.temperature = float(temperature)
        self.attraction = float(attraction)
        self.covolume = float(covolume)
        self.branch = branch
        self.spinodal = rho_star is None
        self.rho_star = self._spinodal(branch) if rho_star is None else float(rho_star)

    def P(self, rho):
        rho = np.asarray(rho, dtype=float)
        return rho * self.temperature / (1 - self.covolume * rho) - self.attraction * rho**2

    def dP(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.temperature / (1 - self.covolume * rho) ** 2 - 2 * self.attraction * rho

    def d2P(self, rho):
        rho = np.asarray(rho, dtype=float)
        return 2 * self.covolume * self.temperature / (1 - self.covolume * rho) ** 3 - 2 * self.attraction

    def _spinodal(self, branch: str) -> float:
        b = self.covolume
        # P'' vanishes at the point of minimal P'; the spinodals bracket it
        rho_c = brentq(lambda r: self.d2P(r), 1e-9, (1 - 1e-9) / b)
        if self.dP(rho_c) >= 0:
            raise ValueError("temperature at or above critical: P is monotone, no spinodal point")
        if branch == "low":
            return brentq(lambda r: self.dP(r), 1e-12, rho_c, xtol=1e-15, rtol=1e-15)
        return brentq(lambda r: self.dP(r), rho_c, (1 - 1e-12) / b, xtol=1e-15, rtol=1e-15)

    @property
    def gamma(self) -> float:
        if self.spinodal:
            return 0.0
        return float(self.dP(self.rho_star))

    @property
    def root_residual(self) -> float:
        return float(abs(self.dP(self.rho_star)))

    def describe(self) -> dict:
        return {
            "kind": "van_der_waals",
            "temperature": self.temperature,
            "attraction": self.attraction,
            "covolume": self.covolume,
            "rho_star": self.rho_star,
            "branch": self.branch,
        }


class ScaledLaw(PressureLaw):
    def __init__(self, base: PressureLaw, factor: float):
        self.base, self.factor = base, float(factor)
        self.rho_star = base.rho_star

    def P(self, rho):
        return self.factor * self.base.P(rho)

    def dP(self, rho):
        return self.factor * self.base.dP(rho)

    def d2P(self, rho):
        return self.factor * self.base.d2P(rho)

    @property
    def gamma(self) -> float:
        return self.factor * self.base.gamma

    def describe(self) -> dict:
        return {"kind": "scaled", "factor": self.factor, "base": self.base.describe()}


def make_law(spec: dict) -> PressureLaw:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "polytropic":
        return PolytropicLaw(**spec)
    if kind == "van_der_waals":
        return VanDerWaalsLaw(**spec)
    raise ValueError(f"unknown pressure law {kind!r}")
