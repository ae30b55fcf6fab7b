from __future__ import annotations

import numpy as np

from ..errors import InvalidParameter
from .base import ParameterizedModel, Units

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class TwoLevel(ParameterizedModel):
    """Spin-1/2 in a field of fixed magnitude: H = (delta/2) n(theta, phi) . sigma."""

    name = "two_level"

    def __init__(self, delta: float, theta: float = 0.0, phi: float = 0.0, units: Units | None = None):
        if not delta > 0:
            raise InvalidParameter("delta must be positive")
        self.delta = float(delta)
        super().__init__(2, ("theta", "phi"), {"theta": theta, "phi": phi}, units or Units(),
                         build_args={"delta": delta})

    def _hamiltonian(self, p):
        th, ph = p["theta"], p["phi"]
        n = (np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th))
        return 0.5 * self.delta * (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z)

    def _d_hamiltonian(self, name, p):
        th, ph = p["theta"], p["phi"]
        if name == "theta":
            dn = (np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th))
        else:
            dn = (-np.sin(th) * np.sin(ph), np.sin(th) * np.cos(ph), 0.0)
        return 0.5 * self.delta * (dn[0] * SIGMA_X + dn[1] * SIGMA_Y + dn[2] * SIGMA_Z)

    @property
    def observable_names(self):
        return ("sigma_x", "sigma_y", "sigma_z")

    def observable(self, name, params=None):
        ops = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}
        if name not in ops:
            return super().observable(name, params)
        return ops[name].copy()

    def vector_potential_param(self, axis=0):
        raise InvalidParameter("two-level model carries no charge")

    def d_vector_potential(self, axis=0, params=None):
        # neutral pseudo-spin: the momentum analog vanishes identically
        return np.zeros((2, 2), dtype=complex)


def build_two_level(delta: float, theta: float = 0.0, phi: float = 0.0, units: Units | None = None) -> TwoLevel:
    return TwoLevel(delta, theta, phi, units)
