"""Spinless electrons on a continuous ring of circumference L, plane-wave basis.

The basis {exp(i k x)}, k = 2 pi g / L with |g| <= g_cut, is mapped onto
itself by every continuous translation, so rigid displacement of the nuclei
is an exact symmetry of the truncated problem and the kinetic energy keeps
its exact quadratic dependence on the twist. Those two facts are what the
Galilean sum rules (effective density, Drude weight) rely on.
"""
from __future__ import annotations

import numpy as np

from ..errors import ForbiddenOperator, InvalidParameter
from ..fock import FockSpace
from .base import PBC, NuclearFrame, Nucleus, ParameterizedModel, Units


class ContinuumRing(ParameterizedModel):
    name = "continuum_ring"
    boundary = PBC

    def __init__(self, n_electrons: int, length: float, frame: NuclearFrame, well_depth: float = 0.0,
                 well_width: float = 0.3, g_cut: int = 6, v_int: float = 0.0, twist: float = 0.0,
                 units: Units | None = None):
        if length <= 0 or well_width <= 0 or g_cut < 1:
            raise InvalidParameter("length, well_width must be positive and g_cut >= 1")
        units = units or Units()
        self.length = float(length)
        self.well_depth = float(well_depth)
        self.well_width = float(well_width)
        self.g_cut = int(g_cut)
        self.v_int = float(v_int)
        self.g = np.arange(-g_cut, g_cut + 1)
        self.k = 2.0 * np.pi * self.g / self.length
        self.fock = FockSpace(self.g.size, n_electrons)
        n_nuc = len(frame.nuclei)
        names = ("twist", "u") + tuple(f"R{s}" for s in range(n_nuc))
        super().__init__(self.fock.dim, names, {"twist": twist}, units,
                         build_args={"n_electrons": n_electrons, "length": length, "frame": frame,
                                     "well_depth": well_depth, "well_width": well_width,
                                     "g_cut": g_cut, "v_int": v_int},
                         n_electrons=n_electrons, frame=frame)
        self._r0 = np.array([float(np.atleast_1d(n.position)[0]) for n in frame.nuclei])
        self._z = frame.charges()
        q = self.k[:, None] - self.k[None, :]
        self._q = q
        self._wq = (-self.well_depth * np.sqrt(2.0 * np.pi) * self.well_width / self.length
                    * np.exp(-0.5 * (q * self.well_width) ** 2))
        self._h_int = self._interaction() if self.v_int else None

    def _interaction(self):
        m = self.g.size
        terms = []
        coef = 0.5 * 0.5 * self.v_int  # 1/2 sum_q u_q with u_{+-1} = v_int / 2
        for shift in (1, -1):
            for a in range(m):
                for b in range(m):
                    a2, b2 = a + shift, b - shift
                    if 0 <= a2 < m and 0 <= b2 < m:
                        terms.append((coef, a2, b2, b, a))
        return self.fock.two_body(terms)

    def _positions(self, p):
        return np.array([self._r0[s] + p["u"] + p[f"R{s}"] for s in range(self._r0.size)])

    def _potential(self, p, weights=None):
        """sum_s weight_s Z_s w_q exp(-i q X_s); weights default to 1."""
        v = np.zeros_like(self._q, dtype=complex)
        for s, xs in enumerate(self._positions(p)):
            wt = 1.0 if weights is None else weights[s]
            if wt:
                v += wt * self._z[s] * self._wq * np.exp(-1j * self._q * xs)
        return v

    def one_body(self, p):
        u = self.units
        kin = u.hbar ** 2 * (self.k + p["twist"]) ** 2 / (2.0 * u.mass)
        return np.diag(kin).astype(complex) + self._potential(p)

    def _hamiltonian(self, p):
        h = self.fock.one_body(self.one_body(p))
        if self._h_int is not None:
            h = h + self._h_int
        return h

    def _d_hamiltonian(self, name, p):
        u = self.units
        if name == "twist":
            h1 = np.diag(u.hbar ** 2 * (self.k + p["twist"]) / u.mass).astype(complex)
        elif name == "u":
            h1 = -1j * self._q * self._potential(p)
        else:
            s = int(name[1:])
            wts = np.zeros(self._r0.size)
            wts[s] = 1.0
            h1 = -1j * self._q * self._potential(p, wts)
        return self.fock.one_body(h1)

    @property
    def observable_names(self):
        return ("J", "P")

    def observable(self, name, params=None):
        p = self.params(params)
        if name == "J":
            return -self.units.c_light * self.d_vector_potential(0, p)
        if name == "P":
            return self.fock.one_body(np.diag(self.units.hbar * (self.k + p["twist"])).astype(complex))
        return super().observable(name, params)

    def vector_potential_param(self, axis=0):
        if axis != 0:
            raise InvalidParameter("ring is one-dimensional")
        u = self.units
        return "twist", u.e_charge / (u.hbar * u.c_light)

    def efield_param(self, axis=0):
        raise ForbiddenOperator("no electric-field term under PBC: the macroscopic field is zero")

    def position(self, axis=0):
        raise ForbiddenOperator("position is a forbidden operator under PBC")

    def nucleus_param(self, s, axis=0):
        if axis != 0 or not 0 <= s < self._r0.size:
            raise InvalidParameter(f"no nucleus {s} along axis {axis}")
        return f"R{s}"

    @property
    def cell_length(self):
        return self.length


def build_continuum_ring(n_electrons: int, n_cells: int, cell: float = 1.0, charge: float | None = None,
                         well_depth: float = 0.0, well_width: float = 0.25, g_cut: int = 6,
                         v_int: float = 0.0, twist: float = 0.0, nuclear_mass: float = 1.0,
                         units: Units | None = None) -> ContinuumRing:
    """Ring of ``n_cells`` equally spaced nuclei; charges default to neutrality."""
    if n_cells < 1:
        raise InvalidParameter("need at least one nucleus")
    z = n_electrons / n_cells if charge is None else charge
    frame = NuclearFrame(tuple(Nucleus(z, ((s + 0.5) * cell,), nuclear_mass) for s in range(n_cells)))
    return ContinuumRing(n_electrons, n_cells * cell, frame, well_depth, well_width, g_cut, v_int,
                         twist, units)
