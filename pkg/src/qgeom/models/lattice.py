"""Spinless-fermion tight-binding chains in a fixed-N Fock space.

Hopping i -> j across a bond of displacement d = x_j - x_i carries the Peierls
factor exp(-i * twist * d), i.e. the uniform vector potential A = hbar c twist / e
for electrons of charge -e. Under open boundaries the same factor is a pure
gauge transformation generated by the position operator.
"""
from __future__ import annotations

from math import comb

import numpy as np

from ..errors import DimensionTooLarge, ForbiddenOperator, InvalidParameter
from ..fock import MAX_DIM, FockSpace
from .base import OBC, PBC, LatticeGeometry, NuclearFrame, Nucleus, ParameterizedModel, Units

CHAIN_PARAMS = ("delta_dim", "onsite_delta", "twist", "u_rigid")


class LatticeChain(ParameterizedModel):
    """1D chain with alternating hopping ``t_hop +- delta_dim``, sliding onsite
    pattern ``onsite_delta * cos(2 pi (j b - u_rigid) / a)`` with period
    ``a = 2 b``, nearest-neighbour repulsion ``v_int`` and an optional one-body
    nonlocal projector ``g |phi><phi|``.
    """

    name = "lattice_chain"

    def __init__(self, n_sites: int, n_fermions: int, t_hop: float = 1.0, boundary: str = OBC,
                 bond_length: float = 1.0, v_int: float = 0.0, params: dict | None = None,
                 nonlocal_projector=None, units: Units | None = None, name: str | None = None):
        boundary = boundary.lower()
        if boundary not in (OBC, PBC):
            raise InvalidParameter(f"boundary must be 'obc' or 'pbc', got {boundary!r}")
        if n_sites < 2 or (boundary == PBC and n_sites < 3):
            raise InvalidParameter(f"n_sites={n_sites} too small for {boundary}")
        if comb(n_sites, n_fermions) > MAX_DIM:
            raise DimensionTooLarge(f"C({n_sites},{n_fermions}) exceeds {MAX_DIM}")
        if name:
            self.name = name
        self.boundary = boundary
        self.n_sites = n_sites
        self.t_hop = float(t_hop)
        self.bond_length = float(bond_length)
        self.period = 2.0 * self.bond_length
        self.v_int = float(v_int)
        self.fock = FockSpace(n_sites, n_fermions)
        b = self.bond_length
        if boundary == OBC:
            x = (np.arange(n_sites) - 0.5 * (n_sites - 1)) * b
        else:
            x = np.arange(n_sites) * b
        bonds = [(j, j + 1, b) for j in range(n_sites - 1)]
        if boundary == PBC:
            bonds.append((n_sites - 1, 0, b))
        self.geometry = LatticeGeometry(n_sites, tuple(x), tuple(bonds),
                                        self.period if boundary == PBC else None)
        self.x = x
        self._pattern_x = np.arange(n_sites) * b
        self._nonlocal = None
        if nonlocal_projector is not None:
            g, phi = nonlocal_projector
            phi = np.asarray(phi, dtype=complex)
            if phi.shape != (n_sites,):
                raise InvalidParameter("nonlocal projector vector must have one entry per site")
            self._nonlocal = float(g) * np.outer(phi, phi.conj())
        names = CHAIN_PARAMS + (("E_x",) if boundary == OBC else ())
        frame = NuclearFrame((Nucleus(float(n_fermions), (0.0,)),))
        super().__init__(self.fock.dim, names, params or {}, units or Units(),
                         build_args={"n_sites": n_sites, "n_fermions": n_fermions, "t_hop": t_hop,
                                     "boundary": boundary, "bond_length": bond_length, "v_int": v_int,
                                     "nonlocal": None if nonlocal_projector is None
                                     else [float(nonlocal_projector[0]),
                                           np.asarray(nonlocal_projector[1]).real.tolist()]},
                         n_electrons=n_fermions, frame=frame)
        occ = self.fock.occupations()
        self._interaction = np.zeros(self.fock.dim)
        for i, j, _ in bonds:
            self._interaction += occ[:, i] * occ[:, j]
        self._interaction *= self.v_int
        self._position = self.fock.diagonal(occ @ x) if boundary == OBC else None

    # -- one-body pieces ----------------------------------------------
    def _bond_amplitudes(self, p):
        return np.array([self.t_hop + (-1) ** i * p["delta_dim"] for i, _, _ in self.geometry.bonds])

    def _pattern(self, p):
        return np.cos(2.0 * np.pi * (self._pattern_x - p["u_rigid"]) / self.period)

    def _hop_matrix(self, coeffs, twist, deriv=False):
        """sum_b -c_b (e^{-i k d} c_j^+ c_i + h.c.), optionally differentiated in twist."""
        n = self.n_sites
        h = np.zeros((n, n), dtype=complex)
        for c, (i, j, d) in zip(coeffs, self.geometry.bonds):
            amp = -c * np.exp(-1j * twist * d)
            if deriv:
                amp = amp * (-1j * d)
            h[j, i] += amp
            h[i, j] += np.conj(amp)
        return h

    def one_body(self, p) -> np.ndarray:
        h = self._hop_matrix(self._bond_amplitudes(p), p["twist"])
        h += np.diag(p["onsite_delta"] * self._pattern(p))
        if self.boundary == OBC:
            h += np.diag(self.units.e_charge * p["E_x"] * self.x)
        if self._nonlocal is not None:
            h += self._nonlocal
        return h

    def _hamiltonian(self, p):
        return self.fock.one_body(self.one_body(p)) + np.diag(self._interaction)

    def _d_hamiltonian(self, name, p):
        n = self.n_sites
        if name == "delta_dim":
            alt = np.array([(-1) ** i for i, _, _ in self.geometry.bonds], dtype=float)
            h1 = self._hop_matrix(alt, p["twist"])
        elif name == "onsite_delta":
            h1 = np.diag(self._pattern(p)).astype(complex)
        elif name == "twist":
            h1 = self._hop_matrix(self._bond_amplitudes(p), p["twist"], deriv=True)
        elif name == "u_rigid":
            k = 2.0 * np.pi / self.period
            h1 = np.diag(p["onsite_delta"] * k * np.sin(k * (self._pattern_x - p["u_rigid"]))).astype(complex)
        elif name == "E_x":
            h1 = np.diag(self.units.e_charge * self.x).astype(complex)
        else:  # pragma: no cover - guarded by d_hamiltonian
            raise InvalidParameter(name)
        assert h1.shape == (n, n)
        return self.fock.one_body(h1)

    # -- observables --------------------------------------------------
    def density(self, site: int) -> np.ndarray:
        """Charge on ``site``: -e times its occupation."""
        return -self.units.e_charge * self.fock.number(site)

    def bond_current(self, bond: int, params=None) -> np.ndarray:
        """Charge current along bond ``bond`` in the i -> j direction of its definition."""
        p = self.params(params)
        i, j, d = self.geometry.bonds[bond]
        amp = -self._bond_amplitudes(p)[bond] * np.exp(-1j * p["twist"] * d)
        m = np.zeros((self.n_sites, self.n_sites), dtype=complex)
        hb = self.units.hbar
        m[j, i] = -1j * amp / hb
        m[i, j] = 1j * np.conj(amp) / hb
        return -self.units.e_charge * self.fock.one_body(m)

    def divergence(self, bond_values, site: int):
        """Lattice divergence at ``site``: outgoing minus incoming bond values."""
        out = 0.0
        for b, (i, j, _) in enumerate(self.geometry.bonds):
            if i == site:
                out = out + bond_values[b]
            if j == site:
                out = out - bond_values[b]
        return out

    @property
    def n_bonds(self) -> int:
        return len(self.geometry.bonds)

    @property
    def observable_names(self):
        names = [f"density_{s}" for s in range(self.n_sites)]
        names += [f"bond_current_{b}" for b in range(self.n_bonds)]
        names += ["J"]
        if self.boundary == OBC:
            names.append("dipole")
        return tuple(names)

    def observable(self, name, params=None):
        if name.startswith("density_"):
            return self.density(int(name.split("_")[-1]))
        if name.startswith("bond_current_"):
            return self.bond_current(int(name.split("_")[-1]), params)
        if name == "J":
            return -self.units.c_light * self.d_vector_potential(0, params)
        if name == "dipole":
            return -self.units.e_charge * self.position(0)
        return super().observable(name, params)

    # -- field hooks --------------------------------------------------
    def vector_potential_param(self, axis=0):
        if axis != 0:
            raise InvalidParameter("chain is one-dimensional")
        u = self.units
        return "twist", u.e_charge / (u.hbar * u.c_light)

    def efield_param(self, axis=0):
        if self.boundary == PBC:
            raise ForbiddenOperator("no electric-field term under PBC: the macroscopic field is zero")
        if axis != 0:
            raise InvalidParameter("chain is one-dimensional")
        return "E_x"

    def position(self, axis=0):
        if self.boundary == PBC:
            raise ForbiddenOperator("position is a forbidden operator under PBC")
        if axis != 0:
            raise InvalidParameter("chain is one-dimensional")
        return self._position.copy()

    def nucleus_param(self, s, axis=0):
        if s != 0 or axis != 0:
            raise InvalidParameter("chain frame has a single rigid pseudo-nucleus")
        return "u_rigid"

    @property
    def cell_length(self):
        if self.boundary != PBC:
            raise InvalidParameter("cell length is defined under PBC only")
        return self.n_sites * self.bond_length


def build_rice_mele(n_sites: int, t_hop: float = 1.0, delta_dim: float = 0.0, onsite_delta: float = 0.0,
                    boundary: str = OBC, twist: float = 0.0, n_fermions: int | None = None,
                    bond_length: float = 1.0, u_rigid: float = 0.0, units: Units | None = None,
                    nonlocal_projector=None) -> LatticeChain:
    if n_sites < 4 or n_sites % 2:
        raise InvalidParameter("Rice-Mele chain needs an even n_sites >= 4")
    nf = n_sites // 2 if n_fermions is None else n_fermions
    return LatticeChain(n_sites, nf, t_hop, boundary, bond_length,
                        params={"delta_dim": delta_dim, "onsite_delta": onsite_delta,
                                "twist": twist, "u_rigid": u_rigid},
                        nonlocal_projector=nonlocal_projector, units=units, name="rice_mele")


def build_interacting_ring(n_sites: int, n_fermions: int, t_hop: float = 1.0, v_int: float = 0.0,
                           twist: float = 0.0, bond_length: float = 1.0,
                           units: Units | None = None) -> LatticeChain:
    return LatticeChain(n_sites, n_fermions, t_hop, PBC, bond_length, v_int=v_int,
                        params={"twist": twist}, units=units, name="interacting_ring")


def build_two_site_molecule(t_hop: float, offset: float, spacing: float = 1.0,
                            units: Units | None = None) -> LatticeChain:
    """One electron on two sites with energies -+offset/2 (ordering set by the pattern)."""
    return LatticeChain(2, 1, t_hop, OBC, spacing, params={"onsite_delta": 0.5 * offset},
                        units=units, name="two_site_molecule")
