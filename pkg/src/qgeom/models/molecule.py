"""One electron in a rotating planar harmonic molecule, oscillator basis.

The basis is the 2D isotropic oscillator truncated by total quanta
``n_x + n_y <= basis_cut``. Every shell is invariant under L_z, so the
truncated space is closed under rotations about z: the rotation angle enters
as an exact unitary conjugation and the spectrum is angle independent to
machine precision. Polynomial operators are exact truncations, computed in a
basis two shells larger and then projected.

The magnetic field B_z uses the symmetric gauge centred on the rotation axis;
a uniform vector potential (A_x, A_y) enters as the gauge transformation
generated by the truncated position operator.
"""
from __future__ import annotations

import numpy as np

from ..errors import BasisNotConverged, InvalidParameter
from .base import OBC, NuclearFrame, Nucleus, ParameterizedModel, Units, quadratic_operator


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]]), np.array([[-s, -c], [c, -s]])


def oscillator_operators(cut: int, length: float, hbar: float) -> dict:
    """Truncated 2D oscillator-basis matrices of x, y, p and their quadratic products."""
    big = cut + 2
    states = [(nx, n - nx) for n in range(big + 1) for nx in range(n + 1)]
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    ax = np.zeros((dim, dim))
    ay = np.zeros((dim, dim))
    for i, (nx, ny) in enumerate(states):
        if nx > 0:
            ax[index[(nx - 1, ny)], i] = np.sqrt(nx)
        if ny > 0:
            ay[index[(nx, ny - 1)], i] = np.sqrt(ny)
    x = length / np.sqrt(2.0) * (ax + ax.T)
    y = length / np.sqrt(2.0) * (ay + ay.T)
    px = 1j * hbar / (length * np.sqrt(2.0)) * (ax.T - ax)
    py = 1j * hbar / (length * np.sqrt(2.0)) * (ay.T - ay)
    full = {
        "x": x, "y": y, "px": px, "py": py,
        "xx": x @ x, "yy": y @ y, "xy": x @ y,
        "pp": px @ px + py @ py,
        "lz": x @ py - y @ px,
    }
    keep = np.array([i for i, (nx, ny) in enumerate(states) if nx + ny <= cut])
    ops = {k: np.ascontiguousarray(v[np.ix_(keep, keep)]).astype(complex) for k, v in full.items()}
    ops["r2"] = ops["xx"] + ops["yy"]
    ops["id"] = np.eye(keep.size, dtype=complex)
    ops["_states"] = [states[i] for i in keep]
    return ops


class PlanarMolecule(ParameterizedModel):
    name = "planar_molecule"
    boundary = OBC
    spatial_dims = 2

    def __init__(self, omega_x: float, omega_y: float, basis_cut: int, frame: NuclearFrame,
                 b_field: float = 0.0, theta: float = 0.0, offset=(0.0, 0.0),
                 basis_omega: float | None = None, units: Units | None = None):
        if not (omega_x > 0 and omega_y > 0):
            raise InvalidParameter("oscillator frequencies must be positive")
        if basis_cut < 4:
            raise InvalidParameter("basis_cut must be >= 4")
        if not frame.nuclei:
            raise InvalidParameter("planar molecule needs at least one nucleus")
        units = units or Units()
        self.omega_x, self.omega_y = float(omega_x), float(omega_y)
        self.basis_cut = int(basis_cut)
        self.basis_omega = float(basis_omega or np.sqrt(omega_x * omega_y))
        self.offset = np.asarray(offset, dtype=float)
        ell = np.sqrt(units.hbar / (units.mass * self.basis_omega))
        self.ops = oscillator_operators(self.basis_cut, ell, units.hbar)
        n_nuc = len(frame.nuclei)
        self._body = frame.positions()
        self._z = frame.charges()
        self._weights = self._z / self._z.sum()
        self._centre0 = self.offset + self._weights @ self._body
        self._k0 = units.mass * np.array([self.omega_x ** 2, self.omega_y ** 2])
        names = ("theta", "B_z", "A_x", "A_y", "E_x", "E_y")
        names += tuple(f"R{s}_{ax}" for s in range(n_nuc) for ax in "xy")
        super().__init__(self.ops["id"].shape[0], names, {"theta": theta, "B_z": b_field}, units,
                         build_args={"omega_x": omega_x, "omega_y": omega_y, "basis_cut": basis_cut,
                                     "frame": frame, "offset": list(self.offset),
                                     "basis_omega": self.basis_omega},
                         n_electrons=1, frame=frame)
        self._x_eig = np.linalg.eigh(self.ops["x"])
        self._y_eig = np.linalg.eigh(self.ops["y"])

    def displaced(self, shift) -> "PlanarMolecule":
        """Same molecule with frame and well translated by ``shift`` (rotation axis and gauge stay put)."""
        return PlanarMolecule(self.omega_x, self.omega_y, self.basis_cut, self.frame, self.defaults["B_z"],
                              self.defaults["theta"], self.offset + np.asarray(shift, dtype=float),
                              self.basis_omega, self.units)

    def with_cut(self, basis_cut: int) -> "PlanarMolecule":
        return PlanarMolecule(self.omega_x, self.omega_y, basis_cut, self.frame, self.defaults["B_z"],
                              self.defaults["theta"], self.offset, self.basis_omega, self.units)

    def top_shell_weight(self, vector) -> float:
        """Probability carried by the highest retained shell n_x + n_y = basis_cut."""
        shell = np.array([nx + ny for nx, ny in self.ops["_states"]])
        return float(np.sum(np.abs(np.asarray(vector)[shell == self.basis_cut]) ** 2))

    # -- geometry ------------------------------------------------------
    def nuclear_positions(self, params=None) -> np.ndarray:
        p = self.params(params)
        rot, _ = _rot(p["theta"])
        pos = (self._body + self.offset) @ rot.T
        for s in range(pos.shape[0]):
            pos[s] += (p[f"R{s}_x"], p[f"R{s}_y"])
        return pos

    def _well(self, p):
        rot, drot = _rot(p["theta"])
        k1, k2 = self._k0
        c, s = np.cos(p["theta"]), np.sin(p["theta"])
        m = np.array([[k1 * c * c + k2 * s * s, (k1 - k2) * c * s],
                      [(k1 - k2) * c * s, k1 * s * s + k2 * c * c]])
        dm = (k1 - k2) * np.array([[-2 * c * s, c * c - s * s], [c * c - s * s, 2 * c * s]])
        shift = sum(self._weights[i] * np.array([p[f"R{i}_x"], p[f"R{i}_y"]])
                    for i in range(self._z.size))
        centre = rot @ self._centre0 + shift
        dcentre = drot @ self._centre0
        return m, dm, centre, dcentre

    def _potential(self, p):
        m, _, c, _ = self._well(p)
        return quadratic_operator(m, -m @ c, 0.5 * c @ m @ c, self.ops)

    def _gauge(self, p):
        u = self.units
        alpha = u.e_charge / (u.hbar * u.c_light)
        ex, vx = self._x_eig
        ey, vy = self._y_eig
        ux = (vx * np.exp(1j * alpha * p["A_x"] * ex)) @ vx.conj().T
        uy = (vy * np.exp(1j * alpha * p["A_y"] * ey)) @ vy.conj().T
        return ux, uy, alpha

    def _bare(self, p):
        """Hamiltonian before the uniform-A gauge transformation."""
        u, o = self.units, self.ops
        b = p["B_z"]
        h = o["pp"] / (2.0 * u.mass) + self._potential(p)
        h = h + (u.e_charge * b / (2.0 * u.mass * u.c_light)) * o["lz"]
        h = h + (u.e_charge ** 2 * b * b / (8.0 * u.mass * u.c_light ** 2)) * o["r2"]
        h = h + u.e_charge * (p["E_x"] * o["x"] + p["E_y"] * o["y"])
        return h

    def _transform(self, h, p):
        if p["A_x"] == 0.0 and p["A_y"] == 0.0:
            return h
        ux, uy, _ = self._gauge(p)
        u = ux @ uy
        return u.conj().T @ h @ u

    def _hamiltonian(self, p):
        return self._transform(self._bare(p), p)

    def _d_bare(self, name, p):
        u, o = self.units, self.ops
        if name == "theta":
            m, dm, c, dc = self._well(p)
            lin = -(dm @ c + m @ dc)
            const = dc @ m @ c + 0.5 * c @ dm @ c
            return quadratic_operator(dm, lin, const, o)
        if name == "B_z":
            return (u.e_charge / (2.0 * u.mass * u.c_light)) * o["lz"] + \
                (u.e_charge ** 2 * p["B_z"] / (4.0 * u.mass * u.c_light ** 2)) * o["r2"]
        if name == "E_x":
            return u.e_charge * o["x"]
        if name == "E_y":
            return u.e_charge * o["y"]
        # nuclear displacement R{s}_{x|y}
        s_str, axis = name[1:].split("_")
        s = int(s_str)
        beta = 0 if axis == "x" else 1
        m, _, c, _ = self._well(p)
        w = self._weights[s]
        col = m[:, beta]
        return quadratic_operator(np.zeros((2, 2)), -w * col, w * col @ c, o)

    def _d_hamiltonian(self, name, p):
        if name in ("A_x", "A_y"):
            ux, uy, alpha = self._gauge(p)
            if name == "A_y":
                h = self._hamiltonian(p)
                return 1j * alpha * (h @ self.ops["y"] - self.ops["y"] @ h)
            hx = ux.conj().T @ self._bare(p) @ ux
            comm = 1j * alpha * (hx @ self.ops["x"] - self.ops["x"] @ hx)
            return uy.conj().T @ comm @ uy
        return self._transform(self._d_bare(name, p), p)

    def d2_hamiltonian_bfield(self) -> np.ndarray:
        """Exact second B_z derivative (diamagnetic operator), gauge A = 0."""
        u = self.units
        return (u.e_charge ** 2 / (4.0 * u.mass * u.c_light ** 2)) * self.ops["r2"]

    # -- observables --------------------------------------------------
    @property
    def observable_names(self):
        return ("L_z", "r2", "x", "y", "dipole_x", "dipole_y")

    def observable(self, name, params=None):
        o, e = self.ops, self.units.e_charge
        table = {"L_z": o["lz"], "r2": o["r2"], "x": o["x"], "y": o["y"],
                 "dipole_x": -e * o["x"], "dipole_y": -e * o["y"]}
        if name not in table:
            return super().observable(name, params)
        return table[name].copy()

    def vector_potential_param(self, axis=0):
        return ("A_x", "A_y")[axis], 1.0

    def efield_param(self, axis=0):
        return ("E_x", "E_y")[axis]

    def position(self, axis=0):
        return self.ops[("x", "y")[axis]].copy()

    def nucleus_param(self, s, axis=0):
        if not 0 <= s < self._z.size or axis not in (0, 1):
            raise InvalidParameter(f"no nucleus {s} along axis {axis}")
        return f"R{s}_{'xy'[axis]}"


def default_frame(half_distance: float = 1.0, total_charge: float = 1.0, nuclear_mass: float = 1836.0,
                  ) -> NuclearFrame:
    """Two equal charges at (+-R, 0) summing to ``total_charge``."""
    z = 0.5 * total_charge
    return NuclearFrame((Nucleus(z, (half_distance, 0.0), nuclear_mass),
                         Nucleus(z, (-half_distance, 0.0), nuclear_mass)))


def build_planar_molecule(omega_x: float, omega_y: float, basis_cut: int, b_field: float = 0.0,
                          theta: float = 0.0, frame: NuclearFrame | None = None, offset=(0.0, 0.0),
                          basis_omega: float | None = None, units: Units | None = None) -> PlanarMolecule:
    return PlanarMolecule(omega_x, omega_y, basis_cut, frame or default_frame(), b_field, theta,
                          offset, basis_omega, units)


def choose_basis_cut(omega_x: float, omega_y: float, tol: float = 1e-10, start: int = 8, max_cut: int = 40,
                     shell_tol: float = 1e-10, **kwargs) -> int:
    """Smallest cut whose ground energy moves by < ``tol`` under cut -> cut + 2 and whose
    ground state puts less than ``shell_tol`` weight in the highest retained shell."""
    from ..qmcore import eigendecompose

    def solve(cut):
        m = build_planar_molecule(omega_x, omega_y, cut, **kwargs)
        e = eigendecompose(m.hamiltonian())
        return e.energies[0], m.top_shell_weight(e.ground)

    cut, (prev, weight) = start, solve(start)
    while cut + 2 <= max_cut:
        nxt, nxt_weight = solve(cut + 2)
        if abs(nxt - prev) < tol and weight < shell_tol:
            return cut
        cut, prev, weight = cut + 2, nxt, nxt_weight
    raise BasisNotConverged(f"ground state not converged to {tol:g} by basis_cut={max_cut}")
