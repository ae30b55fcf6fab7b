"""Position matrix elements between eigenstates, by direct evaluation or via the velocity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGroundState, InvalidParameter, UndefinedUnderPBC
from ..qmcore import DEGENERACY_RTOL, EigenSystem
from .base import OBC, PBC


@dataclass(frozen=True)
class PositionElements:
    """<n|r|n'> for one Cartesian direction; diagonal entries are NaN when undefined."""

    matrix: np.ndarray
    route: str
    boundary: str

    def __getitem__(self, key):
        n, m = key
        if n == m and (self.boundary == PBC or self.route == "velocity"):
            raise UndefinedUnderPBC("diagonal position elements are not defined through the velocity")
        return self.matrix[n, m]


def velocity_operator(model, axis: int = 0, params=None) -> np.ndarray:
    """v = (c/e) dH/dA, the velocity conjugate to the uniform vector potential."""
    u = model.units
    return (u.c_light / u.e_charge) * model.d_vector_potential(axis, params)


def position_matrix_elements(model, eig: EigenSystem, axis: int = 0, params=None,
                             route: str | None = None, states=None) -> PositionElements:
    """Position elements in the eigenbasis.

    ``route='direct'`` takes matrix elements of the position operator (OBC
    only). ``route='velocity'`` uses r_nn' = i hbar <n|p|n'> / (m (E_n' - E_n))
    with p = m v, the only admissible definition under PBC. ``states``
    lists the kets |n'> whose columns <n|r|n'> are needed (default: all); a
    level degenerate with one of them raises ``DegenerateGroundState``.
    """
    if route is None:
        route = "direct" if model.boundary == OBC else "velocity"
    if route == "direct":
        r = model.position(axis)
        mat = eig.matrix_elements(r)
        return PositionElements(mat, route, model.boundary)
    if route != "velocity":
        raise InvalidParameter(f"unknown route {route!r}")
    v = eig.matrix_elements(velocity_operator(model, axis, params))
    e = eig.energies
    diff = e[None, :] - e[:, None]  # E_n' - E_n
    idx = np.arange(eig.dim) if states is None else np.asarray(states)
    thresh = DEGENERACY_RTOL * max(eig.op_norm, 1e-300)
    sub = np.abs(diff[:, idx])
    if np.any((sub < thresh) & (np.arange(eig.dim)[:, None] != idx[None, :])):
        raise DegenerateGroundState("degenerate levels among requested position elements")
    with np.errstate(divide="ignore", invalid="ignore"):
        mat = 1j * model.units.hbar * v / diff
    np.fill_diagonal(mat, np.nan)
    return PositionElements(mat, route, model.boundary)
