from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ForbiddenOperator, InvalidParameter

OBC = "obc"
PBC = "pbc"


@dataclass(frozen=True)
class Units:
    """Gaussian-unit constants; every formula keeps these prefactors explicit."""

    hbar: float = 1.0
    e_charge: float = 1.0
    mass: float = 1.0
    c_light: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "e_charge", "mass", "c_light"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"units.{name} must be > 0")


@dataclass(frozen=True)
class Nucleus:
    charge: float
    position: tuple
    mass: float = 1.0

    def __post_init__(self):
        if not self.charge > 0:
            raise InvalidParameter("nuclear charge must be positive")
        if not np.all(np.isfinite(self.position)):
            raise InvalidParameter("nuclear position must be finite")


@dataclass(frozen=True)
class NuclearFrame:
    nuclei: tuple = ()

    @property
    def total_charge(self) -> float:
        return float(sum(n.charge for n in self.nuclei))

    def check_neutral(self, n_electrons: int, tol: float = 1e-12) -> None:
        if abs(self.total_charge - n_electrons) > tol:
            raise InvalidParameter(
                f"frame charge {self.total_charge} does not neutralize {n_electrons} electrons"
            )

    def positions(self) -> np.ndarray:
        return np.array([np.atleast_1d(n.position) for n in self.nuclei], dtype=float)

    def charges(self) -> np.ndarray:
        return np.array([n.charge for n in self.nuclei], dtype=float)


@dataclass(frozen=True)
class LatticeGeometry:
    n_sites: int
    site_positions: tuple
    bonds: tuple  # (i, j, displacement x_j - x_i)
    lattice_period: float | None = None

    def __post_init__(self):
        for i, j, _ in self.bonds:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise InvalidParameter(f"bond ({i}, {j}) references a missing site")
        if not np.all(np.isfinite(self.site_positions)):
            raise InvalidParameter("site positions must be finite")


class ParameterizedModel:
    """A Hamiltonian family ``H(params)`` with analytic parameter derivatives.

    Subclasses fill in ``_hamiltonian`` and ``_d_hamiltonian``; parameters are
    plain dicts keyed by the names in ``param_names``. The field hooks
    (``d_vector_potential``, ``d_efield``, ``position``, nuclear displacement
    names) let the response code stay model-agnostic.
    """

    name = "model"
    boundary = OBC
    spatial_dims = 1

    def __init__(self, dim: int, param_names, defaults: Mapping[str, float], units: Units,
                 build_args: Mapping | None = None, n_electrons: int = 1,
                 frame: NuclearFrame | None = None):
        self.dim = int(dim)
        self.param_names = tuple(param_names)
        self.defaults = {k: float(defaults.get(k, 0.0)) for k in self.param_names}
        self.units = units
        self.build_args = dict(build_args or {})
        self.n_electrons = n_electrons
        self.frame = frame or NuclearFrame()

    # -- parameters ---------------------------------------------------
    def params(self, overrides: Mapping[str, float] | None = None) -> dict:
        p = dict(self.defaults)
        for k, v in (overrides or {}).items():
            if k not in p:
                raise InvalidParameter(f"{self.name} has no parameter {k!r}")
            p[k] = float(v)
        return p

    def hamiltonian(self, params: Mapping[str, float] | None = None) -> np.ndarray:
        return self._hamiltonian(self.params(params))

    def d_hamiltonian(self, name: str, params: Mapping[str, float] | None = None) -> np.ndarray:
        if name not in self.param_names:
            raise InvalidParameter(f"{self.name} has no parameter {name!r}")
        return self._d_hamiltonian(name, self.params(params))

    def _hamiltonian(self, p: dict) -> np.ndarray:
        raise NotImplementedError

    def _d_hamiltonian(self, name: str, p: dict) -> np.ndarray:
        raise NotImplementedError

    # -- observables --------------------------------------------------
    @property
    def observable_names(self) -> tuple:
        return ()

    def observable(self, name: str, params: Mapping[str, float] | None = None) -> np.ndarray:
        raise InvalidParameter(f"{self.name} has no observable {name!r}")

    # -- field couplings ----------------------------------------------
    def vector_potential_param(self, axis: int = 0) -> tuple[str, float]:
        """(parameter name, dparam/dA) for the uniform vector potential along ``axis``."""
        raise InvalidParameter(f"{self.name} has no vector-potential coupling")

    def d_vector_potential(self, axis: int = 0, params=None) -> np.ndarray:
        name, scale = self.vector_potential_param(axis)
        return scale * self.d_hamiltonian(name, params)

    def efield_param(self, axis: int = 0) -> str:
        raise ForbiddenOperator(f"{self.name} has no electric-field coupling")

    def d_efield(self, axis: int = 0, params=None) -> np.ndarray:
        return self.d_hamiltonian(self.efield_param(axis), params)

    def position(self, axis: int = 0) -> np.ndarray:
        if self.boundary == PBC:
            raise ForbiddenOperator("position is not an operator under periodic boundary conditions")
        raise InvalidParameter(f"{self.name} exposes no position operator")

    def nucleus_param(self, s: int, axis: int = 0) -> str:
        raise InvalidParameter(f"{self.name} has no nuclear displacement parameters")

    @property
    def cell_length(self) -> float:
        """Supercell length (volume) entering intensive PBC quantities."""
        raise InvalidParameter(f"{self.name} has no supercell")

    # -- provenance ---------------------------------------------------
    def fingerprint(self, params: Mapping[str, float] | None = None) -> str:
        doc = {
            "model": self.name,
            "build": {k: _jsonable(v) for k, v in sorted(self.build_args.items())},
            "params": self.params(params),
            "boundary": self.boundary,
            "units": [self.units.hbar, self.units.e_charge, self.units.mass, self.units.c_light],
        }
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, (NuclearFrame, Nucleus, Units)):
        return repr(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def quadratic_operator(mat, vec, const, ops) -> np.ndarray:
    """Operator of 1/2 r^T M r + b.r + c given basis matrices ``ops``.

    ``ops`` maps 'xx', 'xy', 'yy', 'x', 'y', 'id' to matrices.
    """
    mat = np.asarray(mat, dtype=float)
    return (0.5 * (mat[0, 0] * ops["xx"] + 2.0 * mat[0, 1] * ops["xy"] + mat[1, 1] * ops["yy"])
            + vec[0] * ops["x"] + vec[1] * ops["y"] + const * ops["id"])
