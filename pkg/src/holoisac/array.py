"""Planar holographic array geometry."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ModelError

# default carrier: 0.125 m wavelength (2.4 GHz)
DEFAULT_WAVELENGTH = 0.125


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform planar array in the z=0 plane.

    ``wavelength`` stands in for lambda (a reserved word in Python).
    Set ``conventional=True`` to allow spacing of half a wavelength or more.
    """

    n_x: int = 20
    n_y: int = 20
    d: float = DEFAULT_WAVELENGTH / 4
    a_elem: float = DEFAULT_WAVELENGTH ** 2 / 64
    wavelength: float = DEFAULT_WAVELENGTH
    conventional: bool = False

    def __post_init__(self):
        if int(self.n_x) != self.n_x or int(self.n_y) != self.n_y:
            raise ModelError("element counts must be integers")
        if self.n_x < 1 or self.n_y < 1:
            raise ModelError("element counts must be at least 1")
        if min(self.d, self.a_elem, self.wavelength) <= 0:
            raise ModelError("spacing, aperture and wavelength must be positive")
        # small slack so that d = sqrt(A) survives rounding
        if np.sqrt(self.a_elem) > self.d * (1 + 1e-12):
            raise ModelError("element aperture exceeds the cell: sqrt(a_elem) > d")
        if not self.conventional and self.d >= self.wavelength / 2:
            raise ModelError("holographic mode requires d < wavelength/2 "
                             "(set conventional=True for the baseline)")
        if self.n_x != self.n_y:
            warnings.warn("non-square array: the position formula divides the row "
                          "index by n_y, which only tiles the grid when n_x == n_y",
                          stacklevel=3)

    @classmethod
    def from_aperture(cls, side: float = 5 * DEFAULT_WAVELENGTH,
                      d: float = DEFAULT_WAVELENGTH / 4,
                      a_elem: float = DEFAULT_WAVELENGTH ** 2 / 64,
                      wavelength: float = DEFAULT_WAVELENGTH,
                      conventional: bool = False) -> "ArrayConfig":
        """Square array whose side length is ``side`` metres."""
        n = int(round(side / d))
        if n < 1 or abs(n * d - side) > 1e-9 * side:
            raise ModelError(f"side {side} is not an integer multiple of d={d}")
        return cls(n_x=n, n_y=n, d=d, a_elem=a_elem, wavelength=wavelength,
                   conventional=conventional)

    @classmethod
    def conventional_baseline(cls, wavelength: float = DEFAULT_WAVELENGTH) -> "ArrayConfig":
        """8x8 array at 5/8-wavelength spacing over the same aperture."""
        return cls.from_aperture(side=5 * wavelength, d=5 * wavelength / 8,
                                 a_elem=wavelength ** 2 / 64, wavelength=wavelength,
                                 conventional=True)

    @property
    def n_total(self) -> int:
        return self.n_x * self.n_y

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def l_x(self) -> float:
        return self.n_x * self.d

    @property
    def l_y(self) -> float:
        return self.n_y * self.d

    @property
    def center(self) -> np.ndarray:
        return np.array([self.l_x / 2, self.l_y / 2, 0.0])

    @property
    def eta_aor(self) -> float:
        return self.a_elem / self.d ** 2


def antenna_position(cfg: ArrayConfig, n: int) -> np.ndarray:
    """Position of the n-th element (1-based), following the published indexing."""
    if not 1 <= n <= cfg.n_total:
        raise DomainError(f"element index {n} outside 1..{cfg.n_total}")
    return np.array([((n - 1) % cfg.n_x) * cfg.d, ((n - 1) // cfg.n_y) * cfg.d, 0.0])


def antenna_positions(cfg: ArrayConfig) -> np.ndarray:
    """All element positions as an (N, 3) array, same rule as antenna_position."""
    idx = np.arange(cfg.n_total)
    pos = np.zeros((cfg.n_total, 3))
    pos[:, 0] = (idx % cfg.n_x) * cfg.d
    pos[:, 1] = (idx // cfg.n_y) * cfg.d
    return pos


def array_occupation_ratio(cfg: ArrayConfig) -> float:
    """Fraction of the aperture that radiates, A/d^2."""
    return cfg.eta_aor
