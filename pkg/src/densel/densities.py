"""True densities on [0,1]: exact pdf/cdf/quantile, sampling, and L2 norms.

Three density families are provided.  All are supported on [0,1] and all
expose exact closed forms, so every population quantity in the package
(projection coefficients, model variances, risks) can be computed without
estimation error.  Numerical quadrature is used only as an independent
cross-check in the tests.

* ``PowerLaw``: s(x) = 0.75 * x**(-0.25), unbounded at 0 but square
  integrable; the standard hard case for histogram selection.
* ``Uniform``: s(x) = 1.
* ``PiecewiseConstant``: arbitrary nonnegative step function integrating
  to one, given by breakpoints and cell heights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

__all__ = [
    "Density",
    "PowerLaw",
    "Uniform",
    "PiecewiseConstant",
    "Sample",
    "UnboundedPointError",
    "density_from_config",
]


class UnboundedPointError(ValueError):
    """Raised when a pdf is evaluated at a point where it is infinite."""


def _check_domain(x: np.ndarray | float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("point outside the support [0, 1]")
    return x


@dataclass(frozen=True)
class Sample:
    """An ordered i.i.d. sample of points in [0,1]."""

    points: np.ndarray
    sorted_flag: bool = True

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("sample must be a non-empty 1-d array")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("sample points must lie in [0, 1]")
        if self.sorted_flag and np.any(np.diff(pts) < 0.0):
            raise ValueError("sorted_flag set but points are not nondecreasing")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size


class Density:
    """Common interface of the shipped densities."""

    kind: str = "abstract"

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def l2_norm_sq(self) -> float:
        """Integral of s**2 over [0,1] (exact)."""
        raise NotImplementedError

    def sample(self, n: int, rng: RngStream) -> Sample:
        """Draw n points by inverse-cdf transform; returned sorted."""
        if n < 1:
            raise ValueError("sample size must be >= 1")
        u = rng.generator().random(n)
        pts = np.sort(self.quantile(u))
        return Sample(points=pts, sorted_flag=True)

    def cell_probabilities(self, breaks: np.ndarray) -> np.ndarray:
        """P(X in cell) for consecutive cells given by breakpoints."""
        f = self.cdf(np.asarray(breaks, dtype=float))
        return np.diff(f)


@dataclass(frozen=True)
class PowerLaw(Density):
    """s(x) = 0.75 * x**(-0.25) on [0,1]; F(x) = x**0.75."""

    kind: str = field(default="powerlaw", init=False)

    def pdf(self, x):
        x = _check_domain(x)
        if np.any(x == 0.0):
            raise UnboundedPointError("pdf is unbounded at x = 0")
        return 0.75 * x ** -0.25

    def cdf(self, x):
        x = _check_domain(x)
        return x ** 0.75

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return u ** (4.0 / 3.0)

    def l2_norm_sq(self) -> float:
        # integral of (9/16) x**(-1/2) over [0,1]
        return 9.0 / 8.0


@dataclass(frozen=True)
class Uniform(Density):
    """s(x) = 1 on [0,1]."""

    kind: str = field(default="uniform", init=False)

    def pdf(self, x):
        x = _check_domain(x)
        return np.ones_like(x)

    def cdf(self, x):
        x = _check_domain(x)
        return x.copy()

    def quantile(self, u):
        return np.asarray(u, dtype=float).copy()

    def l2_norm_sq(self) -> float:
        return 1.0


@dataclass(frozen=True)
class PiecewiseConstant(Density):
    """Step density: heights[i] on [breaks[i], breaks[i+1])."""

    breaks: np.ndarray
    heights: np.ndarray
    kind: str = field(default="piecewise", init=False)

    def __post_init__(self) -> None:
        brk = np.asarray(self.breaks, dtype=float)
        hts = np.asarray(self.heights, dtype=float)
        if brk.ndim != 1 or brk.size < 2 or hts.size != brk.size - 1:
            raise ValueError("need k+1 breakpoints for k heights")
        if brk[0] != 0.0 or brk[-1] != 1.0 or np.any(np.diff(brk) <= 0.0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if np.any(hts < 0.0):
            raise ValueError("heights must be nonnegative")
        mass = float(np.sum(hts * np.diff(brk)))
        if abs(mass - 1.0) > 1e-12:
            raise ValueError(f"total mass {mass!r} differs from 1 by more than 1e-12")
        object.__setattr__(self, "breaks", brk)
        object.__setattr__(self, "heights", hts)

    def pdf(self, x):
        x = _check_domain(x)
        idx = np.minimum(np.searchsorted(self.breaks, x, side="right") - 1,
                         self.heights.size - 1)
        return self.heights[idx]

    def cdf(self, x):
        x = _check_domain(x)
        cum = np.concatenate(([0.0], np.cumsum(self.heights * np.diff(self.breaks))))
        idx = np.minimum(np.searchsorted(self.breaks, x, side="right") - 1,
                         self.heights.size - 1)
        out = cum[idx] + self.heights[idx] * (x - self.breaks[idx])
        # clamp the float tail so cdf(1.0) == 1.0 exactly
        return np.clip(out, 0.0, 1.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        cum = np.concatenate(([0.0], np.cumsum(self.heights * np.diff(self.breaks))))
        cum[-1] = 1.0
        # leftmost x with cdf(x) >= u; zero-height cells are skipped
        idx = np.minimum(np.searchsorted(cum, u, side="left"),
                         self.heights.size)
        idx = np.maximum(idx, 1) - 1
        h = self.heights[idx]
        x = self.breaks[idx] + np.where(h > 0.0, (u - cum[idx]) / np.where(h > 0.0, h, 1.0), 0.0)
        return np.clip(x, 0.0, 1.0)

    def l2_norm_sq(self) -> float:
        return float(np.sum(self.heights ** 2 * np.diff(self.breaks)))


def density_from_config(kind: str,
                        breaks=None,
                        heights=None) -> Density:
    """Build a density from a config spec (kind plus optional arrays)."""
    kind = kind.strip().lower()
    if kind == "powerlaw":
        return PowerLaw()
    if kind == "uniform":
        return Uniform()
    if kind == "piecewise":
        if breaks is None or heights is None:
            raise ValueError("piecewise density needs 'breaks' and 'heights'")
        return PiecewiseConstant(breaks=np.asarray(breaks, dtype=float),
                                 heights=np.asarray(heights, dtype=float))
    raise ValueError(f"unknown density kind {kind!r}")
