"""Model spaces: histogram and Fourier bases, collections, exact quantities.

A model is a finite-dimensional linear subspace of L2[0,1] described by an
orthonormal basis.  Histogram models are spanned by normalized indicators
of partition cells; Fourier models by {1, sqrt(2)cos(2*pi*k*x),
sqrt(2)sin(2*pi*k*x), k <= j}.  Three enumerable collections are shipped:

* regular histograms with 1..n equal cells,
* the two-block family: J1 equal cells on [0, k/n) then J2 equal cells on
  [k/n, 1), for all 1 <= k <= n, J1 <= k, J2 <= n-k,
* Fourier spaces with cutoff j = 1..n.

Given a known density, every population quantity of a model is available in
closed form (histograms) or by quadrature (Fourier coefficients): the
projection coefficients, the projection norm, the squared bias, the
variance number ``d_exact`` (n times the expected squared estimation error,
written D below), and the scale constants that drive all concentration
thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .densities import Density, PowerLaw

__all__ = [
    "ModelSpec",
    "ModelCollection",
    "ExactModelQuantities",
    "PairDiagnostics",
    "build_regular_histograms",
    "build_two_block_collection",
    "build_fourier_collection",
    "histogram_model",
    "fourier_model",
    "two_block_breaks",
    "basis_eval",
    "exact_quantities",
    "pair_diagnostics",
    "scale_constants",
]


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One basis: either a histogram partition or a Fourier cutoff.

    ``breaks`` is the partition (histograms only), ``j`` the frequency
    cutoff (Fourier only).  ``params`` carries the generating parameters,
    e.g. ``(k, j1, j2)`` for two-block models, for stable ids and joins.
    """

    id: str
    basis: str                      # "histogram" | "fourier"
    dim: int
    breaks: np.ndarray | None = None
    j: int | None = None
    params: tuple = ()

    def __post_init__(self) -> None:
        if self.basis == "histogram":
            brk = np.asarray(self.breaks, dtype=float)
            if brk[0] != 0.0 or brk[-1] != 1.0 or np.any(np.diff(brk) <= 0.0):
                raise ValueError("histogram breakpoints must cover [0,1] strictly increasing")
            if self.dim != brk.size - 1:
                raise ValueError("dim must equal the number of cells")
            object.__setattr__(self, "breaks", brk)
        elif self.basis == "fourier":
            if self.j is None or self.j < 1 or self.dim != 2 * self.j + 1:
                raise ValueError("fourier model needs j >= 1 and dim = 2j+1")
        else:
            raise ValueError(f"unknown basis {self.basis!r}")

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelSpec) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    @property
    def widths(self) -> np.ndarray:
        if self.basis != "histogram":
            raise ValueError("widths only defined for histogram models")
        return np.diff(self.breaks)


def histogram_model(breaks: Iterable[float], id: str | None = None,
                    params: tuple = ()) -> ModelSpec:
    brk = np.asarray(list(breaks), dtype=float)
    d = brk.size - 1
    mid = id if id is not None else "hist:" + ",".join(f"{b:.12g}" for b in brk)
    return ModelSpec(id=mid, basis="histogram", dim=d, breaks=brk, params=params)


def fourier_model(j: int) -> ModelSpec:
    return ModelSpec(id=f"fourier:j={j}", basis="fourier", dim=2 * j + 1, j=j,
                     params=(j,))


def two_block_breaks(n: int, k: int, j1: int, j2: int) -> np.ndarray:
    """Partition with j1 equal cells on [0, k/n) then j2 on [k/n, 1)."""
    c = k / n
    left = c * np.arange(j1 + 1) / j1
    right = c + (1.0 - c) * np.arange(1, j2 + 1) / j2
    right[-1] = 1.0                       # pin the float tail of c + (1-c)
    return np.concatenate((left, right))


@dataclass(frozen=True)
class ModelCollection:
    """A finite list of models sharing one basis type."""

    kind: str                       # "regular-hist" | "two-block" | "fourier"
    n: int
    models: tuple[ModelSpec, ...]

    def __post_init__(self) -> None:
        ids = [m.id for m in self.models]
        if len(set(ids)) != len(ids):
            raise ValueError("model ids must be unique")

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def by_id(self, mid: str) -> ModelSpec:
        for m in self.models:
            if m.id == mid:
                return m
        raise KeyError(mid)


def build_regular_histograms(n: int) -> ModelCollection:
    """Histograms with d = 1..n equal cells on [0,1]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    models = []
    for d in range(1, n + 1):
        brk = np.arange(d + 1, dtype=float) / d
        models.append(histogram_model(brk, id=f"reg-hist:d={d}", params=(d,)))
    return ModelCollection(kind="regular-hist", n=n, models=tuple(models))


def build_two_block_collection(n: int) -> ModelCollection:
    """All (k, j1, j2) with 1 <= k <= n, j1 <= k, j2 <= n-k."""
    if n < 1:
        raise ValueError("n must be >= 1")
    models = []
    for k in range(1, n):
        for j1 in range(1, k + 1):
            for j2 in range(1, n - k + 1):
                brk = two_block_breaks(n, k, j1, j2)
                models.append(histogram_model(
                    brk, id=f"two-block:k={k},j1={j1},j2={j2}",
                    params=(k, j1, j2)))
    return ModelCollection(kind="two-block", n=n, models=tuple(models))


def build_fourier_collection(n: int) -> ModelCollection:
    """Fourier spaces with cutoff j = 1..n (dim 2j+1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return ModelCollection(kind="fourier", n=n,
                           models=tuple(fourier_model(j) for j in range(1, n + 1)))


def build_collection(kind: str, n: int) -> ModelCollection:
    kind = kind.strip().lower()
    if kind == "regular-hist":
        return build_regular_histograms(n)
    if kind == "two-block":
        return build_two_block_collection(n)
    if kind == "fourier":
        return build_fourier_collection(n)
    raise ValueError(f"unknown collection kind {kind!r}")


# ---------------------------------------------------------------------------
# Basis evaluation
# ---------------------------------------------------------------------------

def fourier_basis_matrix(j: int, x: np.ndarray) -> np.ndarray:
    """Columns [1, sqrt2*cos(2pi k x), sqrt2*sin(2pi k x)] for k = 1..j."""
    x = np.asarray(x, dtype=float)
    cols = [np.ones_like(x)]
    for k in range(1, j + 1):
        cols.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x))
        cols.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x))
    return np.stack(cols, axis=-1)


def histogram_cell_index(breaks: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cell of each point; cells are [a,b) except the last which is [a,1]."""
    idx = np.searchsorted(breaks, x, side="right") - 1
    return np.minimum(idx, breaks.size - 2)


def basis_eval(model: ModelSpec, lam: int, x) -> np.ndarray:
    """Value of basis function ``lam`` of ``model`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("point outside [0, 1]")
    if lam < 0 or lam >= model.dim:
        raise IndexError(f"basis index {lam} out of range for dim {model.dim}")
    if model.basis == "histogram":
        inside = (histogram_cell_index(model.breaks, x) == lam)
        return inside / np.sqrt(model.widths[lam])
    k, is_sin = (lam + 1) // 2, (lam % 2 == 0 and lam > 0)
    if lam == 0:
        return np.ones_like(x)
    if is_sin:
        return np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x)
    return np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x)


# ---------------------------------------------------------------------------
# Exact population quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactModelQuantities:
    """Population quantities of one model under a known density.

    ``d_exact`` is n times the expected squared estimation error of the
    projection estimator (the variance number D); ``risk`` is
    n*bias_sq + d_exact, i.e. n times the expected loss.
    """

    model_id: str
    n: int
    pop_coeffs: np.ndarray
    sm_norm_sq: float
    bias_sq: float
    d_exact: float
    risk: float


def _fourier_pop_coeffs(density: Density, j: int, tol: float = 1e-10) -> np.ndarray:
    """Population coefficients integral(s * psi) by adaptive quadrature.

    For the power-law density the substitution x = t**4 removes the
    endpoint singularity, leaving a smooth integrand.
    """
    coeffs = [1.0]  # psi_0 == 1 integrates s to 1
    power = isinstance(density, PowerLaw)
    for k in range(1, j + 1):
        for trig in (np.cos, np.sin):
            if power:
                def f(t, trig=trig, k=k):
                    # s(t^4) * psi(t^4) * 4 t^3 with s(x)=0.75 x^-0.25
                    return 3.0 * t ** 2 * np.sqrt(2.0) * trig(2.0 * np.pi * k * t ** 4)
                val, err = integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol,
                                          limit=200)
            else:
                def f(x, trig=trig, k=k):
                    return density.pdf(np.asarray(x)) * np.sqrt(2.0) * trig(2.0 * np.pi * k * x)
                pts = list(density.breaks[1:-1]) if hasattr(density, "breaks") else None
                val, err = integrate.quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol,
                                          limit=200, points=pts)
            if err > 1e-6:
                raise ArithmeticError(
                    f"quadrature for Fourier coefficient k={k} did not converge "
                    f"(reported error {err:.2e})")
            coeffs.append(val)
    return np.asarray(coeffs)


def exact_quantities(model: ModelSpec, density: Density, n: int) -> ExactModelQuantities:
    """Exact projection coefficients, bias, and variance number of a model."""
    s_norm_sq = density.l2_norm_sq()
    if model.basis == "histogram":
        probs = density.cell_probabilities(model.breaks)
        widths = model.widths
        pop = probs / np.sqrt(widths)
        sm_norm_sq = float(np.sum(probs ** 2 / widths))
        d_exact = float(np.sum(probs / widths)) - sm_norm_sq
    else:
        pop = _fourier_pop_coeffs(density, model.j)
        sm_norm_sq = float(np.sum(pop ** 2))
        # sum of psi_lambda^2 is identically dim, so D = dim - |s_m|^2
        d_exact = model.dim - sm_norm_sq
    bias_sq = s_norm_sq - sm_norm_sq
    # guard the float tail: bias and D are nonnegative by construction
    bias_sq = max(bias_sq, 0.0)
    d_exact = max(d_exact, 0.0)
    return ExactModelQuantities(
        model_id=model.id,
        n=n,
        pop_coeffs=pop,
        sm_norm_sq=sm_norm_sq,
        bias_sq=bias_sq,
        d_exact=d_exact,
        risk=n * bias_sq + d_exact,
    )


def scale_constants(model: ModelSpec, density: Density, n: int) -> tuple[float, float]:
    """Scale constants (e, v2) of one model.

    e is sup-norm-squared over the model's unit ball divided by n:
    the largest 1/(n*width) for histograms, dim/n for Fourier spaces.
    v2 is the largest basis-function variance for histograms; for Fourier
    spaces the closed bound ||s|| * sqrt(dim) is reported.
    """
    if model.basis == "histogram":
        widths = model.widths
        probs = density.cell_probabilities(model.breaks)
        e = float(np.max(1.0 / widths)) / n
        v2 = float(np.max(probs * (1.0 - probs) / widths))
    else:
        e = model.dim / n
        v2 = float(np.sqrt(density.l2_norm_sq() * model.dim))
    return e, v2


# ---------------------------------------------------------------------------
# Pair diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairDiagnostics:
    """Scale constants of a model pair plus the margin and risk ratios.

    ``v_ratio_sq`` and ``e_ratio`` are the two margin-weighted terms whose
    maximum must vanish for the selection guarantees to bite:
    (v2/(R v R'))^2 * l^2 and (e/(R v R')) * l^2 with l the log-margin
    below.  ``risk_ratio`` and ``bias_ratio`` compare the best achievable
    risk and the maximal-variance model: R_best/D_max and
    n*bias(argmax D)/D_max.
    """

    e_pair: float
    v2_pair: float
    log_margin: float
    v_ratio_sq: float
    e_ratio: float
    risk_ratio: float
    bias_ratio: float


def _union_refinement(m: ModelSpec, m2: ModelSpec) -> np.ndarray:
    return np.unique(np.concatenate((m.breaks, m2.breaks)))


def pair_scale_constants(m: ModelSpec, m2: ModelSpec, density: Density,
                         n: int) -> tuple[float, float]:
    """(e, v2) for the sum space of two models of the same basis type."""
    if m.basis != m2.basis:
        raise ValueError("pair diagnostics need models with the same basis type")
    if m.basis == "histogram":
        brk = _union_refinement(m, m2)
        widths = np.diff(brk)
        probs = density.cell_probabilities(brk)
        e = float(np.max(1.0 / widths)) / n
        v2 = float(np.max(probs * (1.0 - probs) / widths))
    else:
        d = max(m.dim, m2.dim)
        e = d / n
        v2 = float(np.sqrt(density.l2_norm_sq() * d))
    return e, v2


def risk_strata(risks: Sequence[float]) -> dict[int, int]:
    """Count models per integer risk stratum [k, k+1)."""
    counts: dict[int, int] = {}
    for r in risks:
        k = int(np.floor(r))
        counts[k] = counts.get(k, 0) + 1
    return counts


def log_margin(r1: float, r2: float, strata: dict[int, int], n: int,
               gamma: float) -> float:
    """ln(1+card[k]) + ln(1+card[k']) + ln((r+1)(r'+1)) + (ln n)^gamma."""
    c1 = strata.get(int(np.floor(r1)), 0)
    c2 = strata.get(int(np.floor(r2)), 0)
    return (np.log1p(c1) + np.log1p(c2)
            + np.log((r1 + 1.0) * (r2 + 1.0)) + np.log(n) ** gamma)


def pair_diagnostics(m: ModelSpec, m2: ModelSpec, density: Density, n: int,
                     gamma: float, collection: ModelCollection) -> PairDiagnostics:
    """Finite-n diagnostics for one model pair within its collection."""
    e_pair, v2_pair = pair_scale_constants(m, m2, density, n)
    table = {mm.id: exact_quantities(mm, density, n) for mm in collection}
    risks = [q.risk for q in table.values()]
    strata = risk_strata(risks)
    r1, r2 = table[m.id].risk, table[m2.id].risk
    lng = log_margin(r1, r2, strata, n, gamma)
    rmax = max(r1, r2)
    v_ratio_sq = (v2_pair / rmax) ** 2 * lng ** 2 if rmax > 0 else np.inf
    e_ratio = (e_pair / rmax) * lng ** 2 if rmax > 0 else np.inf
    best = min(risks)
    istar = int(np.argmax([q.d_exact for q in table.values()]))
    qstar = list(table.values())[istar]
    d_star = qstar.d_exact
    risk_ratio = best / d_star if d_star > 0 else np.inf
    bias_ratio = n * qstar.bias_sq / d_star if d_star > 0 else np.inf
    return PairDiagnostics(
        e_pair=e_pair,
        v2_pair=v2_pair,
        log_margin=lng,
        v_ratio_sq=v_ratio_sq,
        e_ratio=e_ratio,
        risk_ratio=risk_ratio,
        bias_ratio=bias_ratio,
    )
