"""End-to-end experiments: oracle-ratio simulations and penalty sweeps.

A replication draws one sample, fits every model of a collection once, and
then applies each selection method to the same fits; its score is the
oracle ratio, the exact loss of the selected estimator divided by the
smallest exact loss in the collection.  Reports aggregate mean, median and
0.95-quantile (nearest-rank) over replications.

Two evaluation engines are provided.  The generic one loops over the
models of any collection.  The two-block engine exploits the product
structure of that family: every per-model statistic splits into a left
part depending on (k, j1) and a right part depending on (k, j2), so the
argmin over roughly n^3/6 models costs O(n^2) per replication, and the
full slope path is assembled from per-block lower envelopes.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .densities import Density, PowerLaw, Sample
from .fitting import fit_model, p_term
from .models import (ExactModelQuantities, ModelCollection, build_collection,
                     exact_quantities)
from .penalties import resampling_dmw
from .rng import RngStream
from .slope import (LOG_THRESHOLD, MAX_JUMP, NoJumpError, PathSegment,
                    SlopePath, detect_kmin, lower_envelope)

__all__ = [
    "Method",
    "parse_method",
    "MethodOutcome",
    "SimulationReport",
    "SweepReport",
    "CollectionLab",
    "TwoBlockLab",
    "make_lab",
    "summarize",
    "oracle_ratio",
    "run_example",
    "penalty_sweep",
]

ORACLE_EPS = 1e-15


# ---------------------------------------------------------------------------
# Methods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Method:
    """A selection method: slope on dims, resampling, slope on dmw, or the
    deterministic K * D / n penalty (needs the true density)."""

    kind: str                  # slope-dim | resampling | resampling-slope | ideal
    k_const: float | None = None

    @property
    def name(self) -> str:
        if self.kind == "ideal":
            return f"ideal:{self.k_const:g}"
        return self.kind


def parse_method(spec: str) -> Method:
    spec = spec.strip().lower()
    if spec in ("slope-dim", "resampling", "resampling-slope"):
        return Method(kind=spec)
    if spec.startswith("ideal:"):
        return Method(kind="ideal", k_const=float(spec.split(":", 1)[1]))
    if spec == "ideal":
        return Method(kind="ideal", k_const=2.0)
    raise ValueError(f"unknown method {spec!r}")


DEFAULT_METHODS = (Method("slope-dim"), Method("resampling"),
                   Method("resampling-slope"))


@dataclass(frozen=True)
class MethodOutcome:
    """One method's result on one replication."""

    method: str
    ratio: float
    selected: str
    flag: str | None = None


# ---------------------------------------------------------------------------
# Generic per-collection engine
# ---------------------------------------------------------------------------

class CollectionLab:
    """Per-model exact tables plus a per-sample evaluator (generic loop).

    Nested Fourier models share coefficients, so for a Fourier collection
    the population table is built once from the largest model and each
    sample is fitted once, per-model statistics falling out of prefix sums.
    """

    def __init__(self, collection: ModelCollection, density: Density,
                 table: dict[str, ExactModelQuantities] | None = None):
        self.collection = collection
        self.density = density
        self.n = collection.n
        self.kind = collection.kind
        if table is not None:
            self.table = table
        elif collection.kind == "fourier":
            self.table = self._fourier_table()
        else:
            self.table = {m.id: exact_quantities(m, density, self.n)
                          for m in collection}
        self.ids = [m.id for m in collection]
        self.dims = np.array([m.dim for m in collection], dtype=float)
        self.d_exact = np.array([self.table[i].d_exact for i in self.ids])

    def _fourier_table(self) -> dict[str, ExactModelQuantities]:
        big = max(self.collection, key=lambda m: m.dim)
        full = exact_quantities(big, self.density, self.n)
        s_norm = self.density.l2_norm_sq()
        table = {}
        for m in self.collection:
            pop = full.pop_coeffs[:m.dim]
            sm = float(np.sum(pop ** 2))
            bias = max(s_norm - sm, 0.0)
            d_ex = max(m.dim - sm, 0.0)
            table[m.id] = ExactModelQuantities(
                model_id=m.id, n=self.n, pop_coeffs=pop, sm_norm_sq=sm,
                bias_sq=bias, d_exact=d_ex, risk=self.n * bias + d_ex)
        return table

    def evaluate(self, sample: Sample):
        contrasts = np.empty(len(self.ids))
        dmws = np.empty(len(self.ids))
        losses = np.empty(len(self.ids))
        if self.kind == "fourier":
            self._evaluate_fourier(sample, contrasts, dmws, losses)
        else:
            for i, model in enumerate(self.collection):
                fit = fit_model(model, sample)
                contrasts[i] = fit.emp_contrast
                dmws[i] = resampling_dmw(fit, sample) if sample.n >= 2 else np.nan
                q = self.table[model.id]
                losses[i] = q.bias_sq + p_term(fit, q)
        return _Evaluation(ids=self.ids, dims=self.dims, contrasts=contrasts,
                           dmws=dmws, losses=losses, d_exact=self.d_exact,
                           n=self.n)

    def _evaluate_fourier(self, sample: Sample, contrasts, dmws, losses) -> None:
        from .models import fourier_basis_matrix
        big = max(self.collection, key=lambda m: m.dim)
        mat = fourier_basis_matrix(big.j, sample.points)
        coeffs = mat.mean(axis=0)
        mean_sq = (mat ** 2).mean(axis=0)
        pop = self.table[big.id].pop_coeffs
        n = sample.n
        cum_sq = np.cumsum(coeffs ** 2)
        cum_var = np.cumsum(mean_sq - coeffs ** 2)
        cum_p = np.cumsum((coeffs - pop) ** 2)
        for i, model in enumerate(self.collection):
            d = model.dim
            contrasts[i] = -cum_sq[d - 1]
            dmws[i] = n / (n - 1.0) * cum_var[d - 1] if n >= 2 else np.nan
            losses[i] = self.table[model.id].bias_sq + cum_p[d - 1]


@dataclass
class _Evaluation:
    """All per-model statistics of one replication."""

    ids: list[str]
    dims: np.ndarray
    contrasts: np.ndarray
    dmws: np.ndarray
    losses: np.ndarray
    d_exact: np.ndarray
    n: int

    def argmin_criterion(self, penalties: np.ndarray) -> int:
        crit = self.contrasts + penalties
        order = np.lexsort((self.dims, crit))
        return int(order[0])

    def outcome(self, method: Method, idx: int, flag: str | None) -> MethodOutcome:
        oracle = float(self.losses.min())
        if oracle <= ORACLE_EPS:
            return MethodOutcome(method=method.name, ratio=float("nan"),
                                 selected=self.ids[idx], flag="degenerate-oracle")
        return MethodOutcome(method=method.name,
                             ratio=float(self.losses[idx] / oracle),
                             selected=self.ids[idx], flag=flag)

    def apply(self, method: Method) -> MethodOutcome:
        if method.kind == "resampling":
            idx = self.argmin_criterion(2.0 * self.dmws / self.n)
            return self.outcome(method, idx, None)
        if method.kind == "ideal":
            idx = self.argmin_criterion(method.k_const * self.d_exact / self.n)
            return self.outcome(method, idx, None)
        if method.kind == "slope-dim":
            deltas = self.dims
        elif method.kind == "resampling-slope":
            deltas = self.dmws
        else:
            raise ValueError(f"unknown method {method.kind!r}")
        idx, flag = _slope_pick(deltas, self.contrasts, self.n)
        return self.outcome(method, idx, flag)


def _slope_pick(deltas: np.ndarray, contrasts: np.ndarray,
                n: int) -> tuple[int, str | None]:
    """Index selected by the slope algorithm over arrays of lines."""
    hull, starts = lower_envelope(deltas, contrasts)
    segs = [(starts[p], hull[p]) for p in range(len(hull))]
    flag = None
    if len(segs) < 2:
        return segs[0][1], "no-jump-fallback"
    hull_deltas = deltas[hull]
    drops = -np.diff(hull_deltas)
    k_min = segs[int(np.argmax(drops)) + 1][0]
    k_sel = 2.0 * k_min
    pos = int(np.searchsorted(starts, k_sel, side="right")) - 1
    return hull[pos], flag


# ---------------------------------------------------------------------------
# Fast two-block engine
# ---------------------------------------------------------------------------

class TwoBlockLab:
    """Separable evaluation of the two-block family.

    For a model (k, j1, j2) every statistic is a sum of a left term indexed
    by (k, j1) and a right term indexed by (k, j2); all left (right) terms
    for one k are computed at once from flattened per-cell tables.
    """

    def __init__(self, n: int, density: Density):
        if n < 2:
            raise ValueError("the two-block family needs n >= 2")
        self.n = n
        self.kind = "two-block"
        self.density = density
        self.s_norm = density.l2_norm_sq()
        self.cuts = np.arange(1, n) / n
        fcut = np.asarray(density.cdf(self.cuts))
        self.left = []            # per k: (starts, pop_flat, counts_of_js, d_vec)
        self.right = []
        self.d_max = 0.0
        for kk, k in enumerate(range(1, n)):
            c = self.cuts[kk]
            self.left.append(self._block_tables(0.0, c, k, fcut[kk]))
            self.right.append(self._block_tables(c, 1.0, n - k, 1.0 - fcut[kk]))
            self.d_max = max(self.d_max,
                             self.left[-1][3].max() + self.right[-1][3].max())

    def _block_tables(self, lo: float, hi: float, jmax: int, mass: float):
        """Flat cell-probability tables for j = 1..jmax cells on [lo, hi)."""
        js = np.arange(1, jmax + 1)
        starts = np.concatenate(([0], np.cumsum(js)[:-1]))
        pops = []
        for j in js:
            edges = np.clip(lo + (hi - lo) * np.arange(j + 1) / j, 0.0, 1.0)
            edges[0], edges[-1] = lo, hi  # pin float tails of the endpoints
            pops.append(np.diff(np.asarray(self.density.cdf(edges))))
        pop = np.concatenate(pops)
        sumsq = np.add.reduceat(pop * pop, starts)
        width_inv = js / (hi - lo)           # 1/cell width per j
        d_vec = width_inv * (mass - sumsq)
        return starts, pop, js, d_vec

    def evaluate(self, sample: Sample):
        n = self.n
        pts = sample.points if sample.sorted_flag else np.sort(sample.points)
        n_left = np.searchsorted(pts, self.cuts, side="left")
        per_k = []
        for kk, k in enumerate(range(1, n)):
            c = self.cuts[kk]
            left = self._block_stats(self.left[kk], pts[:n_left[kk]],
                                     0.0, c, k)
            right = self._block_stats(self.right[kk], pts[n_left[kk]:],
                                      c, 1.0, n - k)
            per_k.append((left, right))
        return _TwoBlockEvaluation(lab=self, per_k=per_k)

    def _block_stats(self, tables, x: np.ndarray, lo: float, hi: float,
                     jmax: int):
        """A (sum sq coeffs), V (variance part of dmw), L (loss part), D."""
        starts, pop, js, d_vec = tables
        n = self.n
        total = starts[-1] + jmax
        if x.size:
            y = (x - lo) / (hi - lo)
            idx = (y[:, None] * js[None, :]).astype(np.int64)
            np.minimum(idx, js[None, :] - 1, out=idx)
            flat = (idx + starts[None, :]).ravel()
            counts = np.bincount(flat, minlength=total).astype(float)
        else:
            counts = np.zeros(total)
        t_sq = np.add.reduceat(counts * counts, starts)
        w_pop = np.add.reduceat(counts * pop, starts)
        width_inv = js / (hi - lo)
        a = width_inv * t_sq / (n * n)
        v = width_inv * (x.size - t_sq / n) / n
        loss_part = a - 2.0 * width_inv * w_pop / n
        return a, v, loss_part, d_vec


@dataclass
class _TwoBlockEvaluation:
    lab: TwoBlockLab
    per_k: list

    def _model_id(self, kk: int, i1: int, i2: int) -> str:
        return f"two-block:k={kk + 1},j1={i1 + 1},j2={i2 + 1}"

    def _loss(self, kk: int, i1: int, i2: int) -> float:
        left, right = self.per_k[kk]
        return self.lab.s_norm + left[2][i1] + right[2][i2]

    def oracle_loss(self) -> float:
        best = np.inf
        for left, right in self.per_k:
            best = min(best, left[2].min() + right[2].min())
        return self.lab.s_norm + best

    def _argmin_separable(self, pen_scale_left, pen_scale_right):
        """Best (k, j1, j2) for criterion -A + penalty with separable
        penalties given per block as arrays."""
        best = (np.inf, -1, -1, -1)
        for kk, (left, right) in enumerate(self.per_k):
            g1 = -left[0] + pen_scale_left(kk, left)
            g2 = -right[0] + pen_scale_right(kk, right)
            i1 = int(np.argmin(g1))
            i2 = int(np.argmin(g2))
            crit = g1[i1] + g2[i2]
            if crit < best[0]:
                best = (crit, kk, i1, i2)
        return best

    def apply(self, method: Method) -> MethodOutcome:
        n = self.lab.n
        oracle = self.oracle_loss()
        if oracle <= ORACLE_EPS:
            return MethodOutcome(method=method.name, ratio=float("nan"),
                                 selected="", flag="degenerate-oracle")
        if method.kind == "resampling":
            # pen = 2 dmw / n with dmw = n/(n-1) (v_left + v_right)
            scale = 2.0 / (n - 1.0)
            crit, kk, i1, i2 = self._argmin_separable(
                lambda _, blk: scale * blk[1],
                lambda _, blk: scale * blk[1])
            flag = None
        elif method.kind == "ideal":
            kc = method.k_const / n
            crit, kk, i1, i2 = self._argmin_separable(
                lambda _, blk: kc * blk[3],
                lambda _, blk: kc * blk[3])
            flag = None
        elif method.kind in ("slope-dim", "resampling-slope"):
            kk, i1, i2, flag = self._slope_pick(method.kind)
        else:
            raise ValueError(f"unknown method {method.kind!r}")
        loss = self._loss(kk, i1, i2)
        return MethodOutcome(method=method.name, ratio=loss / oracle,
                             selected=self._model_id(kk, i1, i2), flag=flag)

    def _slope_pick(self, kind: str):
        n = self.lab.n
        lines_s: list[float] = []
        lines_c: list[float] = []
        tags: list[tuple[int, int, int]] = []
        delta_max = 0.0
        for kk, (left, right) in enumerate(self.per_k):
            if kind == "slope-dim":
                s1 = np.arange(1, left[0].size + 1, dtype=float)
                s2 = np.arange(1, right[0].size + 1, dtype=float)
            else:
                # per-block share of dmw = n/(n-1) (v_left + v_right)
                s1 = left[1] * n / (n - 1.0)
                s2 = right[1] * n / (n - 1.0)
            delta_max = max(delta_max, float(s1.max() + s2.max()))
            h1, st1 = lower_envelope(s1, -left[0])
            h2, st2 = lower_envelope(s2, -right[0])
            a = b = 0
            while True:
                i1, i2 = h1[a], h2[b]
                lines_s.append(float(s1[i1] + s2[i2]))
                lines_c.append(float(-left[0][i1] - right[0][i2]))
                tags.append((kk, i1, i2))
                nxt_a = st1[a + 1] if a + 1 < len(st1) else np.inf
                nxt_b = st2[b + 1] if b + 1 < len(st2) else np.inf
                nxt = min(nxt_a, nxt_b)
                if not np.isfinite(nxt):
                    break
                if nxt_a == nxt:
                    a += 1
                if nxt_b == nxt:
                    b += 1
        hull, starts = lower_envelope(np.asarray(lines_s), np.asarray(lines_c))
        segs = tuple(PathSegment(
            k_lo=starts[p],
            k_hi=starts[p + 1] if p + 1 < len(hull) else np.inf,
            model_id=self._model_id(*tags[hull[p]]),
            delta=lines_s[hull[p]], contrast=lines_c[hull[p]])
            for p in range(len(hull)))
        path = SlopePath(segments=segs)
        flag = None
        try:
            k_min = detect_kmin(path, MAX_JUMP, n)
        except NoJumpError:
            flag = "no-jump-fallback"
            k_min = 0.0 if len(segs) == 1 else detect_kmin(
                path, LOG_THRESHOLD, n, delta_max=delta_max)
        pos = int(np.searchsorted(np.array([s.k_lo for s in segs]),
                                  2.0 * k_min, side="right")) - 1
        kk, i1, i2 = tags[hull[pos]]
        return kk, i1, i2, flag


def make_lab(kind: str, n: int, density: Density):
    """Evaluation engine for a collection kind (fast path for two-block)."""
    if kind == "two-block":
        return TwoBlockLab(n, density)
    return CollectionLab(build_collection(kind, n), density)


# ---------------------------------------------------------------------------
# Oracle ratios and reports
# ---------------------------------------------------------------------------

def oracle_ratio(sample: Sample, collection: ModelCollection, method: Method,
                 density: Density,
                 table: dict[str, ExactModelQuantities] | None = None) -> float:
    """Exact loss of the method's pick divided by the collection minimum."""
    lab = CollectionLab(collection, density, table=table)
    outcome = lab.evaluate(sample).apply(method)
    if outcome.flag == "degenerate-oracle":
        raise ArithmeticError("oracle loss is numerically zero")
    return outcome.ratio


def summarize(ratios) -> tuple[float, float, float]:
    """Mean, median and 0.95-quantile (nearest-rank order statistics)."""
    vals = np.sort(np.asarray(ratios, dtype=float))
    if vals.size == 0:
        raise ValueError("nothing to summarize")
    med = vals[int(np.ceil(0.5 * vals.size)) - 1]
    q95 = vals[int(np.ceil(0.95 * vals.size)) - 1]
    return float(vals.mean()), float(med), float(q95)


@dataclass(frozen=True)
class SimulationReport:
    """Oracle-ratio statistics per method over N replications."""

    collection: str
    n: int
    reps: int
    seed: int
    methods: tuple[str, ...]
    ratios: dict[str, np.ndarray]
    selected: dict[str, list[str]]
    flags: dict[str, list[str | None]]

    def stats(self, method: str) -> tuple[float, float, float]:
        return summarize(self.ratios[method])

    def flagged(self, method: str) -> int:
        return sum(1 for f in self.flags[method] if f)


@dataclass(frozen=True)
class SweepReport:
    """Selected-variance ratios along a penalty-constant grid."""

    collection: str
    n: int
    reps: int
    seed: int
    k_grid: np.ndarray
    mean_d_ratio: np.ndarray
    mean_oracle_ratio: np.ndarray


# ---------------------------------------------------------------------------
# Replication drivers
# ---------------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(lab, methods, seed):
    _WORKER["lab"] = lab
    _WORKER["methods"] = methods
    _WORKER["seed"] = seed


def _one_rep(rep: int) -> list[MethodOutcome]:
    lab = _WORKER["lab"]
    sample = lab.density.sample(lab.n, RngStream(_WORKER["seed"], rep, "data"))
    ev = lab.evaluate(sample)
    return [ev.apply(m) for m in _WORKER["methods"]]


def _run_reps(lab, methods, seed: int, reps: int, threads: int):
    if threads <= 1:
        _init_worker(lab, methods, seed)
        return [_one_rep(r) for r in range(reps)]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx,
                             initializer=_init_worker,
                             initargs=(lab, methods, seed)) as ex:
        return list(ex.map(_one_rep, range(reps),
                           chunksize=max(1, reps // (threads * 8))))


def run_example(example: int, n: int, reps: int,
                methods=DEFAULT_METHODS, seed: int = 0,
                density: Density | None = None,
                threads: int = 1) -> SimulationReport:
    """The two benchmark experiments: regular histograms (example 1) and
    the two-block family (example 2), all methods sharing each sample."""
    if example not in (1, 2):
        raise ValueError("example must be 1 or 2")
    if n < 2:
        raise ValueError("examples need n >= 2")
    density = density if density is not None else PowerLaw()
    methods = tuple(methods)
    lab = make_lab("regular-hist" if example == 1 else "two-block", n, density)
    rows = _run_reps(lab, methods, seed, reps, threads)
    ratios = {m.name: np.array([row[i].ratio for row in rows])
              for i, m in enumerate(methods)}
    selected = {m.name: [row[i].selected for row in rows]
                for i, m in enumerate(methods)}
    flags = {m.name: [row[i].flag for row in rows]
             for i, m in enumerate(methods)}
    return SimulationReport(collection=lab.kind, n=n, reps=reps, seed=seed,
                            methods=tuple(m.name for m in methods),
                            ratios=ratios, selected=selected, flags=flags)


def penalty_sweep(kind: str, n: int, k_grid, reps: int, seed: int = 0,
                  density: Density | None = None,
                  threads: int = 1) -> SweepReport:
    """Selection with the exact penalty K * D / n along a K grid.

    Reports, per K, the mean ratio of the selected model's variance number
    to the collection maximum, and the mean oracle ratio.
    """
    density = density if density is not None else PowerLaw()
    k_grid = np.asarray(sorted(k_grid), dtype=float)
    if k_grid.size == 0 or np.any(np.diff(k_grid) <= 0):
        raise ValueError("K grid must be non-empty and strictly increasing")
    methods = tuple(Method("ideal", k_const=float(k)) for k in k_grid)
    lab = make_lab(kind, n, density)
    rows = _run_reps(lab, methods, seed, reps, threads)
    if kind == "two-block":
        d_by_model = None
        d_max = lab.d_max
    else:
        d_by_model = {mid: lab.table[mid].d_exact for mid in lab.ids}
        d_max = max(d_by_model.values())
    d_ratio = np.empty((reps, k_grid.size))
    oracle = np.empty((reps, k_grid.size))
    for r, row in enumerate(rows):
        for i, out in enumerate(row):
            oracle[r, i] = out.ratio
            if d_by_model is None:
                d_sel = _two_block_d(lab, out.selected)
            else:
                d_sel = d_by_model[out.selected]
            d_ratio[r, i] = d_sel / d_max
    return SweepReport(collection=kind, n=n, reps=reps, seed=seed,
                       k_grid=k_grid, mean_d_ratio=d_ratio.mean(axis=0),
                       mean_oracle_ratio=oracle.mean(axis=0))


def _two_block_d(lab: TwoBlockLab, model_id: str) -> float:
    body = model_id.split(":", 1)[1]
    parts = dict(p.split("=") for p in body.split(","))
    kk = int(parts["k"]) - 1
    return float(lab.left[kk][3][int(parts["j1"]) - 1]
                 + lab.right[kk][3][int(parts["j2"]) - 1])
