"""Discrete Littlewood-Paley calculus on the unit torus.

Dyadic blocks are radial Fourier multipliers evaluated at the integer
wavenumber ``|k|``. Block ``j = -1`` is the low-pass ``chi``; block ``j >= 0``
is ``phi(2^-j |k|)``. The raw profiles are built from the ``exp(-1/x)``
mollifier with the supports ``supp chi in {|k| <= 4/3}`` and
``supp phi in {3/4 <= |k| <= 8/3}``, then divided by their sum so that the
partition of unity holds to rounding on every grid wavenumber.

Weighted norms use the convention that block ``-1`` carries weight 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import ShapeError
from .physics import f0_prime
from .spectral import (
    CUBIC,
    QUADRATIC,
    SpectralField,
    TorusGrid,
    _ifft,
    dealiased_product,
    from_padded_physical,
    padded_physical,
    random_field,
)

LOW_OUTER = 4.0 / 3.0
ANNULUS_INNER = 3.0 / 4.0
ANNULUS_FLAT_END = 2.0
ANNULUS_OUTER = 8.0 / 3.0

NORM_SPACES = ("sobolev_Hs", "besov_B_s_2_inf", "holder_C_alpha", "lebesgue_Linf")
LEMMAS = ("bernstein_6_1", "product_6_2", "composition_6_3", "commutator_6_4")


def _mollifier(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=np.float64)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=np.float64)
    a = _mollifier(x)
    b = _mollifier(1.0 - x)
    return a / (a + b)


def raw_low(r: np.ndarray) -> np.ndarray:
    return 1.0 - smooth_step((r - ANNULUS_INNER) / (LOW_OUTER - ANNULUS_INNER))


def raw_annulus(r: np.ndarray) -> np.ndarray:
    rise = smooth_step((r - ANNULUS_INNER) / (LOW_OUTER - ANNULUS_INNER))
    fall = 1.0 - smooth_step((r - ANNULUS_FLAT_END) / (ANNULUS_OUTER - ANNULUS_FLAT_END))
    return rise * fall


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Normalised block multipliers for one grid.

    ``weights[j + 1]`` holds the multiplier of block ``j`` for
    ``j = -1, ..., j_max``.
    """

    grid: TorusGrid
    j_max: int
    weights: np.ndarray

    @property
    def chi_hat(self) -> np.ndarray:
        return self.weights[0]

    @property
    def phi_hat(self) -> np.ndarray:
        return self.weights[1:]

    @property
    def indices(self) -> range:
        return range(-1, self.j_max + 1)

    def weight(self, j: int) -> np.ndarray:
        if not -1 <= j <= self.j_max:
            raise ValueError(f"block index {j} outside [-1, {self.j_max}]")
        return self.weights[j + 1]

    def nonempty(self) -> list[int]:
        return [j for j in self.indices if np.any(self.weight(j) > 0)]


@lru_cache(maxsize=32)
def build_partition(grid: TorusGrid) -> DyadicPartition:
    j_max = math.ceil(math.log2(grid.n_modes / 2)) + 1
    r = grid.k_norm
    raw = [raw_low(r)] + [raw_annulus(r / 2.0**j) for j in range(j_max + 1)]
    raw = np.array(raw)
    total = raw.sum(axis=0)
    if np.any(total <= 0):
        raise AssertionError("dyadic blocks leave a gap on the grid")
    w = raw / total
    w.setflags(write=False)
    return DyadicPartition(grid, j_max, w)


def dyadic_block(f: SpectralField, j: int, part: DyadicPartition) -> SpectralField:
    """``Delta_j f``."""
    return SpectralField(f.grid, spec=f.spec * part.weight(j))


def low_pass(f: SpectralField, j: int, part: DyadicPartition) -> SpectralField:
    """``S_j f = sum_{k=-1}^{j-1} Delta_k f`` (``S_j = 0`` for ``j <= -1``)."""
    if j <= -1:
        return SpectralField(f.grid, spec=np.zeros_like(f.spec))
    top = min(j, part.j_max + 1)
    w = part.weights[:top + 1].sum(axis=0)
    return SpectralField(f.grid, spec=f.spec * w)


def _block_scale(j: int, s: float) -> float:
    return 1.0 if j < 0 else 2.0 ** (j * s)


def block_l2_norms(f: SpectralField, part: DyadicPartition) -> np.ndarray:
    """``||Delta_j f||_{L2}`` for ``j = -1..j_max`` via Parseval."""
    power = np.abs(f.spec) ** 2
    if f.is_vector:
        power = power.sum(axis=0)
    w2 = part.weights.reshape(len(part.weights), -1) ** 2
    return np.sqrt(w2 @ power.ravel())


def block_linf_norms(f: SpectralField, part: DyadicPartition) -> np.ndarray:
    d = f.grid.dim
    out = np.empty(part.j_max + 2)
    for i, j in enumerate(part.indices):
        vals = _ifft(f.spec * part.weight(j), d).real
        if f.is_vector:
            out[i] = math.sqrt(float(np.max(np.sum(vals**2, axis=0))))
        else:
            out[i] = float(np.max(np.abs(vals)))
    return out


@dataclass(frozen=True)
class NormSpec:
    space: str
    exponent: float = 0.0

    def __post_init__(self):
        if self.space not in NORM_SPACES:
            raise ValueError(f"space must be one of {NORM_SPACES}")
        if self.space == "holder_C_alpha" and not 0 < self.exponent < 1:
            raise ValueError("Holder exponent must lie in (0, 1)")


def norm(f: SpectralField, spec: NormSpec, part: DyadicPartition) -> float:
    """``H^s``, ``B^s_{2,inf}``, ``C^alpha`` or ``L^inf`` norm of ``f``."""
    if spec.space == "lebesgue_Linf":
        return f.max_abs()
    s = spec.exponent
    scales = np.array([_block_scale(j, s) for j in part.indices])
    if spec.space == "sobolev_Hs":
        return float(np.sqrt(np.sum((scales * block_l2_norms(f, part)) ** 2)))
    if spec.space == "besov_B_s_2_inf":
        return float(np.max(scales * block_l2_norms(f, part)))
    return float(np.max(scales * block_linf_norms(f, part)))


def sobolev_norm(f: SpectralField, s: float, part: DyadicPartition | None = None) -> float:
    return norm(f, NormSpec("sobolev_Hs", s), part or build_partition(f.grid))


def holder_norm(f: SpectralField, alpha: float, part: DyadicPartition | None = None) -> float:
    return norm(f, NormSpec("holder_C_alpha", alpha), part or build_partition(f.grid))


def bony_decompose(f: SpectralField, g: SpectralField, part: DyadicPartition):
    """Split ``fg`` into ``(T_f g, T_g f, R(f, g))``.

    ``T_f g = sum_j S_{j-1} f Delta_j g`` and
    ``R(f, g) = sum_{|j - j'| <= 1} Delta_j f Delta_{j'} g``; all products are
    formed on the 3/2-padded grid, so the three parts add up to the dealiased
    product.
    """
    if f.grid != g.grid or f.is_vector or g.is_vector:
        raise ShapeError("bony_decompose needs two scalar fields on one grid")
    grid = f.grid
    d, n = grid.dim, grid.n_modes
    m = QUADRATIC.padded_size(n)
    fb = np.array([padded_physical(f.spec * w, d, m) for w in part.weights])
    gb = np.array([padded_physical(g.spec * w, d, m) for w in part.weights])
    nb = len(part.weights)
    # S_{j-1} at block position i (j = i - 1) sums blocks 0..i-2
    fs = np.concatenate([np.zeros((1,) + fb.shape[1:]), np.cumsum(fb, axis=0)[:-1]])
    gs = np.concatenate([np.zeros((1,) + gb.shape[1:]), np.cumsum(gb, axis=0)[:-1]])
    tf_g = np.zeros(fb.shape[1:])
    tg_f = np.zeros(fb.shape[1:])
    rem = np.zeros(fb.shape[1:])
    for i in range(nb):
        if i >= 1:
            tf_g += fs[i - 1] * gb[i]
            tg_f += gs[i - 1] * fb[i]
        for ip in (i - 1, i, i + 1):
            if 0 <= ip < nb:
                rem += fb[i] * gb[ip]
    wrap = lambda v: SpectralField(grid, spec=from_padded_physical(v, d, n))  # noqa: E731
    return wrap(tf_g), wrap(tg_f), wrap(rem)


def fractional_multiplier(f: SpectralField, s: float) -> SpectralField:
    """``<D>^s f`` with symbol ``(1 + |k|^2)^(s/2)`` (integer ``k``)."""
    sym = (1.0 + f.grid.k_squared.astype(np.float64)) ** (0.5 * s)
    return SpectralField(f.grid, spec=f.spec * sym)


# ---------------------------------------------------------------------------
# Empirical inequality harnesses.


@dataclass(frozen=True)
class EnsembleSpec:
    """Random-field ensemble: amplitude ``(1+|k|)^slope`` up to ``|k| <= band``.

    ``band=None`` fills the dealias-safe range ``N/3`` of each grid.
    """

    count: int = 100
    seed: int = 0
    slope: float = -3.0
    band: int | None = None


@dataclass
class HarnessReport:
    lemma: str
    s: float
    n_modes: int
    seed: int
    ratios: np.ndarray = field(repr=False)

    @property
    def samples(self) -> int:
        return int(self.ratios.size)

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratios))


def bernstein_ratio(f: SpectralField, part: DyadicPartition, p: float = 2,
                    q: float = 2) -> float:
    """``max_j ||grad Delta_j f||_q / (2^{j + d j (1/p - 1/q)} ||Delta_j f||_p)`` over ``j >= 0``."""
    d = f.grid.dim
    best = 0.0
    for j in range(0, part.j_max + 1):
        w = part.weight(j)
        if not np.any(w > 0):
            continue
        blk = SpectralField(f.grid, spec=f.spec * w)
        grad = SpectralField(f.grid, spec=f.grid.grad_symbol * blk.spec)
        den_norm = blk.l2_norm() if p == 2 else blk.max_abs()
        if den_norm == 0.0:
            continue
        num = grad.l2_norm() if q == 2 else grad.max_abs()
        expo = j + d * j * ((1.0 / p if p != math.inf else 0.0) - (1.0 / q if q != math.inf else 0.0))
        best = max(best, num / (2.0**expo * den_norm))
    return best


def _ensemble_fields(grid: TorusGrid, ens: EnsembleSpec):
    rng = np.random.default_rng(ens.seed)
    for _ in range(ens.count):
        f = random_field(grid, rng, ens.slope, ens.band)
        g = random_field(grid, rng, ens.slope, ens.band)
        yield f * (1.0 / f.max_abs()), g * (1.0 / g.max_abs())


def lemma_ratio(lemma: str, f: SpectralField, g: SpectralField, s: float,
                part: DyadicPartition) -> float:
    """Left side over right side (constant omitted) of one harmonic-analysis inequality."""
    hs = lambda h, t: sobolev_norm(h, t, part)  # noqa: E731
    if lemma == "bernstein_6_1":
        return bernstein_ratio(f, part)
    if lemma == "product_6_2":
        fg = dealiased_product([f, g], QUADRATIC)
        return hs(fg, s) / (f.max_abs() * hs(g, s) + hs(f, s) * g.max_abs())
    if lemma == "composition_6_3":
        d, n = f.grid.dim, f.grid.n_modes
        m = CUBIC.padded_size(n)
        comp = SpectralField(f.grid, spec=from_padded_physical(
            f0_prime(padded_physical(f.spec, d, m)), d, n))
        return hs(comp, s) / ((1.0 + f.max_abs()) ** (math.floor(s) + 1) * hs(f, s))
    if lemma == "commutator_6_4":
        lhs = dealiased_product([f, g], QUADRATIC)
        lhs = fractional_multiplier(lhs, s) - dealiased_product(
            [f, fractional_multiplier(g, s)], QUADRATIC)
        rhs = hs(f, s + 2) * g.l2_norm() + hs(f, 2.0) * hs(g, s - 0.5)
        return lhs.l2_norm() / rhs if rhs > 0 else 0.0
    raise ValueError(f"unknown lemma {lemma!r}; choose from {LEMMAS}")


def inequality_harness(lemma: str, ensemble: EnsembleSpec, grid: TorusGrid,
                       s: float = 1.5) -> HarnessReport:
    """Evaluate one lemma's ratio on every ensemble member."""
    if lemma not in LEMMAS:
        raise ValueError(f"unknown lemma {lemma!r}; choose from {LEMMAS}")
    part = build_partition(grid)
    ratios = np.array([lemma_ratio(lemma, f, g, s, part)
                       for f, g in _ensemble_fields(grid, ensemble)])
    return HarnessReport(lemma, s, grid.n_modes, ensemble.seed, ratios)


@dataclass
class RefinementVerdict:
    reports: list[HarnessReport]
    max_ratio_spread: float
    slope: float
    slope_lower_95: float
    monotone_growth: bool

    @property
    def bounded(self) -> bool:
        """No statistically significant growth and no monotone rise of the max ratio."""
        return self.slope_lower_95 <= 0.0 and not self.monotone_growth


def refinement_study(lemma: str, ensemble: EnsembleSpec, n_values: Sequence[int] = (32, 64, 128),
                     dim: int = 2, s: float = 1.5) -> RefinementVerdict:
    """Run a harness across grid sizes and test the ratios for growth in ``log2 N``.

    The slope comes from an ordinary least-squares fit of every sample ratio
    against ``log2 N``; ``slope_lower_95`` is its one-sided 95% lower
    confidence bound.
    """
    reports = [inequality_harness(lemma, ensemble, TorusGrid(dim, n), s) for n in n_values]
    x = np.concatenate([np.full(r.samples, math.log2(r.n_modes)) for r in reports])
    y = np.concatenate([r.ratios for r in reports])
    fit = stats.linregress(x, y)
    tcrit = stats.t.ppf(0.95, x.size - 2)
    maxes = [r.max_ratio for r in reports]
    spread = (max(maxes) - min(maxes)) / min(maxes)
    growth = all(b > a for a, b in zip(maxes, maxes[1:]))
    return RefinementVerdict(reports, spread, float(fit.slope),
                             float(fit.slope - tcrit * fit.stderr), growth)


HARNESS_COLUMNS = ("lemma", "s", "N", "samples", "max_ratio", "median_ratio", "seed")


def harness_csv_rows(reports: Iterable[HarnessReport]) -> list[str]:
    rows = [",".join(HARNESS_COLUMNS)]
    for r in reports:
        rows.append(f"{r.lemma},{r.s:.17g},{r.n_modes},{r.samples},"
                    f"{r.max_ratio:.17g},{r.median_ratio:.17g},{r.seed}")
    return rows
