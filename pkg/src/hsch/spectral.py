"""Periodic grid, Fourier transforms and spectral operators on the unit torus.

Conventions
-----------
The torus is ``[0, 1)^d`` with ``N`` equispaced samples per axis. A field is
expanded as ``f(x) = sum_k f_k exp(2*pi*i k.x)`` with integer wavenumbers
``-N/2 <= k_i < N/2``. Coefficients are stored in FFT order and use the
"forward" normalisation, so ``spec[0] == mean(phys)`` and Parseval reads
``mean(phys**2) == sum(|spec|**2)``.

Odd-order operators (``grad``, ``div``) annihilate the Nyquist index
``k_i = -N/2`` of the differentiated axis; it is the only choice that keeps
real fields real. Even-order operators apply the exact symbol.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft

from .errors import DataError, ShapeError

__all__ = [
    "TorusGrid",
    "SpectralField",
    "DealiasRule",
    "to_spectral",
    "to_physical",
    "differential",
    "project_pn",
    "dealiased_product",
    "pad_spectrum",
    "truncate_spectrum",
    "random_field",
    "fft_workers",
]


def fft_workers() -> int:
    """Thread count for FFTs, read from ``HSCH_THREADS`` (0 or unset = all)."""
    raw = os.environ.get("HSCH_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return -1 if n <= 0 else n


def _fft(a: np.ndarray, d: int) -> np.ndarray:
    return scipy.fft.fftn(a, axes=tuple(range(-d, 0)), norm="forward", workers=fft_workers())


def _ifft(a: np.ndarray, d: int) -> np.ndarray:
    return scipy.fft.ifftn(a, axes=tuple(range(-d, 0)), norm="forward", workers=fft_workers())


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the unit torus ``T^d``.

    Args:
        dim: spatial dimension, 2 or 3.
        n_modes: samples per axis; even and at least 8.
    """

    dim: int = 2
    n_modes: int = 64

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ShapeError(f"dim must be 2 or 3, got {self.dim}")
        if self.n_modes < 8 or self.n_modes % 2:
            raise ShapeError(f"n_modes must be even and >= 8, got {self.n_modes}")

    @property
    def length(self) -> float:
        return 1.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_modes,) * self.dim

    @property
    def n_points(self) -> int:
        return self.n_modes**self.dim

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers, shape ``(dim, N, ..., N)``, FFT order."""
        k1 = np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).round().astype(np.int64)
        return _readonly(np.array(np.meshgrid(*([k1] * self.dim), indexing="ij")))

    @cached_property
    def k_squared(self) -> np.ndarray:
        """``|k|^2`` as exact integers."""
        return _readonly(np.sum(self.wavenumbers**2, axis=0))

    @cached_property
    def k_norm(self) -> np.ndarray:
        return _readonly(np.sqrt(self.k_squared.astype(np.float64)))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True at wavenumbers with some component equal to ``-N/2``."""
        return _readonly(np.any(self.wavenumbers == -(self.n_modes // 2), axis=0))

    @cached_property
    def grad_symbol(self) -> np.ndarray:
        """``2*pi*i*k`` with the Nyquist index of each axis zeroed."""
        k = self.wavenumbers.astype(np.float64)
        k[self.wavenumbers == -(self.n_modes // 2)] = 0.0
        return _readonly(2j * np.pi * k)

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """``-|2*pi*k|^2`` (exact, Nyquist included)."""
        return _readonly(-(2.0 * np.pi) ** 2 * self.k_squared.astype(np.float64))

    @cached_property
    def grad_laplacian_symbol(self) -> np.ndarray:
        """Symbol of ``div(grad .)`` built from :attr:`grad_symbol`."""
        return _readonly(np.sum(self.grad_symbol**2, axis=0).real)

    def coordinates(self) -> np.ndarray:
        """Sample coordinates, shape ``(dim, N, ..., N)``."""
        x1 = np.arange(self.n_modes) / self.n_modes
        return np.array(np.meshgrid(*([x1] * self.dim), indexing="ij"))


class SpectralField:
    """Real scalar or vector field with lazily synchronised representations.

    Exactly one representation is supplied at construction; the other is
    computed on first access and cached. Both arrays are read-only, so a
    field can be shared freely once built.

    Scalars have shape ``grid.shape``; vectors ``(dim,) + grid.shape``.
    """

    __slots__ = ("grid", "_phys", "_spec")

    def __init__(self, grid: TorusGrid, *, phys: np.ndarray | None = None,
                 spec: np.ndarray | None = None):
        if (phys is None) == (spec is None):
            raise ValueError("supply exactly one of phys or spec")
        self.grid = grid
        arr = phys if phys is not None else spec
        if arr.shape not in (grid.shape, (grid.dim,) + grid.shape):
            raise ShapeError(f"array shape {arr.shape} does not fit grid {grid.shape}")
        self._phys = None
        self._spec = None
        if phys is not None:
            self._phys = _readonly(np.array(phys, dtype=np.float64))
        else:
            self._spec = _readonly(np.array(spec, dtype=np.complex128))

    @classmethod
    def from_phys(cls, grid: TorusGrid, phys) -> "SpectralField":
        return cls(grid, phys=np.asarray(phys))

    @classmethod
    def from_spec(cls, grid: TorusGrid, spec) -> "SpectralField":
        return cls(grid, spec=np.asarray(spec))

    @property
    def is_vector(self) -> bool:
        arr = self._phys if self._phys is not None else self._spec
        return arr.ndim == self.grid.dim + 1

    @property
    def components(self) -> int:
        return self.grid.dim if self.is_vector else 1

    @property
    def phys_current(self) -> bool:
        return self._phys is not None

    @property
    def spec_current(self) -> bool:
        return self._spec is not None

    @property
    def phys(self) -> np.ndarray:
        if self._phys is None:
            self._phys = _readonly(np.ascontiguousarray(_ifft(self._spec, self.grid.dim).real))
        return self._phys

    @property
    def spec(self) -> np.ndarray:
        if self._spec is None:
            if not np.all(np.isfinite(self._phys)):
                raise DataError("field contains non-finite samples")
            self._spec = _readonly(_fft(self._phys, self.grid.dim))
        return self._spec

    def component(self, i: int) -> "SpectralField":
        if not self.is_vector:
            raise ShapeError("component() needs a vector field")
        if self._spec is not None:
            return SpectralField(self.grid, spec=self._spec[i])
        return SpectralField(self.grid, phys=self._phys[i])

    def mean(self) -> float:
        """Spatial mean of a scalar field (the ``k = 0`` coefficient)."""
        if self.is_vector:
            raise ShapeError("mean() needs a scalar field")
        return float(self.spec[(0,) * self.grid.dim].real)

    def l2_norm(self) -> float:
        """``||f||_{L^2(T^d)}`` via Parseval (vectors: Euclidean over components)."""
        return float(np.sqrt(np.sum(np.abs(self.spec) ** 2)))

    def max_abs(self) -> float:
        """Max pointwise magnitude (Euclidean over components for vectors)."""
        if self.is_vector:
            return float(np.sqrt(np.max(np.sum(self.phys**2, axis=0))))
        return float(np.max(np.abs(self.phys)))

    def __repr__(self) -> str:
        kind = "vector" if self.is_vector else "scalar"
        return f"SpectralField({kind}, dim={self.grid.dim}, N={self.grid.n_modes})"

    # Arithmetic is done in spectral space; every operator here is linear.
    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise ShapeError("fields live on different grids")
            return other.spec
        raise TypeError(type(other).__name__)

    def __add__(self, other):
        return SpectralField(self.grid, spec=self.spec + self._coerce(other))

    def __sub__(self, other):
        return SpectralField(self.grid, spec=self.spec - self._coerce(other))

    def __neg__(self):
        return SpectralField(self.grid, spec=-self.spec)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            raise TypeError("use dealiased_product for field products")
        return SpectralField(self.grid, spec=self.spec * scalar)

    __rmul__ = __mul__


def to_spectral(f: SpectralField) -> SpectralField:
    """Make the coefficient representation current. Raises DataError on NaN/inf."""
    f.spec
    return f


def to_physical(f: SpectralField) -> SpectralField:
    f.phys
    return f


def differential(f: SpectralField, op_kind: str) -> SpectralField:
    """Apply ``grad``, ``div``, ``laplacian`` or ``biharmonic`` exactly in Fourier space."""
    g = f.grid
    if op_kind == "grad":
        if f.is_vector:
            raise ShapeError("grad needs a scalar field")
        return SpectralField(g, spec=g.grad_symbol * f.spec)
    if op_kind == "div":
        if not f.is_vector:
            raise ShapeError("div needs a vector field")
        return SpectralField(g, spec=np.sum(g.grad_symbol * f.spec, axis=0))
    if op_kind == "laplacian":
        return SpectralField(g, spec=g.laplacian_symbol * f.spec)
    if op_kind == "biharmonic":
        return SpectralField(g, spec=g.laplacian_symbol**2 * f.spec)
    raise ValueError(f"unknown op_kind {op_kind!r}")


def ball_mask(grid: TorusGrid, n: int) -> np.ndarray:
    """Boolean mask of ``|k| <= n`` (Euclidean, exact integer comparison)."""
    if n < 0:
        raise ValueError("truncation radius must be >= 0")
    return grid.k_squared <= n * n


def project_pn(f: SpectralField, n: int) -> SpectralField:
    """Galerkin projector: keep modes with ``|k| <= n``."""
    return SpectralField(f.grid, spec=f.spec * ball_mask(f.grid, n))


@dataclass(frozen=True)
class DealiasRule:
    """Zero-padding factor for pointwise products: 3/2 (quadratic) or 2 (cubic)."""

    padding_factor: Fraction = Fraction(3, 2)

    def __post_init__(self):
        object.__setattr__(self, "padding_factor", Fraction(self.padding_factor))
        if self.padding_factor not in (Fraction(3, 2), Fraction(2)):
            raise ValueError("padding_factor must be 3/2 or 2")

    def padded_size(self, n_modes: int) -> int:
        m = self.padding_factor * n_modes
        if m.denominator != 1:
            raise ShapeError(f"padding {self.padding_factor} does not divide n_modes={n_modes}")
        return int(m)


QUADRATIC = DealiasRule(Fraction(3, 2))
CUBIC = DealiasRule(Fraction(2))


def _pad_axis(a: np.ndarray, axis: int, n: int, m: int) -> np.ndarray:
    h = n // 2
    shape = list(a.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=np.complex128)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[axis], dst[axis] = slice(0, h), slice(0, h)
    out[tuple(dst)] = a[tuple(src)]
    src[axis], dst[axis] = slice(h + 1, n), slice(m - h + 1, m)
    out[tuple(dst)] = a[tuple(src)]
    # split the Nyquist coefficient between +N/2 and -N/2
    src[axis] = h
    half = 0.5 * a[tuple(src)]
    dst[axis] = h
    out[tuple(dst)] = half
    dst[axis] = m - h
    out[tuple(dst)] = half
    return out


def _truncate_axis(a: np.ndarray, axis: int, n: int, m: int) -> np.ndarray:
    h = n // 2
    shape = list(a.shape)
    shape[axis] = n
    out = np.empty(shape, dtype=np.complex128)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[axis], dst[axis] = slice(0, h), slice(0, h)
    out[tuple(dst)] = a[tuple(src)]
    src[axis], dst[axis] = slice(m - h + 1, m), slice(h + 1, n)
    out[tuple(dst)] = a[tuple(src)]
    # +N/2 and -N/2 coincide on the coarse grid
    src[axis] = h
    plus = a[tuple(src)]
    src[axis] = m - h
    dst[axis] = h
    out[tuple(dst)] = plus + a[tuple(src)]
    return out


def pad_spectrum(spec: np.ndarray, d: int, m: int) -> np.ndarray:
    """Embed coefficients from an ``N^d`` grid into an ``M^d`` grid (``M > N``)."""
    n = spec.shape[-1]
    if m == n:
        return spec.copy()
    if m < n:
        raise ShapeError("padded size must exceed the source size")
    out = spec
    for ax in range(-d, 0):
        out = _pad_axis(out, ax, n, m)
    return out


def truncate_spectrum(spec: np.ndarray, d: int, n: int) -> np.ndarray:
    """Restrict coefficients from an ``M^d`` grid to ``N^d`` (inverse of padding)."""
    m = spec.shape[-1]
    if m == n:
        return spec.copy()
    out = spec
    for ax in range(-d, 0):
        out = _truncate_axis(out, ax, n, m)
    return out


def padded_physical(spec: np.ndarray, d: int, m: int) -> np.ndarray:
    """Samples of a band-limited field on the finer ``M^d`` grid."""
    return _ifft(pad_spectrum(spec, d, m), d).real


def from_padded_physical(values: np.ndarray, d: int, n: int) -> np.ndarray:
    """Coefficients on the ``N^d`` grid of samples taken on a finer grid."""
    return truncate_spectrum(_fft(values, d), d, n)


def dealiased_product(fs: Sequence[SpectralField], rule: DealiasRule = QUADRATIC) -> SpectralField:
    """Pointwise product of 2 or 3 fields evaluated on a zero-padded grid.

    Scalars broadcast against vectors; two vectors multiply componentwise.
    The result is the exact truncated convolution whenever the summed
    bandwidths fit inside the padded grid.
    """
    if len(fs) not in (2, 3):
        raise ShapeError("dealiased_product takes 2 or 3 fields")
    grid = fs[0].grid
    for f in fs[1:]:
        if f.grid != grid:
            raise ShapeError("fields live on different grids")
    d = grid.dim
    m = rule.padded_size(grid.n_modes)
    prod = None
    for f in fs:
        v = padded_physical(f.spec, d, m)
        prod = v if prod is None else prod * v
    return SpectralField(grid, spec=from_padded_physical(prod, d, grid.n_modes))


def random_field(grid: TorusGrid, rng: np.random.Generator, slope: float = -2.0,
                 k_max: int | None = None, zero_mean: bool = True) -> SpectralField:
    """Random real field with amplitude spectrum ``(1 + |k|)^slope`` for ``|k| <= k_max``.

    ``k_max`` defaults to ``N/3`` so that quadratic products stay alias-free.
    The Nyquist planes are always empty.
    """
    if k_max is None:
        k_max = grid.n_modes // 3
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    amp = (1.0 + grid.k_norm) ** slope
    mask = ball_mask(grid, k_max) & ~grid.nyquist_mask
    if zero_mean:
        mask = mask & (grid.k_squared > 0)
    phys = _ifft(z * amp * mask, grid.dim).real
    return SpectralField(grid, phys=phys)
