"""Operators and pipeline for the single-objective deblurring benchmark.

The forward model is theta = B W x + noise with B a periodic Gaussian
blur and W the orthonormal multi-level 2-D Haar synthesis, so the
reconstruction problem min ||B W x - theta||^2 + lambda ||x||_1 is a
single-objective instance of the composite solver.  Periodic boundary
makes B exactly diagonal in the Fourier basis, which pins the gradient
Lipschitz constant analytically; a matrix-free power iteration
cross-checks it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .problems import ProblemSpec
from .prox import WeightedL1
from .rng import SplitMix64

_SQRT2 = math.sqrt(2.0)
_spectrum_cache: dict = {}


@dataclass(frozen=True, eq=False)
class Image:
    """Grayscale pixel grid, nominal range [0, 1], row-major (h, w)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("image values must be a 2-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BlurSpec:
    """Truncated normalized Gaussian kernel under periodic boundary."""

    kernel_size: int = 9
    sigma: float = 4.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundary is supported")

    def kernel(self) -> np.ndarray:
        c = (self.kernel_size - 1) / 2.0
        i = np.arange(self.kernel_size)
        g = np.exp(-((i - c) ** 2) / (2.0 * self.sigma**2))
        k2 = np.outer(g, g)
        return k2 / k2.sum()


def _kernel_spectrum(spec: BlurSpec, shape: Tuple[int, int],
                     kernel: np.ndarray = None) -> np.ndarray:
    key = (spec.kernel_size, spec.sigma, shape)
    if kernel is None and key in _spectrum_cache:
        return _spectrum_cache[key]
    h, w = shape
    k2 = spec.kernel() if kernel is None else kernel
    ks = k2.shape[0]
    if h < ks or w < ks:
        raise ValueError("image dimensions must be at least kernel_size")
    pad = np.zeros(shape)
    pad[:ks, :ks] = k2
    pad = np.roll(pad, (-(ks // 2), -(ks // 2)), axis=(0, 1))
    spectrum = np.fft.rfft2(pad)
    if kernel is None:
        _spectrum_cache[key] = spectrum
    return spectrum


def _blur_arrays(spec: BlurSpec, x: np.ndarray, adjoint: bool = False,
                 kernel: np.ndarray = None) -> np.ndarray:
    shape = x.shape[-2:]
    s = _kernel_spectrum(spec, shape, kernel)
    if adjoint:
        s = np.conj(s)
    return np.fft.irfft2(np.fft.rfft2(x) * s, s=shape)


def blur_apply(spec: BlurSpec, img: Image) -> Image:
    """Circular 2-D convolution with the normalized Gaussian kernel."""
    return Image(_blur_arrays(spec, img.values))


def _check_pow2(shape: Tuple[int, int]):
    for d in shape:
        if d < 1 or (d & (d - 1)) != 0:
            raise ValueError(f"Haar transform needs power-of-two dimensions, got {shape}")


def haar_analysis_array(x: np.ndarray) -> np.ndarray:
    """Orthonormal multi-level 2-D Haar analysis over the last two axes."""
    h, w = x.shape[-2:]
    _check_pow2((h, w))
    out = np.array(x, dtype=float, copy=True)
    levels = int(math.log2(min(h, w)))
    bh, bw = h, w
    for _ in range(levels):
        blk = out[..., :bh, :bw]
        a = (blk[..., :, 0::2] + blk[..., :, 1::2]) / _SQRT2
        d = (blk[..., :, 0::2] - blk[..., :, 1::2]) / _SQRT2
        blk = np.concatenate([a, d], axis=-1)
        a = (blk[..., 0::2, :] + blk[..., 1::2, :]) / _SQRT2
        d = (blk[..., 0::2, :] - blk[..., 1::2, :]) / _SQRT2
        out[..., :bh, :bw] = np.concatenate([a, d], axis=-2)
        bh //= 2
        bw //= 2
    return out


def haar_synthesis_array(c: np.ndarray) -> np.ndarray:
    """Inverse of `haar_analysis_array` (exact orthonormal pair)."""
    h, w = c.shape[-2:]
    _check_pow2((h, w))
    out = np.array(c, dtype=float, copy=True)
    levels = int(math.log2(min(h, w)))
    for lvl in reversed(range(levels)):
        bh, bw = h >> lvl, w >> lvl
        blk = out[..., :bh, :bw]
        a, d = blk[..., : bh // 2, :], blk[..., bh // 2:, :]
        tmp = np.empty_like(blk)
        tmp[..., 0::2, :] = (a + d) / _SQRT2
        tmp[..., 1::2, :] = (a - d) / _SQRT2
        a, d = tmp[..., :, : bw // 2], tmp[..., :, bw // 2:]
        res = np.empty_like(tmp)
        res[..., :, 0::2] = (a + d) / _SQRT2
        res[..., :, 1::2] = (a - d) / _SQRT2
        out[..., :bh, :bw] = res
    return out


def haar_analysis(img: Image) -> Image:
    return Image(haar_analysis_array(img.values))


def haar_synthesis(coeffs: Image) -> Image:
    return Image(haar_synthesis_array(coeffs.values))


def lipschitz_constant(spec: BlurSpec, shape: Tuple[int, int],
                       kernel: np.ndarray = None, power_tol: float = 1e-10,
                       max_power_iter: int = 10000) -> float:
    """L = 2 lambda_max(B^T B), computed two independent ways.

    The spectral route takes the largest squared magnitude of the
    kernel's 2-D Fourier spectrum (exact under periodic boundary); a
    matrix-free power iteration on x -> B^T(B x) must agree within 1e-6
    relative.  For a normalized nonnegative kernel the answer is exactly
    2 (the zero-frequency mode dominates).
    """
    s = _kernel_spectrum(spec, shape, kernel)
    spectral = 2.0 * float((np.abs(s) ** 2).max())

    rng = SplitMix64(0)
    v = np.array([rng.next_float() + 0.5 for _ in range(shape[0] * shape[1])])
    v = v.reshape(shape)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    converged = False
    for _ in range(max_power_iter):
        tv = _blur_arrays(spec, _blur_arrays(spec, v, kernel=kernel),
                          adjoint=True, kernel=kernel)
        lam = float((v * tv).sum())
        nrm = np.linalg.norm(tv)
        if nrm == 0.0:
            lam, converged = 0.0, True
            break
        v = tv / nrm
        if abs(lam - lam_prev) <= power_tol * max(1.0, abs(lam)):
            converged = True
            break
        lam_prev = lam
    if not converged:
        raise RuntimeError("power iteration did not converge")
    powered = 2.0 * lam
    if abs(powered - spectral) > 1e-6 * max(abs(spectral), 1e-300):
        raise RuntimeError(
            f"Lipschitz estimates disagree: spectral {spectral!r}, power {powered!r}")
    return spectral


def make_deblur_problem(observed: Image, spec: BlurSpec,
                        lambda_reg: float) -> ProblemSpec:
    """Single-objective l2-l1 reconstruction problem in coefficient space.

    f(x) = ||B W x - theta||^2 with matrix-free gradient
    2 W^T B^T (B W x - theta); g = lambda ||x||_1.  The init box is the
    single point W^T theta (the observed image's wavelet coefficients),
    which the benchmark uses as the starting iterate.
    """
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be nonnegative")
    theta = observed.values
    h, w = theta.shape
    _check_pow2((h, w))
    if min(h, w) < spec.kernel_size:
        raise ValueError("image dimensions must be at least kernel_size")
    n = h * w

    def _residual(x):
        grid = x.reshape((-1, h, w))
        return _blur_arrays(spec, haar_synthesis_array(grid)) - theta

    def values(x):
        x = np.asarray(x, dtype=float)
        r = _residual(x)
        return (r * r).sum(axis=(-2, -1)).reshape(x.shape[:-1] + (1,))

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        r = _residual(x)
        g = 2.0 * haar_analysis_array(_blur_arrays(spec, r, adjoint=True))
        return g.reshape(x.shape[:-1] + (1, n))

    def both(x):
        x = np.asarray(x, dtype=float)
        r = _residual(x)
        f = (r * r).sum(axis=(-2, -1)).reshape(x.shape[:-1] + (1,))
        g = 2.0 * haar_analysis_array(_blur_arrays(spec, r, adjoint=True))
        return f, g.reshape(x.shape[:-1] + (1, n))

    x0 = haar_analysis_array(theta).reshape(n)
    return ProblemSpec(
        name="CAM_DEBLUR", n=n, m=1, values=values, jacobian=jacobian,
        pieces=[WeightedL1(n, lambda_reg, np.zeros(n))],
        init_lower=x0.copy(), init_upper=x0.copy(),
        known_L=lipschitz_constant(spec, (h, w)),
        values_and_jacobian=both,
    )


def add_gaussian_noise(img: Image, sigma: float, seed: int) -> Image:
    """i.i.d. zero-mean Gaussian noise from the seeded SplitMix64 stream."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return Image(img.values.copy())
    noise = SplitMix64(seed).normal(img.height * img.width)
    return Image(img.values + sigma * noise.reshape(img.values.shape))


def phantom(size: int = 128) -> Image:
    """Procedural test image: gradient ramp, rectangles and disks."""
    if size < 8:
        raise ValueError("phantom size must be at least 8")
    yy, xx = np.meshgrid(np.linspace(0, 1, size, endpoint=False),
                         np.linspace(0, 1, size, endpoint=False), indexing="ij")
    img = 0.2 + 0.3 * (xx + yy) / 2.0
    img[(yy >= 0.10) & (yy < 0.40) & (xx >= 0.15) & (xx < 0.45)] = 0.85
    img[(yy >= 0.55) & (yy < 0.90) & (xx >= 0.10) & (xx < 0.35)] = 0.35
    img[((yy - 0.30) ** 2 + (xx - 0.70) ** 2) < 0.15**2] = 0.95
    img[((yy - 0.72) ** 2 + (xx - 0.68) ** 2) < 0.12**2] = 0.05
    img[(yy >= 0.60) & (yy < 0.68) & (xx >= 0.75) & (xx < 0.83)] = 1.0
    return Image(img)


def psnr(img: Image, reference: Image) -> float:
    """10 log10(1 / MSE) for [0, 1]-scaled images."""
    mse = float(((img.values - reference.values) ** 2).mean())
    if mse == 0.0:
        return np.inf
    return 10.0 * math.log10(1.0 / mse)


def write_pgm(img: Image, path) -> None:
    """Binary PGM: magic P5, maxval 65535, big-endian samples, row-major.

    Values are linearly mapped from [0, 1] and clamped on write only.
    """
    scaled = np.clip(img.values, 0.0, 1.0) * 65535.0
    data = np.round(scaled).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> Image:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 65535:
        raise ValueError(f"expected maxval 65535, got {maxval}")
    expected = width * height * 2
    data = raw[pos:pos + expected]
    if len(data) != expected:
        raise ValueError("truncated PGM payload")
    values = np.frombuffer(data, dtype=">u2").astype(float).reshape(height, width)
    return Image(values / 65535.0)
