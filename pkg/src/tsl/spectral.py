"""Fourier representation of periodic, divergence-free, zero-mean velocity fields.

Coefficients are stored densely in numpy FFT layout: the lattice point with
integer frequencies n = (n_1, ..., n_d), |n_i| <= N/2, lives at array index
(n_1 % N, ...), and carries the wavenumber k = 2*pi*(n_1/L_1, ...).  The
stored value is the Fourier-series amplitude, i.e.

    u(x) = sum_k c_k exp(i k.x),

so Parseval reads  int |u|^2 dx = |Omega| * sum_k |c_k|^2.  A real field has
Hermitian coefficients, c(-k) = conj(c(k)); the -N/2 frequency pairs with
itself modulo N and must carry a real amplitude.

All operations here are pure: they never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_EPS = np.finfo(np.float64).eps


def _int_freqs(n: int) -> np.ndarray:
    """Integer FFT frequencies 0, 1, ..., N/2-1, -N/2, ..., -1."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


@dataclass(frozen=True)
class WaveGrid:
    """Periodic box geometry and its wavenumber lattice.

    Derived arrays (wavenumbers, |k|^2, dealiasing mask, eigenvalue shells)
    are computed once at construction and shared read-only by every field on
    the grid.
    """

    dim: int
    lengths: tuple
    modes_per_dim: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        lengths = tuple(float(l) for l in self.lengths)
        if len(lengths) != self.dim:
            raise ValueError("lengths must have one entry per dimension")
        if any(l <= 0 for l in lengths):
            raise ValueError("box sides must be positive")
        n = self.modes_per_dim
        if n != int(n) or n < 4 or n % 2 != 0:
            raise ValueError(f"modes_per_dim must be an even integer >= 4, got {n}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "modes_per_dim", int(n))

        shape = (n,) * self.dim
        ints = []
        waves = []
        for axis in range(self.dim):
            ni = _int_freqs(n)
            sh = [1] * self.dim
            sh[axis] = n
            ints.append(ni.reshape(sh))
            waves.append((2.0 * np.pi / lengths[axis]) * ni.reshape(sh))
        k = np.stack([np.broadcast_to(w, shape).copy() for w in waves])
        n_int = np.stack([np.broadcast_to(i, shape).copy() for i in ints])
        k2 = np.sum(k * k, axis=0)
        k2_safe = np.where(k2 == 0.0, 1.0, k2)
        lambda1 = float(np.min(k2[k2 > 0]))
        volume = float(np.prod(lengths))
        npoints = n ** self.dim

        # 2/3-rule band: |n_i| <= N//3 per dimension (Nyquist never included).
        cut = n // 3
        dealias = np.all(np.abs(n_int) <= cut, axis=0)

        nyquist = np.any(n_int == -(n // 2), axis=0)

        # Distinct Laplacian eigenvalue shells, and how many of them lie
        # entirely inside the dealiased band (usable as Galerkin cutoffs).
        nonzero = k2 > 0
        shells = np.unique(np.round(k2[nonzero], 9))
        outside = nonzero & ~dealias
        kappa_lim = float(np.min(k2[outside])) if np.any(outside) else np.inf
        max_shell = int(np.sum(shells < kappa_lim - 1e-9))

        for name, val in [
            ("shape", shape), ("k", k), ("n_int", n_int), ("k2", k2),
            ("k2_safe", k2_safe), ("kabs", np.sqrt(k2)), ("lambda1", lambda1),
            ("volume", volume), ("npoints", npoints),
            ("quad_weight", volume / npoints), ("dealias_mask", dealias),
            ("nyquist_mask", nyquist), ("shells", shells),
            ("max_galerkin_shell", max_shell), ("_mode_cache", {}),
        ]:
            object.__setattr__(self, name, val)
        for arr in (k, n_int, k2, k2_safe, dealias, nyquist, shells):
            arr.setflags(write=False)

    @property
    def spatial_axes(self) -> tuple:
        return tuple(range(1, self.dim + 1))

    def coordinates(self) -> np.ndarray:
        """Physical collocation points, shape (dim, N, ..., N)."""
        axes = [self.lengths[i] * np.arange(self.modes_per_dim) / self.modes_per_dim
                for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def canonical_modes(self) -> list:
        """Nonzero lattice modes, one per Hermitian pair, ordered by (|k|^2, n).

        Nyquist frequencies are excluded (they pair with themselves).
        """
        cached = self._mode_cache.get("canonical")
        if cached is not None:
            return cached
        n_int = self.n_int.reshape(self.dim, -1)
        nyq = self.nyquist_mask.reshape(-1)
        k2 = self.k2.reshape(-1)
        canonical = np.zeros(n_int.shape[1], dtype=bool)
        all_zero_above = np.ones(n_int.shape[1], dtype=bool)
        for axis in range(self.dim):
            canonical |= all_zero_above & (n_int[axis] > 0)
            all_zero_above &= n_int[axis] == 0
        canonical &= ~nyq
        idx = np.nonzero(canonical)[0]
        cols = [n_int[axis, idx] for axis in range(self.dim)]
        order = np.lexsort(tuple(reversed(cols)) + (np.round(k2[idx], 9),))
        modes = [tuple(int(n_int[a, idx[i]]) for a in range(self.dim)) for i in order]
        self._mode_cache["canonical"] = modes
        return modes

    def mode_index(self, n: Sequence[int]) -> tuple:
        return tuple(int(ni) % self.modes_per_dim for ni in n)


def make_grid(dim: int, lengths, modes_per_dim: int) -> WaveGrid:
    """Build the wavenumber lattice for a periodic box."""
    return WaveGrid(dim=dim, lengths=tuple(lengths), modes_per_dim=modes_per_dim)


@dataclass
class SpectralField:
    """Velocity field as complex amplitudes, shape (dim, N, ..., N).

    Fields produced by this module's constructors satisfy: Hermitian symmetry,
    zero mean, and per-mode divergence k.c(k) = 0 to within 1e-12 relative.
    Construction itself does not validate (see validate_field).
    """

    grid: WaveGrid
    coeffs: np.ndarray

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__


@dataclass
class ScalarField:
    """Scalar field (e.g. vorticity) as Hermitian complex amplitudes."""

    grid: WaveGrid
    coeffs: np.ndarray


def zero_field(grid: WaveGrid) -> SpectralField:
    return SpectralField(grid, np.zeros((grid.dim,) + grid.shape, dtype=np.complex128))


def field_from_values(grid: WaveGrid, values: np.ndarray, project: bool = True) -> SpectralField:
    """Build a field from real collocation values (dim, N, ..., N)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"values must have shape {(grid.dim,) + grid.shape}")
    c = np.fft.fftn(values, axes=grid.spatial_axes) / grid.npoints
    c[(slice(None),) + (0,) * grid.dim] = 0.0
    if project:
        c = _leray_coeffs(grid, c)
    return SpectralField(grid, c)


def field_values(u: SpectralField) -> np.ndarray:
    """Real collocation values of the field, shape (dim, N, ..., N)."""
    g = u.grid
    return np.fft.ifftn(u.coeffs * g.npoints, axes=g.spatial_axes).real


def scalar_values(w: ScalarField) -> np.ndarray:
    g = w.grid
    return np.fft.ifftn(w.coeffs * g.npoints, axes=tuple(range(g.dim))).real


def _reflect(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    """Map c(n) -> c(-n) on the spatial axes (component axes untouched)."""
    lead = c.ndim - grid.dim
    out = c
    for axis in range(lead, c.ndim):
        out = np.roll(np.flip(out, axis), 1, axis)
    return out


def hermitian_defect(grid: WaveGrid, c: np.ndarray) -> float:
    """Max |c(-n) - conj(c(n))| relative to the largest amplitude."""
    scale = float(np.max(np.abs(c))) or 1.0
    return float(np.max(np.abs(_reflect(grid, c) - np.conj(c)))) / scale


def validate_field(u: SpectralField, tol: float = 1e-12) -> None:
    """Raise ValueError if an invariant (Hermitian, zero-mean, div-free) fails."""
    g, c = u.grid, u.coeffs
    if c.shape != (g.dim,) + g.shape:
        raise ValueError("coefficient array has the wrong shape")
    if hermitian_defect(g, c) > 1e-10:
        raise ValueError("field is not Hermitian-symmetric (not a real field)")
    mean = np.abs(c[(slice(None),) + (0,) * g.dim])
    scale = float(np.max(np.abs(c))) or 1.0
    if np.any(mean > tol * scale):
        raise ValueError("field does not have zero mean")
    div = np.abs(np.einsum("i...,i...->...", g.k, c))
    amp = np.sqrt(np.sum(np.abs(c) ** 2, axis=0))
    bad = div > tol * np.maximum(g.kabs * amp, g.kabs * scale * 1e-4)
    if np.any(bad & (amp > tol * scale)):
        raise ValueError("field is not divergence-free to tolerance")


def _leray_coeffs(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    """Per-mode projection c - k (k.c)/|k|^2, with the k=0 amplitude zeroed.

    A per-mode divergence below 64 eps of the mode amplitude is snapped to
    zero before subtracting, so already-solenoidal input passes through
    bit-for-bit and the projection is idempotent on generic fields.
    """
    q = np.einsum("i...,i...->...", grid.k, c) / grid.k2_safe
    amp = np.sqrt(np.sum(np.abs(c) ** 2, axis=0))
    q = np.where(np.abs(q) * grid.kabs <= 64.0 * _EPS * amp, 0.0, q)
    out = c - q[None, ...] * grid.k
    out[(slice(None),) + (0,) * grid.dim] = 0.0
    return out


def leray_project(v: SpectralField) -> SpectralField:
    """Project onto divergence-free, zero-mean fields (I - k k^T/|k|^2 per mode)."""
    return SpectralField(v.grid, _leray_coeffs(v.grid, np.array(v.coeffs)))


def nonlinear_term(u: SpectralField) -> SpectralField:
    """Advection term P[(u.grad)u], dealiased by the 2/3 rule.

    Inputs are truncated to the 2/3 band, the products are formed on the
    collocation grid, and the result is re-truncated and Leray-projected.
    For band-limited fields this is the exact Galerkin convolution, and
    (nonlinear_term(u), u) = 0 to rounding for any divergence-free u.
    """
    g = u.grid
    mask = g.dealias_mask
    cu = u.coeffs * mask
    axes = g.spatial_axes
    vel = np.fft.ifftn(cu * g.npoints, axes=axes).real
    # grads[i, j] = d u_i / d x_j on the grid
    grads = np.fft.ifftn(
        (1j * g.k)[None, :, ...] * cu[:, None, ...] * g.npoints,
        axes=tuple(a + 1 for a in axes),
    ).real
    adv = np.einsum("j...,ij...->i...", vel, grads)
    b = np.fft.fftn(adv, axes=axes) / g.npoints
    b *= mask
    return SpectralField(g, _leray_coeffs(g, b))


def vorticity_2d(u: SpectralField) -> ScalarField:
    """Scalar curl of a planar field: w(k) = i (k1 u2(k) - k2 u1(k))."""
    g = u.grid
    if g.dim != 2:
        raise ValueError("vorticity_2d requires a 2-dimensional grid")
    w = 1j * (g.k[0] * u.coeffs[1] - g.k[1] * u.coeffs[0])
    return ScalarField(g, w)


# ---------------------------------------------------------------------------
# Norms and inner products (Parseval sums over the lattice)
# ---------------------------------------------------------------------------

def inner_h(u: SpectralField, v: SpectralField) -> float:
    """L^2 inner product int u.v dx = |Omega| sum_k u(k).conj(v(k))."""
    return float(u.grid.volume * np.sum(u.coeffs * np.conj(v.coeffs)).real)


def inner_v(u: SpectralField, v: SpectralField) -> float:
    """Gradient inner product int grad u : grad v dx."""
    return float(u.grid.volume * np.sum(u.grid.k2 * np.sum(u.coeffs * np.conj(v.coeffs), axis=0)).real)


def norm_h(u: SpectralField) -> float:
    """|u| = (|Omega| sum_k |u(k)|^2)^(1/2)."""
    return float(np.sqrt(u.grid.volume * np.sum(np.abs(u.coeffs) ** 2)))


def norm_v(u: SpectralField) -> float:
    """||u|| = (|Omega| sum_k |k|^2 |u(k)|^2)^(1/2)."""
    return float(np.sqrt(u.grid.volume * np.sum(u.grid.k2 * np.sum(np.abs(u.coeffs) ** 2, axis=0))))


def norm_v_dual(w: SpectralField) -> float:
    """Dual norm (|Omega| sum_k |k|^-2 |Pw(k)|^2)^(1/2) of the solenoidal part."""
    g = w.grid
    p = _leray_coeffs(g, np.array(w.coeffs))
    return float(np.sqrt(g.volume * np.sum(np.sum(np.abs(p) ** 2, axis=0) / g.k2_safe)))


def _gradient_values(u: SpectralField) -> np.ndarray:
    """d u_i / d x_j on the collocation grid, shape (d, d, N, ..., N)."""
    g = u.grid
    return np.fft.ifftn(
        (1j * g.k)[None, :, ...] * u.coeffs[:, None, ...] * g.npoints,
        axes=tuple(a + 1 for a in g.spatial_axes),
    ).real


def norm_w1r(u: SpectralField, r: float) -> float:
    """Homogeneous W^{1,r} norm from componentwise L^r norms of the gradient.

    (sum_{i,j} ||d_j u_i||_{L^r}^r)^{1/r} for finite r; for r = inf the sum
    of grid maxima.  L^r integrals use the rectangle rule on the collocation
    grid (spectrally accurate for periodic integrands).
    """
    if not (r >= 2):
        raise ValueError(f"r must be in [2, inf], got {r}")
    g = u.grid
    grads = _gradient_values(u)
    if np.isinf(r):
        return float(np.sum(np.max(np.abs(grads), axis=tuple(a + 1 for a in g.spatial_axes))))
    comp = np.sum(np.abs(grads) ** r, axis=tuple(a + 1 for a in g.spatial_axes)) * g.quad_weight
    return float(np.sum(comp) ** (1.0 / r))


def lr_norm_scalar(w: ScalarField, r: float) -> float:
    """L^r norm of a scalar field by the rectangle rule (grid max for r=inf)."""
    vals = scalar_values(w)
    if np.isinf(r):
        return float(np.max(np.abs(vals)))
    return float((np.sum(np.abs(vals) ** r) * w.grid.quad_weight) ** (1.0 / r))


def _w1inf_upper(grid: WaveGrid, c: np.ndarray) -> float:
    """Coefficient l1 upper bound on the W^{1,inf} norm: sum_{ij} sum_k |k_j c_i(k)|."""
    return float(np.sum(np.abs(c)[:, None, ...] * np.abs(grid.k)[None, :, ...]))


def dual_w1inf_lower(w: SpectralField, probe_budget: int = 16) -> float:
    """Lower bound on the (W^{1,inf})' dual norm of the solenoidal part of w.

    Maximizes |<w, v>| / ||v||_{W^{1,inf}} over a probe family: the field
    itself plus single-mode trigonometric test fields enumerated by shell.
    Probe W^{1,inf} norms are bounded above by the coefficient l1 sum, so the
    result is a certified LOWER bound: it can falsify an upper-bound
    inequality but never certify one.  Nondecreasing in probe_budget.
    """
    if probe_budget < 1:
        raise ValueError("probe_budget must be >= 1")
    g = w.grid
    p = _leray_coeffs(g, np.array(w.coeffs))
    best = 0.0
    # Self-probe: <Pw, Pw> over an upper bound of ||Pw||_{W^{1,inf}}.
    pair = g.volume * float(np.sum(np.abs(p) ** 2))
    nrm = _w1inf_upper(g, p)
    if nrm > 0.0:
        best = pair / nrm
    for n in g.canonical_modes()[: max(0, probe_budget - 1)]:
        idx = (slice(None),) + g.mode_index(n)
        cn = p[idx]
        kvec = np.array([2.0 * np.pi * ni / g.lengths[a] for a, ni in enumerate(n)])
        for e in _polarizations(kvec):
            nrm = float(np.sum(np.abs(e)) * np.sum(np.abs(kvec)))
            if nrm == 0.0:
                continue
            # v = e cos(k.x): v(n) = e/2;  v = e sin(k.x): v(n) = -i e/2.
            for vhat in (0.5 * e, -0.5j * e):
                pair = abs(2.0 * g.volume * np.sum(cn * np.conj(vhat)).real)
                best = max(best, pair / nrm)
    return best


def _polarizations(kvec: np.ndarray) -> list:
    """Real unit vectors spanning the plane orthogonal to k."""
    d = kvec.size
    khat = kvec / np.linalg.norm(kvec)
    if d == 2:
        return [np.array([-khat[1], khat[0]])]
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(khat)))] = 1.0
    e1 = np.cross(khat, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    e2 /= np.linalg.norm(e2)
    return [e1, e2]


# ---------------------------------------------------------------------------
# Galerkin truncation (radial shell cutoff)
# ---------------------------------------------------------------------------

def shell_cutoff(grid: WaveGrid, m: int) -> float:
    """|k|^2 value of the m-th distinct Laplacian eigenvalue shell."""
    if m < 1 or m > grid.max_galerkin_shell:
        raise ValueError(
            f"shell index m={m} not representable on this grid "
            f"(1 <= m <= {grid.max_galerkin_shell})")
    return float(grid.shells[m - 1])


def galerkin_mask(grid: WaveGrid, m: int) -> np.ndarray:
    """Boolean mask of the modes retained by the m-th shell cutoff."""
    kappa = shell_cutoff(grid, m)
    return (grid.k2 > 0) & (grid.k2 <= kappa + 1e-9)


def galerkin_project(u: SpectralField, m: int) -> SpectralField:
    return SpectralField(u.grid, u.coeffs * galerkin_mask(u.grid, m))


# ---------------------------------------------------------------------------
# Field constructors used by tests, presets, and samplers
# ---------------------------------------------------------------------------

def single_mode_field(grid: WaveGrid, n: Sequence[int], amplitude) -> SpectralField:
    """Real field with coefficient amplitude/2 at mode n (conjugate at -n).

    For a real amplitude vector a this is the field a*cos(k.x).
    """
    c = np.zeros((grid.dim,) + grid.shape, dtype=np.complex128)
    a = np.asarray(amplitude, dtype=np.complex128)
    if a.shape != (grid.dim,):
        raise ValueError("amplitude must have one entry per dimension")
    if all(int(v) == 0 for v in n):
        raise ValueError("mode must be nonzero")
    idx = grid.mode_index(n)
    neg = grid.mode_index([-int(v) for v in n])
    c[(slice(None),) + idx] = 0.5 * a
    c[(slice(None),) + neg] += 0.5 * np.conj(a)
    return SpectralField(grid, c)


def taylor_green(grid: WaveGrid, amplitude: float = 1.0) -> SpectralField:
    """Planar vortex array (sin x cos y, -cos x sin y); its advection term is a gradient."""
    if grid.dim != 2:
        raise ValueError("taylor_green requires a 2-dimensional grid")
    x = grid.coordinates()
    vals = amplitude * np.stack([np.sin(x[0]) * np.cos(x[1]),
                                 -np.cos(x[0]) * np.sin(x[1])])
    return field_from_values(grid, vals)


def abc_flow(grid: WaveGrid, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> SpectralField:
    """Beltrami field (curl u = u) on the 2pi box; exact viscous decay e^{-nu t} u0."""
    if grid.dim != 3:
        raise ValueError("abc_flow requires a 3-dimensional grid")
    x = grid.coordinates()
    vals = np.stack([
        a * np.sin(x[2]) + c * np.cos(x[1]),
        b * np.sin(x[0]) + a * np.cos(x[2]),
        c * np.sin(x[1]) + b * np.cos(x[0]),
    ])
    return field_from_values(grid, vals)


def shear_flow(grid: WaveGrid, amplitude: float = 1.0) -> SpectralField:
    """Unidirectional shear (a sin y, 0, ...)."""
    x = grid.coordinates()
    vals = np.zeros((grid.dim,) + grid.shape)
    vals[0] = amplitude * np.sin(x[1])
    return field_from_values(grid, vals)


def random_solenoidal(grid: WaveGrid, seed: int, amplitude: float = 1.0,
                      decay: float = 1.0,
                      spectrum: Callable[[np.ndarray], np.ndarray] | None = None,
                      band_limited: bool = False) -> SpectralField:
    """Seeded random divergence-free field, default spectrum (1+|k|^2)^-decay."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    shape = (grid.dim,) + grid.shape
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if spectrum is None:
        c *= (1.0 + grid.k2) ** (-decay)
    else:
        c *= spectrum(grid.k2)
    c *= ~grid.nyquist_mask
    if band_limited:
        c *= grid.dealias_mask
    c = 0.5 * (c + np.conj(_reflect(grid, c)))
    c = _leray_coeffs(grid, c)
    u = SpectralField(grid, c)
    h = norm_h(u)
    if h > 0:
        u = u * (amplitude / h)
    return u
