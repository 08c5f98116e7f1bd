"""Interaction potentials on the torus and numerical checks of their structure.

Every kernel carries paired tables: exact samples on the grid and exact
Fourier coefficients for modes with all components strictly inside
(-n/2, n/2).  Nyquist modes are set to zero so the table is the
coefficient set of a real, even trigonometric polynomial.  The constant
mode is always zero.

Built-in families
-----------------
periodic-log
    d=1: ``-log|2 sin(pi x)|`` with coefficients ``1/(2|k|)``.
    d=2: ``2 pi G`` where ``-Lap G = delta - 1``; coefficients ``1/(2 pi |k|^2)``
    and ``V(x) ~ -log|x|`` near the origin.
riesz(s)
    d=1, 0 < s < 1: zero-mean periodization of ``|x|^{-s}``.
cosine-test
    ``cos(2 pi x_1)``.
pks(lambda)
    ``-lambda`` times periodic-log (attractive).
tabulated
    Any table given by its Fourier coefficients.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _special
from .torus import (GridField, SpectralCoeffs, check_grid_size,
                    grid_displacements, minimal_image, wavenumbers)

FAMILIES = ("periodic-log", "riesz", "cosine-test", "pks", "tabulated")


@dataclass(frozen=True)
class KernelMeta:
    """Declared structural exponents of a kernel.

    Attributes
    ----------
    k, k_prime : float
        Exponents of the pointwise gradient and Hessian bounds.
    p : float
        Integrability exponent (``inf`` for bounded kernels).
    alpha : float
        Exponent of the Fourier remainder term, in (0, d).
    sign : str
        ``"repulsive"`` or ``"attractive"``.
    sigma_mode : str
        ``"vanishing"`` or ``"fixed"`` diffusion regime.
    singular : bool
        Whether V blows up at the origin.
    """

    k: float
    k_prime: float
    p: float
    alpha: float
    sign: str
    sigma_mode: str = "fixed"
    singular: bool = True

    def __post_init__(self):
        if self.sign not in ("repulsive", "attractive"):
            raise ValueError(f"unknown sign {self.sign!r}")
        if self.sigma_mode not in ("vanishing", "fixed"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")


# ---------------------------------------------------------------- families

def _plog_point(r):
    if r.shape[-1] == 1:
        x = r[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sin(np.pi * x)
            v = -np.log(np.abs(2.0 * s))
            g = -np.pi * np.cos(np.pi * x) / s
            hxx = np.pi ** 2 / s ** 2
        return v, g[..., None], hxx[..., None, None]
    x, y = r[..., 0], r[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g, gx, gy = _special.periodic_green2d(x, y)
    return 2 * np.pi * g, 2 * np.pi * np.stack([gx, gy], axis=-1), None


def _plog_hat(knorm, dim):
    out = np.zeros_like(knorm)
    nz = knorm > 0
    if dim == 1:
        out[nz] = 0.5 / knorm[nz]
    else:
        out[nz] = 1.0 / (2.0 * np.pi * knorm[nz] ** 2)
    return out


def _riesz_point(r, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        v, d1, d2 = _special.periodic_riesz(r[..., 0], s)
    return v, d1[..., None], d2[..., None, None]


def _cos_point(r):
    x = r[..., 0]
    v = np.cos(2 * np.pi * x)
    g = np.zeros(r.shape)
    g[..., 0] = -2 * np.pi * np.sin(2 * np.pi * x)
    hess = np.zeros(r.shape + (r.shape[-1],))
    hess[..., 0, 0] = -4 * np.pi ** 2 * v
    return v, g, hess


def _pointwise(family, params, dim):
    """Return a callable r -> (V, grad V, Hessian or None)."""
    if family == "periodic-log":
        return _plog_point
    if family == "pks":
        lam = params["lambda"]

        def f(r):
            v, g, h = _plog_point(r)
            return -lam * v, -lam * g, None if h is None else -lam * h
        return f
    if family == "riesz":
        return lambda r: _riesz_point(r, params["s"])
    if family == "cosine-test":
        return _cos_point
    raise KeyError(family)


def _fourier(family, params, dim, kvec):
    """Exact Fourier coefficient at integer modes ``kvec`` (shape (dim, ...))."""
    knorm = np.sqrt(np.sum(kvec.astype(float) ** 2, axis=0))
    if family == "periodic-log":
        return _plog_hat(knorm, dim)
    if family == "pks":
        return -params["lambda"] * _plog_hat(knorm, dim)
    if family == "riesz":
        return _special.riesz_fourier(knorm, params["s"])
    if family == "cosine-test":
        on_axis = np.all(kvec[1:] == 0, axis=0) if dim > 1 else True
        return np.where((np.abs(kvec[0]) == 1) & on_axis, 0.5, 0.0)
    raise KeyError(family)


def _default_meta(family, params, dim, sigma_mode):
    if family in ("periodic-log", "pks"):
        sign = "repulsive" if family == "periodic-log" else "attractive"
        return KernelMeta(1.0, 2.0, 2.0, 0.5 * dim, sign, sigma_mode, True)
    if family == "riesz":
        s = params["s"]
        return KernelMeta(s + 1.0, s + 2.0, 0.5 * (1.0 + 1.0 / s), s, "repulsive",
                          sigma_mode, True)
    if family == "cosine-test":
        return KernelMeta(0.0, 0.0, np.inf, 0.5 * dim, "repulsive", sigma_mode, False)
    raise KeyError(family)


def _validate_params(family, params, dim):
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if dim not in (1, 2):
        raise ValueError("only d = 1 or 2 is supported")
    if family == "riesz":
        s = params.get("s")
        if s is None or not 0.0 < s < dim:
            raise ValueError(f"riesz needs 0 < s < d, got s={s}")
        if dim != 1:
            raise ValueError("riesz is available in d = 1 only; use periodic-log in d = 2")
    if family == "pks":
        lam = params.get("lambda")
        if lam is None or lam <= 0:
            raise ValueError(f"pks needs lambda > 0, got {lam}")


def _strip_nyquist(c):
    n = c.shape[0]
    c = np.array(c)
    for ax in range(c.ndim):
        idx = [slice(None)] * c.ndim
        idx[ax] = n // 2
        c[tuple(idx)] = 0.0
    return c


def _resize_coeffs(c, m):
    """Zero-pad or truncate an FFT-ordered coefficient array to size m per axis."""
    n, dim = c.shape[0], c.ndim
    out = np.zeros((m,) * dim, dtype=complex)
    half = min(n, m) // 2
    keep = np.r_[0:half, -half + 1:0]
    ix = np.ix_(*([keep] * dim))
    out[ix] = c[ix]
    return out


# ---------------------------------------------------------------- KernelSpec

@dataclass(frozen=True)
class KernelSpec:
    """Symmetric periodic interaction potential with grid and Fourier tables.

    Attributes
    ----------
    family : str
    dim : int
    n : int
        Grid points per axis.
    params : dict
        Family parameters (``s`` for riesz, ``lambda`` for pks).
    grid_table : GridField
        V at grid nodes; the origin node holds the band-limited value.
    spectral_table : SpectralCoeffs
        Fourier coefficients, zero at k = 0 and on Nyquist indices.
    meta : KernelMeta
    """

    family: str
    dim: int
    n: int
    params: dict = field(compare=False)
    grid_table: GridField = field(repr=False, compare=False)
    spectral_table: SpectralCoeffs = field(repr=False, compare=False)
    meta: KernelMeta = None

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def label(self):
        if self.family == "riesz":
            return f"riesz({self.params['s']:g})"
        if self.family == "pks":
            return f"pks({self.params['lambda']:g})"
        return self.family

    @property
    def is_analytic(self):
        return self.family != "tabulated"

    def coefficients(self, m=None):
        """Real Fourier coefficients on an ``m``-point grid (FFT order).

        For closed-form families the coefficients are exact; tabulated
        kernels are zero-padded or truncated.  Nyquist indices are zero.
        """
        m = self.n if m is None else check_grid_size(m)
        if self.is_analytic:
            c = _fourier(self.family, self.params, self.dim, wavenumbers(m, self.dim))
            return _strip_nyquist(c.astype(float))
        return np.real(_strip_nyquist(_resize_coeffs(self.spectral_table.coeffs, m)))

    def fourier_at(self, kvec):
        """Coefficient at integer modes ``kvec`` of shape (dim, ...)."""
        kvec = np.asarray(kvec)
        if self.is_analytic:
            return _fourier(self.family, self.params, self.dim, kvec)
        c = self.spectral_table.coeffs
        inside = np.all(np.abs(kvec) < self.n // 2, axis=0)
        idx = tuple(np.mod(kvec[a], self.n) for a in range(self.dim))
        return np.where(inside, np.real(c[idx]), 0.0)

    def band_limited(self, m=None):
        """Tabulated kernel equal to the truncated Fourier series at size m."""
        m = self.n if m is None else m
        return tabulated_kernel(self.coefficients(m), meta=self.meta,
                                params={"source": self.label})

    def _eval(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape[-1] != self.dim:
            if self.dim == 1:
                r = r[..., None]
            else:
                raise ValueError(f"displacement must have last axis {self.dim}")
        r = minimal_image(r)
        if self.is_analytic:
            return _pointwise(self.family, self.params, self.dim)(r)
        return self._interp(r)

    def value(self, r):
        """V at displacement(s) ``r`` (last axis = dim)."""
        return self._eval(r)[0]

    def gradient(self, r):
        """grad V at displacement(s) ``r``, shape ``r.shape``."""
        return self._eval(r)[1]

    def value_exact(self, r):
        """V by direct evaluation; tabulated kernels sum their series."""
        if self.is_analytic:
            return self.value(r)
        from .torus import evaluate_series
        r = np.asarray(r, dtype=float)
        shape = r.shape[:-1] if (self.dim > 1 or r.shape[-1:] == (1,)) else r.shape
        return evaluate_series(self.spectral_table.coeffs, r.reshape(-1, self.dim)).reshape(shape)

    # interpolation tables for tabulated kernels
    @cached_property
    def _fine(self):
        c = self.spectral_table.coeffs
        if self.dim == 1:
            L = max(16 * self.n, 4096)
        else:
            L = min(max(8 * self.n, 512), 2048)
        cf = _strip_nyquist(_resize_coeffs(c, L))
        kv = wavenumbers(L, self.dim)
        tot = L ** self.dim
        v = np.real(np.fft.ifftn(cf)) * tot
        grads = [np.real(np.fft.ifftn(2j * np.pi * kv[a] * cf)) * tot for a in range(self.dim)]
        out = {"L": L, "v": v, "g": grads}
        if self.dim == 1:
            out["h2"] = np.real(np.fft.ifftn(-(2 * np.pi * kv[0]) ** 2 * cf)) * tot
        return out

    def _interp(self, r):
        t = self._fine
        L = t["L"]
        if self.dim == 1:
            x = np.mod(r[..., 0], 1.0) * L
            i0 = np.floor(x).astype(np.int64)
            s = x - i0
            i0 %= L
            i1 = (i0 + 1) % L
            hstep = 1.0 / L
            v = _hermite(t["v"][i0], t["v"][i1], t["g"][0][i0], t["g"][0][i1], s, hstep)
            g = _hermite(t["g"][0][i0], t["g"][0][i1], t["h2"][i0], t["h2"][i1], s, hstep)
            hess = (1 - s) * t["h2"][i0] + s * t["h2"][i1]
            return v, g[..., None], hess[..., None, None]
        x = np.mod(r, 1.0) * L
        i0 = np.floor(x).astype(np.int64)
        s = x - i0
        i0 %= L
        i1 = (i0 + 1) % L
        a, b = s[..., 0], s[..., 1]

        def bil(f):
            return ((1 - a) * (1 - b) * f[i0[..., 0], i0[..., 1]]
                    + a * (1 - b) * f[i1[..., 0], i0[..., 1]]
                    + (1 - a) * b * f[i0[..., 0], i1[..., 1]]
                    + a * b * f[i1[..., 0], i1[..., 1]])
        return bil(t["v"]), np.stack([bil(g) for g in t["g"]], axis=-1), None

    def hessian(self, r, step=None):
        """Hessian of V; closed form where available, else central differences."""
        r = np.asarray(r, dtype=float)
        out = self._eval(r)[2]
        if out is not None:
            return out
        r = r if r.shape[-1] == self.dim else r[..., None]
        step = self.h * 1e-3 if step is None else step
        cols = []
        for a in range(self.dim):
            e = np.zeros(self.dim)
            e[a] = step
            cols.append((self.gradient(r + e) - self.gradient(r - e)) / (2 * step))
        return np.stack(cols, axis=-1)


def _hermite(f0, f1, d0, d1, s, h):
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * h * d1)


def build_kernel(family, params=None, n=256, dim=1, sigma_mode="fixed"):
    """Build a kernel with paired grid and spectral tables.

    Parameters
    ----------
    family : str
        One of ``periodic-log``, ``riesz``, ``cosine-test``, ``pks``.
    params : dict, optional
        ``{"s": ...}`` for riesz, ``{"lambda": ...}`` for pks.
    n : int
        Grid size per axis, a power of two.
    dim : int
        1 or 2.
    sigma_mode : str
        Diffusion regime recorded in the metadata.

    Returns
    -------
    KernelSpec
    """
    params = dict(params or {})
    _validate_params(family, params, dim)
    if family == "tabulated":
        raise ValueError("use tabulated_kernel() or import_table() for tabulated kernels")
    n = check_grid_size(n)
    if n < 4:
        raise ValueError("grid size must be at least 4")
    kvec = wavenumbers(n, dim)
    coeffs = _strip_nyquist(_fourier(family, params, dim, kvec).astype(float))
    r = grid_displacements(n, dim)
    origin = (0,) * dim
    with np.errstate(divide="ignore", invalid="ignore"):
        v = _pointwise(family, params, dim)(r)[0]
    v = np.array(v, dtype=float)
    if not np.isfinite(v[origin]):
        v[origin] = float(np.sum(coeffs))
    # symmetrize the floating-point evaluation exactly
    v = _even_part(v)
    meta = _default_meta(family, params, dim, sigma_mode)
    return KernelSpec(family, dim, n, params, GridField(v), SpectralCoeffs(coeffs), meta)


def _even_part(v):
    flipped = v
    for ax in range(v.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return 0.5 * (v + flipped)


def tabulated_kernel(coeffs, meta=None, params=None, sigma_mode="fixed"):
    """Kernel defined by an FFT-ordered array of real Fourier coefficients.

    The coefficients are symmetrized (even, real), the constant mode and the
    Nyquist indices are zeroed, and the grid table is their synthesis.
    """
    c = np.real(np.asarray(coeffs, dtype=complex))
    n, dim = c.shape[0], c.ndim
    check_grid_size(n)
    c = _strip_nyquist(_even_part(c))
    c[(0,) * dim] = 0.0
    grid = np.real(np.fft.ifftn(c)) * c.size
    grid = _even_part(grid)
    if meta is None:
        sign = "repulsive" if c.min() >= -1e-10 else "attractive"
        meta = KernelMeta(0.0, 0.0, np.inf, 0.5 * dim, sign, sigma_mode, False)
    return KernelSpec("tabulated", dim, n, dict(params or {}), GridField(grid),
                      SpectralCoeffs(c), meta)


def zero_kernel(n=64, dim=1):
    """The identically zero interaction."""
    return tabulated_kernel(np.zeros((n,) * dim), params={"source": "zero"})


def eval_force(spec, r, r_min=None):
    """Pair force ``K(r) = -grad V(r)`` with the singularity guard.

    For singular kernels, displacements shorter than ``r_min`` (default h/2)
    are evaluated at ``r_min`` along the same direction and a zero
    displacement gets zero force.  Smooth kernels are evaluated directly.

    Returns
    -------
    force : ndarray, shape ``r.shape``
    n_capped : int
        Number of displacements the guard acted on.
    """
    r = np.asarray(r, dtype=float)
    if spec.dim == 1 and r.shape[-1:] != (1,):
        r = r[..., None]
    r = minimal_image(r)
    if not spec.meta.singular:
        return -spec.gradient(r), 0
    r_min = 0.5 * spec.h if r_min is None else r_min
    norm = np.sqrt(np.sum(r * r, axis=-1, keepdims=True))
    capped = norm < r_min
    n_capped = int(np.count_nonzero(capped))
    if n_capped:
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > 0, r_min / norm, 0.0)
        r = np.where(capped, r * scale, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        force = -spec.gradient(r)
    force = np.where(norm == 0, 0.0, force)
    return force, n_capped


def kernel_from_label(label, n=256, dim=1, sigma_mode="fixed"):
    """Parse ``family[:param]`` strings such as ``riesz:0.5`` or ``pks:0.5``."""
    name, _, arg = label.partition(":")
    name = name.strip()
    if name == "zero":
        return zero_kernel(n, dim)
    params = {}
    if name == "riesz":
        params["s"] = float(arg) if arg else 0.5
    elif name == "pks":
        params["lambda"] = float(arg) if arg else 1.0
    elif arg:
        raise ValueError(f"family {name!r} takes no parameter")
    return build_kernel(name, params, n=n, dim=dim, sigma_mode=sigma_mode)
