"""Smooth approximation of a singular repulsive kernel with nonnegative spectrum.

Construction
------------
``K1 = phi * phi`` is the autocorrelation of the normalized bump
``phi(x) = exp(-1 / (1 - |2x|^2))`` on ``|x| < 1/2``, so ``K1`` is supported
in the unit ball, has unit mass and ``K1_hat = |phi_hat|^2 >= 0``.  For a
decreasing list of scales ``delta_1 > ... > delta_M`` the smoothed kernel is

    W = (1/M) sum_i K1_{delta_i} * V,      V_eps = W / (1 + 2 C eps),

with ``K1_delta(x) = delta^{-d} K1(x / delta)``.  All convolutions are done
on the Fourier side, ``K1_delta_hat(k) = K1_hat(delta k)``.

Zero-mean kernels take negative values away from the origin, and a
rescaling by ``1 / (1 + 2 C eps)`` only lowers a nonnegative function.  The
construction therefore runs on the lift ``V + c`` with ``c = -min V``, and
the results are shifted back by ``c``.  Fourier coefficients at k != 0 are
unaffected by the lift.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import j0

from .hypotheses import check_hypotheses
from .kernels import tabulated_kernel
from .torus import GridField, check_grid_size, grid_displacements, wavenumbers

# K1_hat(xi) is below 1e-15 for |xi| > XI_CUT
XI_CUT = 64.0
_XI_TABLE = 96.0
MAX_FINE_1D = 2 ** 22
MAX_FINE_2D = 2 ** 11


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - (2.0 * r[inside]) ** 2))
    return out


@lru_cache(maxsize=4)
def _phi_hat_table(dim):
    """Spline of the continuous transform of the normalized bump."""
    nodes, weights = np.polynomial.legendre.leggauss(3000)
    r = 0.25 * (nodes + 1.0)
    w = 0.25 * weights
    b = _bump(r)
    xi = np.arange(0.0, _XI_TABLE + 1e-9, 1.0 / 64.0)
    if dim == 1:
        mass = 2.0 * np.sum(w * b)
        vals = 2.0 * (np.cos(2 * np.pi * np.outer(xi, r)) @ (w * b)) / mass
    else:
        mass = 2 * np.pi * np.sum(w * b * r)
        vals = 2 * np.pi * (j0(2 * np.pi * np.outer(xi, r)) @ (w * b * r)) / mass
    return CubicSpline(xi, vals)


def mollifier_hat(xi, dim=1):
    """Continuous Fourier transform ``K1_hat(|xi|) = |phi_hat(|xi|)|^2``."""
    xi = np.abs(np.asarray(xi, dtype=float))
    spline = _phi_hat_table(dim)
    out = np.zeros_like(xi)
    inside = xi <= _XI_TABLE
    out[inside] = spline(xi[inside]) ** 2
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Sampled mollifier profile on the box [-1, 1)^d.

    Attributes
    ----------
    dim : int
    m : int
        Samples per unit length; the profile has ``2m`` points per axis.
    profile : ndarray
        Discrete autocorrelation of the normalized bump samples, centred
        at index ``m`` on every axis.
    """

    dim: int
    m: int
    profile: np.ndarray = field(repr=False)

    @property
    def spacing(self):
        return 1.0 / self.m

    def coordinates(self):
        x = (np.arange(2 * self.m) - self.m) / self.m
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"), axis=-1)

    def mass(self):
        return float(np.sum(self.profile) * self.spacing ** self.dim)

    def hat(self, xi):
        return mollifier_hat(xi, self.dim)


def build_mollifier(dim=1, m=256):
    """Sample ``K1 = phi * phi`` exactly as a discrete autocorrelation."""
    m = check_grid_size(m)
    hbox = 1.0 / m
    x = (np.arange(2 * m) - m) * hbox
    mesh = np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1)
    phi = _bump(np.sqrt(np.sum(mesh ** 2, axis=-1)))
    phi /= np.sum(phi) * hbox ** dim
    # phi vanishes outside |x| < 1/2, so a 2m-periodic correlation has no wrap
    ph = np.fft.fftn(np.fft.ifftshift(phi))
    prof = np.real(np.fft.fftshift(np.fft.ifftn(np.abs(ph) ** 2))) * hbox ** dim
    rad = np.sqrt(np.sum(mesh ** 2, axis=-1))
    prof[rad >= 1.0] = 0.0
    return MollifierSpec(dim, m, prof)


# ------------------------------------------------------------ fine-grid tools

def _lift_constant(base):
    r = grid_displacements(base.n, base.dim).reshape(-1, base.dim)
    rad = np.sqrt(np.sum(r * r, axis=1))
    v = base.value(r[rad > 0])
    return max(0.0, -float(np.min(v)))


def min_resolvable_delta(dim):
    cap = MAX_FINE_1D if dim == 1 else MAX_FINE_2D
    return 2.0 * XI_CUT / cap


def fine_size(delta_min, n_out, dim):
    """Internal grid size resolving scale ``delta_min`` (None if too small)."""
    need = 2.0 * XI_CUT / delta_min
    m = max(8 * n_out, 2 ** int(np.ceil(np.log2(need))))
    cap = MAX_FINE_1D if dim == 1 else MAX_FINE_2D
    return m if m <= cap else None


def smoothed_spectrum(base, deltas, m):
    """Coefficients of ``(1/M) sum_i K1_{delta_i} * V`` on an m-grid (k != 0)."""
    kv = wavenumbers(m, base.dim)
    knorm = np.sqrt(np.sum(kv ** 2, axis=0))
    avg = np.zeros_like(knorm)
    for d in deltas:
        avg += mollifier_hat(d * knorm, base.dim)
    avg /= len(deltas)
    return base.coefficients(m) * avg


def _synth(coeffs, shift=0.0):
    """Grid values of a coefficient array, optionally at nodes shifted by ``shift``."""
    m, dim = coeffs.shape[0], coeffs.ndim
    c = coeffs
    if shift:
        kv = wavenumbers(m, dim)
        c = c * np.exp(2j * np.pi * shift * np.sum(kv, axis=0))
    return np.real(np.fft.ifftn(c)) * c.size


def _synth_grad(coeffs, shift=0.0):
    m, dim = coeffs.shape[0], coeffs.ndim
    kv = wavenumbers(m, dim)
    c = coeffs * np.exp(2j * np.pi * shift * np.sum(kv, axis=0)) if shift else coeffs
    return np.stack([np.real(np.fft.ifftn(2j * np.pi * kv[a] * c)) * c.size
                     for a in range(dim)], axis=-1)


def _radial_order(m, dim, shift=0.0):
    r = grid_displacements(m, dim).reshape(-1, dim) + shift
    r = r - np.floor(r + 0.5)
    return r, np.sqrt(np.sum(r * r, axis=1))


# ------------------------------------------------------------ annulus test

def _ball_integral(fun, dim, r0, r1):
    """Integral of ``fun`` over the shell ``r0 <= |x| <= r1``."""
    if dim == 1:
        def g(x):
            return fun(np.array([[x]]))[0] + fun(np.array([[-x]]))[0]
        val, _ = integrate.quad(g, r0, r1, limit=400, epsabs=0.0, epsrel=1e-10)
        return val
    theta = 2 * np.pi * (np.arange(64) + 0.5) / 64

    def ring(r):
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        return r * np.mean(fun(pts)) * 2 * np.pi
    val, _ = integrate.quad(ring, r0, r1, limit=400, epsabs=0.0, epsrel=1e-10)
    return val


def annulus_masses(base, delta, lift=None):
    """Return ``(ball, annulus)`` integrals of the lifted kernel.

    ``ball`` integrates over ``|x| <= delta`` and ``annulus`` over
    ``delta/2 <= |x| <= delta``; adaptive quadrature handles the
    integrable singularity at the origin.
    """
    lift = _lift_constant(base) if lift is None else lift

    def fun(r):
        return base.value(r) + lift
    inner = _ball_integral(fun, base.dim, 0.0, 0.5 * delta)
    ann = _ball_integral(fun, base.dim, 0.5 * delta, delta)
    return inner + ann, ann


def annulus_test(base, delta, C, lift=None):
    ball, ann = annulus_masses(base, delta, lift)
    return ball <= C * ann, ball, ann


# ------------------------------------------------------------ compare scale

def compare_scale(base, moll, delta, lift=None):
    """Largest radius r with ``K1_delta * V <= V`` on all fine nodes ``2h <= |x| <= r``.

    The comparison grid is the internal fine grid that resolves ``delta``.

    Returns
    -------
    r : float
        0.0 when the innermost admissible node already violates the bound.
    h_fine : float
        Spacing of the comparison grid.
    """
    dim = base.dim
    m = fine_size(delta, base.n, dim)
    if m is None:
        raise ValueError(f"delta={delta:g} is below the resolvable scale")
    if moll is not None and moll.dim != dim:
        raise ValueError("mollifier dimension mismatch")
    lift = _lift_constant(base) if lift is None else lift
    # for a singular convex profile the first violation sits inside |x| <= delta
    r, rad = _radial_order(m, dim)
    hf = 1.0 / m
    sel = (rad >= 2 * hf - 1e-15) & (rad <= 4 * delta)
    w = _synth(smoothed_spectrum(base, [delta], m)).reshape(-1)[sel]
    v = base.value(r[sel])
    rs = rad[sel]
    order = np.argsort(rs, kind="stable")
    rs, bad = rs[order], (w - v)[order] > 0
    if not np.any(bad):
        return float(rs[-1]), hf
    first = int(np.argmax(bad))
    if first == 0:
        return 0.0, hf
    # all nodes at radii strictly below the first violation radius are fine
    ok_r = rs[:first]
    ok_r = ok_r[ok_r < rs[first]]
    return (float(ok_r[-1]) if ok_r.size else 0.0), hf


# ------------------------------------------------------------ sequence

@dataclass
class DeltaSequence:
    deltas: list
    requested: int
    truncated: bool
    f_values: list
    bounds: list
    annulus: list
    notes: list


def _admissible_gate(base):
    if base.meta.sign != "repulsive" or base.meta.singular is False:
        raise ValueError(f"{base.label}: regularization needs a singular repulsive kernel "
                         "(V must blow up at the origin)")
    rep = check_hypotheses(base)
    for name in ("hyp01", "hyp03", "hyp04"):
        if rep[name].status != "pass":
            raise ValueError(f"{base.label}: admissibility check {name} is {rep[name].status}")
    return rep


def select_delta_sequence(base, C, eps, M, moll=None, lift=None, gate=True):
    """Choose scales by the annulus test and the recursion bound.

    The first scale starts at ``eps^2 / C`` and each next one at
    ``min(f(delta_i), delta_i^(2k))``; candidates are halved until the
    annulus test passes.  Scales below the resolvable limit end the
    sequence early (``truncated=True``).
    """
    if C <= 1:
        raise ValueError("doubling constant C must exceed 1")
    if gate:
        _admissible_gate(base)
    lift = _lift_constant(base) if lift is None else lift
    dmin = max(min_resolvable_delta(base.dim), 2.0 / MAX_FINE_1D)
    k = base.meta.k
    out = DeltaSequence([], M, False, [], [], [], [])
    bound = eps * eps / C
    for i in range(M):
        cand = bound
        passed = False
        for _ in range(64):
            if cand < dmin:
                break
            ok, ball, ann = annulus_test(base, cand, C, lift)
            if ok:
                passed = True
                break
            cand *= 0.5
        if not passed:
            out.truncated = True
            out.notes.append(f"scale {i + 1}: no resolvable admissible delta below {bound:.3g}")
            break
        out.deltas.append(cand)
        out.bounds.append(bound)
        out.annulus.append((ball, ann))
        if i == M - 1:
            break
        nxt = cand ** (2 * k)
        if nxt < dmin:
            out.truncated = True
            out.notes.append(f"scale {i + 2}: delta^(2k)={nxt:.3g} below resolvable {dmin:.3g}")
            break
        f, _ = compare_scale(base, moll, cand, lift)
        out.f_values.append(f)
        bound = min(f, nxt)
        if bound <= 0:
            out.truncated = True
            out.notes.append(f"scale {i + 2}: compare_scale returned 0")
            break
    return out


def recursion_holds(seq, eps, C, k):
    """Check the stored scales against the construction rules."""
    d = seq.deltas
    if not d or d[0] > eps * eps / C * (1 + 1e-12):
        return False
    for i in range(len(d) - 1):
        if not d[i + 1] < d[i]:
            return False
        if d[i + 1] > min(seq.f_values[i], d[i] ** (2 * k)) * (1 + 1e-12):
            return False
    return all(ball <= C * ann for ball, ann in seq.annulus)


# ------------------------------------------------------------ build

@dataclass
class RegularizedKernel:
    """Result of :func:`build_regularized`.

    ``W_eps`` and ``V_eps`` are grid samples in the additive frame of the
    base kernel; ``kernel`` is the zero-mean band-limited table usable
    by the solvers.
    """

    base: object
    epsilon: float
    C: float
    deltas: list
    M: int
    M_requested: int
    truncated: bool
    lift: float
    W_eps: GridField
    V_eps: GridField
    C_doubling: float
    sequence: DeltaSequence
    property_report: dict
    kernel: object = field(repr=False)


def build_regularized(base, eps, C=4.0, moll=None, delta_sweep=(1 / 8, 1 / 16, 1 / 32)):
    """Regularize ``base`` at level ``eps``.

    Parameters
    ----------
    base : KernelSpec
        Singular repulsive kernel; its grid size is the output grid.
    eps : float
        Target accuracy in (0, 1/4].
    C : float
        Doubling constant of the annulus test and of the rescaling.
    moll : MollifierSpec, optional
    delta_sweep : sequence of float
        Radii for the restricted L1 bounds.

    Returns
    -------
    RegularizedKernel
    """
    if not 0.0 < eps <= 0.25:
        raise ValueError("epsilon must lie in (0, 1/4]")
    rep = _admissible_gate(base)
    lift = _lift_constant(base)
    M = int(np.ceil(1.0 / eps - 1e-12))
    seq = select_delta_sequence(base, C, eps, M, moll, lift, gate=False)
    if not seq.deltas:
        raise ValueError("no resolvable scale: " + "; ".join(seq.notes))
    deltas = seq.deltas
    dim, n = base.dim, base.n
    m = fine_size(min(deltas), n, dim)
    scale = 1.0 + 2.0 * C * eps
    spec_w = smoothed_spectrum(base, deltas, m)

    # grid samples at output nodes (sampling the fine grid)
    stride = m // n
    w_fine = _synth(spec_w)
    sl = tuple([slice(None, None, stride)] * dim)
    w_nodes = w_fine[sl]
    w_half = _synth(smoothed_spectrum(base, deltas, m // 2))[tuple([slice(None, None, stride // 2)] * dim)]
    tol_grid = 2.0 * float(np.max(np.abs(w_nodes - w_half)))
    w_lift = w_nodes + lift
    v_eps = w_lift / scale - lift

    # output coefficients
    c_out = base.coefficients(n) * _avg_hat(deltas, n, dim) / scale
    kern = tabulated_kernel(c_out, params={"source": base.label, "epsilon": eps, "C": C})
    kern = _with_meta(kern, base.meta)

    report = {}
    # (a) spectral sign in the lifted frame
    fine_min = float(np.min(spec_w.real[np.sum(wavenumbers(m, dim) ** 2, axis=0) > 0]))
    report["a_min_mode"] = min(fine_min / scale, lift / scale)

    # (b) pointwise domination at output nodes off the diagonal
    r_out, rad_out = _radial_order(n, dim)
    off = rad_out >= 2.0 / n - 1e-15
    v_out = base.value(r_out[off])
    diff = v_eps.reshape(-1)[off] - v_out
    report["b_max_excess"] = float(np.max(diff))
    report["b_location"] = float(rad_out[off][int(np.argmax(diff))])
    report["tol_grid"] = tol_grid

    # (c) L1 distances on the fine midpoint grid
    hf = 1.0 / m
    r_mid, rad_mid = _radial_order(m, dim, shift=0.5 * hf)
    w_mid = _synth(spec_w, shift=0.5 * hf).reshape(-1)
    v_mid = base.value(r_mid)
    ve_mid = (w_mid + lift) / scale - lift
    gap = np.abs(ve_mid - v_mid)
    report["c_L1"] = float(np.mean(gap))
    g_mid = _synth_grad(spec_w, shift=0.5 * hf).reshape(-1, dim) / scale
    gv_mid = base.gradient(r_mid)
    ggap = np.sqrt(np.sum((g_mid - gv_mid) ** 2, axis=1))
    sweep = {}
    for d in delta_sweep:
        far = rad_mid >= d
        sweep[float(d)] = {"L1": float(np.sum(gap[far]) / gap.size),
                           "grad_L1": float(np.sum(ggap[far]) / ggap.size)}
    report["c_sweep"] = sweep
    excess_mid = (ve_mid - v_mid)[rad_mid >= 2.0 / n]
    report["b_max_excess_fine"] = float(np.max(excess_mid))
    report["d_recursion"] = recursion_holds(seq, eps, C, base.meta.k)
    report["M"] = len(deltas)
    report["M_requested"] = M
    report["fine_grid"] = m

    return RegularizedKernel(base, eps, C, list(deltas), len(deltas), M, seq.truncated, lift,
                             GridField(w_lift - lift), GridField(v_eps),
                             float(rep["hyp04"].constant), seq, report, kern)


def _avg_hat(deltas, n, dim):
    kv = wavenumbers(n, dim)
    knorm = np.sqrt(np.sum(kv ** 2, axis=0))
    return sum(mollifier_hat(d * knorm, dim) for d in deltas) / len(deltas)


def _with_meta(kern, meta):
    from dataclasses import replace
    from .kernels import KernelMeta
    return replace(kern, meta=KernelMeta(meta.k, meta.k_prime, meta.p, meta.alpha,
                                         "repulsive", meta.sigma_mode, False))
