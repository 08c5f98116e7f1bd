"""Numerical checks of the structural assumptions on an interaction kernel.

Each check returns a status (``pass``, ``fail``, ``not-applicable`` or
``inconclusive`` when the grid is too coarse to decide),
the measured constant, the grid location where the constant is attained
and the resolution used.  Failures are reported, never raised.

Pointwise checks use grid nodes with ``|x| >= 2h``.  The ratio checks that
divide by V (gradient-over-value bound and doubling) are restricted to the
near-singular region ``|V| >= 1`` and use the nonnegative lift
``V + c`` with ``c = -min V``: a zero-mean periodic kernel changes sign
away from the origin, and the additive constant is a convention.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .torus import grid_displacements, wavenumbers


@dataclass
class HypothesisEntry:
    name: str
    status: str
    constant: float
    location: tuple
    n: int
    note: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class HypothesisReport:
    kernel: str
    sign: str
    n: int
    entries: dict

    def __getitem__(self, name):
        return self.entries[name]

    def to_dict(self):
        out = {"kernel": self.kernel, "sign": self.sign, "n": self.n, "entries": {}}
        for key, e in self.entries.items():
            d = asdict(e)
            d["constant"] = _jsonable(d["constant"])
            d["location"] = [float(v) for v in d["location"]]
            d["extra"] = {k: _jsonable(v) for k, v in d["extra"].items()}
            out["entries"][key] = d
        return out


def _jsonable(v):
    v = float(v)
    if np.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def _argmax_finite(q):
    q = np.where(np.isnan(q), np.inf, q)
    i = int(np.argmax(q))
    return i, float(q[i])


def _lp_norm(spec, m, p):
    """Midpoint-rule L^p norm on an m-grid shifted off the singular node."""
    r = grid_displacements(m, spec.dim).reshape(-1, spec.dim) + 0.5 / m
    v = np.abs(spec.value(r))
    if np.isinf(p):
        return float(np.max(v))
    return float(np.mean(v ** p) ** (1.0 / p))


def check_hypotheses(spec):
    """Evaluate the kernel assumptions on the grid of ``spec``.

    Parameters
    ----------
    spec : KernelSpec

    Returns
    -------
    HypothesisReport
    """
    n, dim, meta = spec.n, spec.dim, spec.meta
    h = 1.0 / n
    r = grid_displacements(n, dim).reshape(-1, dim)
    rad = np.sqrt(np.sum(r * r, axis=1))
    off = rad >= 2 * h - 1e-15
    r_off, rad_off = r[off], rad[off]
    with np.errstate(all="ignore"):
        v_off = spec.value(r_off)
        g_off = spec.gradient(r_off)
        hess_off = spec.hessian(r_off)
    gnorm = np.sqrt(np.sum(g_off ** 2, axis=-1))
    hnorm = np.sqrt(np.sum(hess_off.reshape(len(r_off), -1) ** 2, axis=-1))
    entries = {}

    # integrability and evenness
    table = spec.grid_table.values
    flipped = table
    for ax in range(dim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    even_defect = float(np.max(np.abs(table - flipped)))
    p = meta.p if np.isfinite(meta.p) else np.inf
    norms = [_lp_norm(spec, m, p) for m in (n, 2 * n, 4 * n)]
    d1, d2 = abs(norms[1] - norms[0]), abs(norms[2] - norms[1])
    settling = d2 <= 0.98 * d1 + 1e-12 * max(norms[2], 1.0)
    entries["hyp01"] = HypothesisEntry(
        "hyp01", "pass" if (even_defect == 0.0 and settling and np.isfinite(norms[2])) else "fail",
        norms[2], (), n, f"L^{p:g} norm at n, 2n, 4n",
        {"norm_n": norms[0], "norm_2n": norms[1], "norm_4n": norms[2],
         "even_defect": even_defect})

    # Fourier sign
    coeffs = np.real(spec.spectral_table.coeffs)
    imin = int(np.argmin(coeffs))
    kv = wavenumbers(n, dim).reshape(dim, -1)[:, imin]
    cmin = float(coeffs.flat[imin])
    entries["hyp03"] = HypothesisEntry(
        "hyp03", "pass" if cmin >= -1e-10 else "fail", cmin, tuple(kv), n,
        f"sign={meta.sign}")

    # pointwise derivative bounds
    c1 = gnorm * rad_off ** meta.k
    c2 = hnorm * rad_off ** meta.k_prime
    i1, m1 = _argmax_finite(c1)
    i2, m2 = _argmax_finite(c2)
    ok = np.isfinite(m1) and np.isfinite(m2)
    entries["hyp001"] = HypothesisEntry(
        "hyp001", "pass" if ok else "fail", m1, tuple(r_off[i1]), n,
        f"k={meta.k:g}, k'={meta.k_prime:g}",
        {"hessian_constant": m2, "hessian_location": float(rad_off[i2])})

    blows_up = meta.singular and v_off[np.argmin(rad_off)] > 1.0
    near = (v_off >= 1.0) if blows_up else (np.abs(v_off) >= 1.0)
    lift = max(0.0, -float(np.min(v_off))) if blows_up else 0.0
    v_lift = v_off + lift
    if not meta.singular or not np.any(near):
        entries["hyp02"] = HypothesisEntry("hyp02", "not-applicable", np.nan, (), n,
                                           "bounded kernel: no near-singular region")
    else:
        q = gnorm[near] * rad_off[near] / np.abs(v_lift[near])
        i, m = _argmax_finite(q)
        entries["hyp02"] = HypothesisEntry("hyp02", "pass" if np.isfinite(m) else "fail",
                                           m, tuple(r_off[near][i]), n, "region |V| >= 1, lifted V")

    entries["hyp04"] = _doubling(v_lift, r_off, rad_off, near, meta, n)
    entries["hyp04"].extra["lift"] = lift
    entries["hyp05"] = _fourier_regularity(spec)
    f_sigma = 0.0 if meta.sigma_mode == "vanishing" else 1.0
    entries["hyp06"] = HypothesisEntry("hyp06", "pass", f_sigma, (), n,
                                       f"sigma_mode={meta.sigma_mode}")
    return HypothesisReport(spec.label, meta.sign, n, entries)


def _doubling(v_off, r_off, rad_off, near, meta, n):
    if not meta.singular:
        return HypothesisEntry("hyp04", "not-applicable", np.nan, (), n,
                               "V bounded near the origin")
    order = np.argsort(rad_off, kind="stable")
    rs, vs = rad_off[order], v_off[order]
    # V must grow toward the origin
    far = vs[rs > 0.25]
    grows = vs[0] > 1.0 + np.min(vs) and (far.size == 0 or vs[0] > np.max(far))
    if not grows:
        return HypothesisEntry("hyp04", "fail", np.inf, (), n, "V does not blow up at 0")
    cummin = np.minimum.accumulate(vs)
    idx = np.where(near)[0]
    if idx.size == 0:
        return HypothesisEntry("hyp04", "inconclusive", np.nan, (), n,
                               "no grid node reaches the region V >= 1")
    j = np.searchsorted(rs, 2.0 * rad_off[idx] * (1 + 1e-12), side="right") - 1
    vmin = cummin[j]
    with np.errstate(divide="ignore"):
        ratio = np.where(vmin > 0, v_off[idx] / vmin, np.inf)
    i, m = _argmax_finite(ratio)
    return HypothesisEntry("hyp04", "pass" if np.isfinite(m) else "fail", m,
                           tuple(r_off[idx][i]), n, "region V >= 1, pairs |y| <= 2|x|")


def _fourier_regularity(spec):
    """Local difference quotient of the Fourier table on neighbouring modes."""
    n, dim, meta = spec.n, spec.dim, spec.meta
    f_sigma = 0.0 if meta.sigma_mode == "vanishing" else 1.0
    kv = wavenumbers(n, dim)
    vhat = spec.fourier_at(kv.astype(int))
    knorm = np.sqrt(np.sum(kv ** 2, axis=0))
    best, where = 0.0, ()
    for a in range(dim):
        zeta_ok = (kv[a] < n // 2 - 1) & (kv[a] > -n // 2) & (knorm > 0)
        for b in range(dim):
            if b != a:
                zeta_ok &= np.abs(kv[b]) < n // 2
        shifted = np.roll(vhat, -1, axis=a)
        xi = kv.copy()
        xi[a] = xi[a] + 1
        xi_ok = np.sqrt(np.sum(xi ** 2, axis=0)) > 0
        mask = zeta_ok & xi_ok
        denom = vhat + f_sigma / (1.0 + knorm ** (dim - meta.alpha))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(shifted - vhat) * (1.0 + knorm) / denom
        q = np.where(denom > 0, q, np.inf)
        q = np.where(mask, q, 0.0)
        i = int(np.argmax(q))
        if q.flat[i] > best or not np.isfinite(q.flat[i]):
            best = float(q.flat[i])
            where = tuple(kv.reshape(dim, -1)[:, i])
            if not np.isfinite(best):
                break
    return HypothesisEntry("hyp05", "pass" if np.isfinite(best) else "fail", best, where, n,
                           f"alpha={meta.alpha:g}, f(sigma)={f_sigma:g}, |xi-zeta|=1")
