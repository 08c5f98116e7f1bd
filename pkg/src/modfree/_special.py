"""Special functions behind the closed-form periodic kernels."""

import numpy as np

# B_2, B_4, ..., B_18
_BERNOULLI = np.array([1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730,
                       7 / 6, -3617 / 510, 43867 / 798])


def hurwitz_zeta(s, a, terms=16):
    """Hurwitz zeta function ``sum_{m>=0} (a+m)^{-s}`` by Euler-Maclaurin.

    Valid for real ``s`` not equal to 1 (analytic continuation for s < 1)
    and ``a >= 1``; accuracy is close to double precision for s in (0, 4).

    Parameters
    ----------
    s : float
    a : array_like
        Shift parameter(s), at least 1.
    terms : int
        Number of leading terms summed explicitly.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 1.0):
        raise ValueError("hurwitz_zeta: a must be >= 1")
    if s == 1.0:
        raise ValueError("hurwitz_zeta: pole at s = 1")
    m = np.arange(terms)
    head = np.sum((a[..., None] + m) ** (-s), axis=-1)
    b = a + terms
    tail = b ** (1.0 - s) / (s - 1.0) + 0.5 * b ** (-s)
    # rising factorial s(s+1)...(s+2j-2) / (2j)!
    poch = s
    fact = 2.0
    for j, bern in enumerate(_BERNOULLI, start=1):
        tail = tail + bern / fact * poch * b ** (-s - 2 * j + 1)
        poch *= (s + 2 * j - 1) * (s + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


def periodic_riesz(x, s):
    """Zero-mean periodization of ``|x|^{-s}`` on the unit circle.

    Returns value, first and second derivative at ``x`` (nonzero, any real).
    """
    x = np.asarray(x, dtype=float)
    y = np.mod(x, 1.0)
    y = np.where(y > 0.5, 1.0 - y, y)
    sgn = np.where(np.mod(x, 1.0) > 0.5, -1.0, 1.0)
    z = 1.0 - y
    v = y ** (-s) + z ** (-s) + hurwitz_zeta(s, 1.0 + y) + hurwitz_zeta(s, 1.0 + z)
    d1 = -s * (y ** (-s - 1) - z ** (-s - 1)
               + hurwitz_zeta(s + 1, 1.0 + y) - hurwitz_zeta(s + 1, 1.0 + z))
    c2 = s * (s + 1)
    d2 = c2 * (y ** (-s - 2) + z ** (-s - 2)
               + hurwitz_zeta(s + 2, 1.0 + y) + hurwitz_zeta(s + 2, 1.0 + z))
    return v, sgn * d1, d2


def riesz_fourier(k, s):
    """Fourier coefficients of :func:`periodic_riesz` (k = 0 gives 0)."""
    from scipy.special import gamma

    k = np.abs(np.asarray(k, dtype=float))
    amp = 2.0 * gamma(1.0 - s) * np.sin(np.pi * s / 2.0)
    out = np.zeros_like(k)
    nz = k > 0
    out[nz] = amp * (2.0 * np.pi * k[nz]) ** (s - 1.0)
    return out


def periodic_green2d(x, y, images=8):
    """Zero-mean Green's function of ``-Laplace`` on the unit square torus.

    Solves ``-Lap G = delta - 1`` and returns ``(G, dG/dx, dG/dy)``.
    Fourier coefficients are ``1 / (4 pi^2 |k|^2)`` for k != 0.
    Uses the rapidly converging product expansion along x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y = y - np.floor(y + 0.5)
    ay = np.abs(y)
    sy = np.where(y < 0, -1.0, 1.0)
    ex = np.exp(2j * np.pi * x)
    g = 0.5 * ay * ay - 0.5 * ay + 1.0 / 12.0
    gx = np.zeros_like(g)
    gy_abs = ay - 0.5
    log_sum = np.zeros_like(g)
    for m in range(images):
        q = ex * np.exp(-2.0 * np.pi * (ay + m))
        p = ex * np.exp(-2.0 * np.pi * (m + 1.0 - ay))
        log_sum += np.log(np.abs(1.0 - q)) + np.log(np.abs(1.0 - p))
        wq = q / (1.0 - q)
        wp = p / (1.0 - p)
        gx -= wq.imag + wp.imag
        gy_abs -= wq.real - wp.real
    g = g - log_sum / (2.0 * np.pi)
    return g, gx, sy * gy_abs
