"""Regenerate cdf_oracle.npz: Phi(x) on 10^4 points in [-8, 8] by 40-digit quadrature.

Run from this directory: ``python3 make_cdf_fixture.py``.  Needs mpmath.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def density(t):
    return mp.exp(-t * t / 2) / mp.sqrt(2 * mp.pi)


def phi(x):
    x = mp.mpf(x)
    # integrate over the short tail so the result keeps full relative accuracy
    if x <= 0:
        return mp.quad(density, [-mp.inf, x])
    return 1 - mp.quad(density, [x, mp.inf])


if __name__ == "__main__":
    rng = np.random.default_rng(20240601)
    x = np.concatenate([np.linspace(-8.0, 8.0, 5001), rng.uniform(-8.0, 8.0, 4999)])
    y = np.array([float(phi(float(v))) for v in x])
    np.savez_compressed("cdf_oracle.npz", x=x, phi=y)
