"""Finite-difference stencils and quadrature on uniform grids."""
import numpy as np
from scipy.integrate import cumulative_simpson, simpson


def d1(f, dx, order=2):
    """First derivative with centered stencils and one-sided 2nd-order ends."""
    f = np.asarray(f, dtype=float)
    g = np.empty_like(f)
    g[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    g[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)
    if order == 2:
        g[1:-1] = (f[2:] - f[:-2]) / (2 * dx)
    elif order == 4:
        g[1] = (f[2] - f[0]) / (2 * dx)
        g[-2] = (f[-1] - f[-3]) / (2 * dx)
        g[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dx)
    else:
        raise ValueError(f"unsupported stencil order {order}")
    return g


def d2(f, dx, order=2):
    """Second derivative with centered stencils and one-sided 2nd-order ends."""
    f = np.asarray(f, dtype=float)
    g = np.empty_like(f)
    g[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dx**2
    g[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dx**2
    if order == 2:
        g[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dx**2
    elif order == 4:
        g[1] = (f[2] - 2 * f[1] + f[0]) / dx**2
        g[-2] = (f[-1] - 2 * f[-2] + f[-3]) / dx**2
        g[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2]
                   + 16 * f[3:-1] - f[4:]) / (12 * dx**2)
    else:
        raise ValueError(f"unsupported stencil order {order}")
    return g


def integrate(f, dx, richardson=False):
    """Composite Simpson integral of samples on a uniform grid.

    With ``richardson=True`` the Simpson values on the grid and on every
    second point are combined as (16 S_h - S_2h)/15. This needs a number of
    intervals divisible by four.
    """
    f = np.asarray(f, dtype=float)
    s = simpson(f, dx=dx)
    if not richardson:
        return float(s)
    if (len(f) - 1) % 4:
        raise ValueError("Richardson quadrature needs a multiple of 4 intervals")
    s2 = simpson(f[::2], dx=2 * dx)
    return float((16 * s - s2) / 15)


def cumulative(f, dx):
    """Cumulative Simpson integral from the first sample, starting at 0."""
    return cumulative_simpson(np.asarray(f, dtype=float), dx=dx, initial=0.0)
