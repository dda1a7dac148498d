"""Independent numerical oracles shared by the tests.

These deliberately avoid the code paths they check: jet derivatives are
compared against Richardson-extrapolated central differences of plain
surface values, and curvature identities against intrinsic or
connection-level computations.
"""

import numpy as np

from mtsurf import eval_point_grid

# second-order central stencils per derivative order
_STENCILS = {
    0: ((1.0,), (0,)),
    1: ((-0.5, 0.5), (-1, 1)),
    2: ((1.0, -2.0, 1.0), (-1, 0, 1)),
    3: ((-0.5, 1.0, -1.0, 0.5), (-2, -1, 1, 2)),
}


def fd_partial(surface, u, v, i, j, h):
    """Central-difference (i, j) partial of z at one point, one step size."""
    wi, oi = _STENCILS[i]
    wj, oj = _STENCILS[j]
    acc = 0.0
    for a, da in zip(wi, oi):
        for b, db in zip(wj, oj):
            acc = acc + a * b * eval_point_grid(surface, u + da * h, v + db * h)
    return acc / (h**i * h**j)


def fd_partial_richardson(surface, u, v, i, j, h=1e-3):
    """One Richardson step on the second-order stencil: O(h^4) truncation.

    The step grows with the derivative order, since the stencil weights
    amplify rounding noise like 1/h^(i+j).
    """
    h = h * (1.0, 1.0, 2.0, 4.0)[i + j]
    d1 = fd_partial(surface, u, v, i, j, h)
    d2 = fd_partial(surface, u, v, i, j, h / 2)
    return (4.0 * d2 - d1) / 3.0


def jet_fd_worst_error(surface, u, v, order=3, h=1e-3):
    """Worst relative disagreement between a jet and the FD oracle."""
    from mtsurf import eval_jet

    jet = eval_jet(surface, u, v, order)
    worst = 0.0
    for (i, j), val in jet.d.items():
        if i + j == 0:
            continue
        approx = fd_partial_richardson(surface, u, v, i, j, h)
        rel = np.max(np.abs(approx - val) / (1.0 + np.abs(val)))
        worst = max(worst, float(rel))
    return worst
