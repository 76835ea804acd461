"""Finite-difference verification of analytic gradients."""

import numpy as np

FD_STEP = 1e-5
REL_FLOOR = 1e-8


def gradient_check(loss_fn, params, rng, n_coords=200, step=FD_STEP):
    """Compare params' stored gradients against central differences of loss_fn.

    loss_fn() must recompute the scalar loss from the params' current values
    and be deterministic. The analytic gradients are expected to already sit
    in each Param's grad buffer (caller runs its own backward beforehand).
    Samples at most n_coords coordinates across all parameters; returns the
    max relative error |ga - gn| / max(|ga|, |gn|, REL_FLOOR).
    """
    coords = []
    for name, p in params.items():
        coords.extend((name, i) for i in range(p.size))
    if n_coords < len(coords):
        picks = rng.choice(len(coords), size=n_coords, replace=False)
        coords = [coords[i] for i in picks]

    worst = 0.0
    for name, i in coords:
        flat = params[name].value.ravel()
        saved = flat[i]
        flat[i] = saved + step
        up = loss_fn()
        flat[i] = saved - step
        down = loss_fn()
        flat[i] = saved
        g_num = (up - down) / (2.0 * step)
        g_ana = params[name].grad.ravel()[i]
        rel = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), REL_FLOOR)
        worst = max(worst, rel)
    return worst
