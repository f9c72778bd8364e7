"""Pure numpy implementation of the Euler stencil kernel.

Arithmetic is ordered exactly like the compiled kernel in ``_kernels.pyx``
(taps visited row-major, accumulator seeded with 0.0) so both backends
produce bit-identical states.
"""
import numpy as np


def saturate(state):
    # clip form of the piecewise-linear output; exact once saturated
    return np.clip(state, -1.0, 1.0)


def _taps(weights):
    radius = weights.shape[0] // 2
    return [(k, l, float(weights[k, l]))
            for k in range(weights.shape[0]) for l in range(weights.shape[1])
            if weights[k, l] != 0.0], radius


def _edge_slices(n, d):
    """Slice of positions along an axis whose neighbour at offset ``d`` is off-grid."""
    if d < 0:
        return slice(0, min(-d, n))
    if d > 0:
        return slice(max(n - d, 0), n)
    return None


def neighbour_sum(v, taps, r, fixed, bval):
    """Sum of tap weight times neighbour value for every cell of (..., H, W).

    Fixed boundaries read ``bval`` off the grid.  Zero flux reads the centre
    cell itself, so every boundary link carries no flux.
    """
    H, W = v.shape[-2:]
    pad = [(0, 0)] * (v.ndim - 2) + [(r, r), (r, r)]
    vpad = np.pad(v, pad, mode="constant", constant_values=bval if fixed else 0.0)
    acc = np.zeros_like(v)
    for k, l, a in taps:
        shifted = vpad[..., k:k + H, l:l + W]
        if not fixed and (k != r or l != r):
            shifted = shifted.copy()
            rows, cols = _edge_slices(H, k - r), _edge_slices(W, l - r)
            if rows is not None:
                shifted[..., rows, :] = v[..., rows, :]
            if cols is not None:
                shifted[..., :, cols] = v[..., :, cols]
        acc = acc + a * shifted
    return acc


def euler(state, bias, weights, h, n_steps, fixed, bval):
    """Run ``n_steps`` explicit Euler updates on a (batch, H, W) state."""
    state = np.array(state, dtype=np.float64, copy=True)
    taps, radius = _taps(np.asarray(weights, dtype=np.float64))
    for _ in range(n_steps):
        acc = neighbour_sum(saturate(state), taps, radius, fixed, bval)
        state = state + h * ((-state + acc) + bias)
    return state
