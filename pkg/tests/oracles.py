"""Independent reference implementations used by the tests.

None of these import the simulator; they are written from the definition
of each operation (plain loops, scipy.ndimage, FFTs).
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

EIGHT = np.ones((3, 3), dtype=bool)


def naive_euler_step(state, inputs, feedback, control, offset, h, boundary):
    """One Euler step by explicit loops over cells and taps.

    ``boundary`` is None for zero flux (an off-grid neighbour reads the
    centre cell), or the fixed ghost value.
    Taps are visited row-major from a 0.0 accumulator, skipping zero taps.
    """
    H, W = state.shape
    n = feedback.shape[0]
    rad = n // 2

    def fetch(img, i, j, ci, cj):
        if 0 <= i < H and 0 <= j < W:
            return img[i, j]
        if boundary is None:
            return img[ci, cj]
        return boundary

    outputs = np.minimum(np.maximum(state, -1.0), 1.0)
    out = np.empty_like(state)
    for i in range(H):
        for j in range(W):
            fb = 0.0
            ff = 0.0
            for k in range(n):
                for l in range(n):
                    if feedback[k, l] != 0.0:
                        fb = fb + feedback[k, l] * fetch(outputs, i + k - rad, j + l - rad, i, j)
            for k in range(n):
                for l in range(n):
                    if control[k, l] != 0.0:
                        ff = ff + control[k, l] * fetch(inputs, i + k - rad, j + l - rad, i, j)
            bias = ff + offset
            out[i, j] = state[i, j] + h * ((-state[i, j] + fb) + bias)
    return out


def to_bool(img):
    return np.asarray(img) > 0


def from_bool(b):
    return np.where(b, 1.0, -1.0)


def threshold(img, level):
    return from_bool(np.asarray(img) > level)


def logic_and(a, b):
    return from_bool(to_bool(a) & to_bool(b))


def dilation(img, steps):
    out = np.empty(np.shape(img))
    for idx in np.ndindex(*np.shape(img)[:-2]):
        out[idx] = from_bool(ndimage.binary_dilation(to_bool(img[idx]), EIGHT, iterations=steps))
    return out


def shadow_left(img):
    """A cell is black when it or any cell to its right in the row is black."""
    b = to_bool(img)
    return from_bool(np.logical_or.accumulate(b[..., ::-1], axis=-1)[..., ::-1])


def shadow_down(img):
    """A cell is black when it or any cell above it in the column is black."""
    return from_bool(np.logical_or.accumulate(to_bool(img), axis=-2))


def reconstruction(markers, reference):
    """8-connected components of ``reference`` containing a marker cell."""
    out = np.empty(np.shape(reference))
    for idx in np.ndindex(*np.shape(reference)[:-2]):
        ref = to_bool(reference[idx])
        lab, _ = ndimage.label(ref, EIGHT)
        keep = np.unique(lab[to_bool(markers[idx]) & ref])
        out[idx] = from_bool(np.isin(lab, keep[keep > 0]))
    return out


def flood_fill_components(markers, reference):
    """Same contract as ``reconstruction`` by an explicit BFS (no scipy)."""
    ref = to_bool(reference)
    H, W = ref.shape
    seen = np.zeros_like(ref)
    queue = [(i, j) for i, j in zip(*np.nonzero(to_bool(markers) & ref))]
    for p in queue:
        seen[p] = True
    while queue:
        i, j = queue.pop()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                a, b = i + di, j + dj
                if 0 <= a < H and 0 <= b < W and ref[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    queue.append((a, b))
    return from_bool(seen)


def heat_kernel_diffusion(img, weights, t, pad=256):
    """Exact-in-time solution of dx/dt = -x + weights * x on a large periodic grid.

    Valid while the state stays inside [-1, 1] and away from the edges.
    """
    H, W = img.shape
    big = np.zeros((pad, pad))
    oy, ox = (pad - H) // 2, (pad - W) // 2
    big[oy:oy + H, ox:ox + W] = img
    kern = np.zeros((pad, pad))
    n = weights.shape[0]
    r = n // 2
    for k in range(n):
        for l in range(n):
            kern[(k - r) % pad, (l - r) % pad] = weights[k, l]
    # kernel acts as a correlation; the weights used here are symmetric
    sym = np.real(np.fft.fft2(kern))
    out = np.real(np.fft.ifft2(np.fft.fft2(big) * np.exp(t * (sym - 1.0))))
    return out[oy:oy + H, ox:ox + W]


def bbox_of(mask):
    """(x, y, w, h) of the +1 cells, or None."""
    ys, xs = np.nonzero(to_bool(mask))
    if xs.size == 0:
        return None
    return (int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def steady_state_kf_gain(q, noise):
    """Steady-state Kalman gain of the 1-D constant-velocity model (per axis)."""
    from scipy.linalg import solve_discrete_are
    F = np.array([[1.0, 1.0], [0.0, 1.0]])
    Hm = np.array([[1.0, 0.0]])
    P = solve_discrete_are(F.T, Hm.T, q * np.eye(2), np.array([[noise]]))
    innov = Hm @ P @ Hm.T + noise
    return P @ Hm.T / innov, P
