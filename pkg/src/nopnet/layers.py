"""Layer forward/backward pairs used by both networks.

Five layer types: embedding lookup, same-length 1D convolution, global max
pool over time, dense (with a time-distributed variant), and softmax, plus the
cross-entropy loss. Every backward is hand-written against its forward; no
layer carries a bias term.
"""

import numpy as np

from .errors import ConfigError, InputError
from .kernels import conv1d_backward_kernel, conv1d_forward_kernel, max_pool_kernel

LOG_CLAMP = 1e-12  # floor applied to probabilities before taking logs


def embedding_forward(ids, table, pad_id=None):
    """Row lookup: output row t is table[ids[t]].

    ids equal to pad_id (when given) embed as zero rows and take no gradient;
    all other ids must lie in [0, V).
    """
    ids = np.asarray(ids)
    v = table.shape[0]
    if pad_id is None:
        bad = (ids < 0) | (ids >= v)
    else:
        bad = ((ids < 0) | (ids >= v)) & (ids != pad_id)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise InputError(f"token id {int(ids[pos])} at position {pos} outside [0, {v})")
    if pad_id is None:
        return table[ids]
    out = np.zeros((len(ids), table.shape[1]))
    real = ids != pad_id
    out[real] = table[ids[real]]
    return out


def embedding_backward(ids, upstream, vocab_size, pad_id=None):
    """Accumulate upstream rows into their table rows; unused rows stay zero."""
    ids = np.asarray(ids)
    upstream = np.asarray(upstream)
    if upstream.ndim != 2 or upstream.shape[0] != len(ids):
        raise InputError(
            f"upstream shape {upstream.shape} inconsistent with {len(ids)} ids")
    grad = np.zeros((vocab_size, upstream.shape[1]))
    if pad_id is not None:
        real = ids != pad_id
        ids, upstream = ids[real], upstream[real]
    np.add.at(grad, ids, upstream)
    return grad


def conv1d_forward(x, filters):
    """Same-length convolution of (N, E) input with (F, h, E) filters -> (N, F)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    filters = np.ascontiguousarray(filters, dtype=np.float64)
    f, h, e = filters.shape
    if h % 2 == 0:
        raise ConfigError(f"filter width must be odd, got {h}")
    if x.ndim != 2 or x.shape[0] < 1:
        raise InputError(f"input must be (N>=1, E), got shape {x.shape}")
    if x.shape[1] != e:
        raise InputError(f"input width {x.shape[1]} != filter width {e}")
    return conv1d_forward_kernel(x, filters)


def conv1d_backward(x, filters, upstream):
    """Gradients of conv1d_forward: returns (grad wrt x, grad wrt filters)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    filters = np.ascontiguousarray(filters, dtype=np.float64)
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != (x.shape[0], filters.shape[0]):
        raise InputError(
            f"upstream shape {upstream.shape} != {(x.shape[0], filters.shape[0])}")
    if x.shape[1] != filters.shape[2]:
        raise InputError(f"input width {x.shape[1]} != filter width {filters.shape[2]}")
    return conv1d_backward_kernel(x, filters, upstream)


def global_max_pool(x):
    """Max over the time axis per channel; returns (maxima (F,), argmax (F,)).

    Ties resolve to the smallest time index so backward is deterministic.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InputError(f"expected (N>=1, F) input, got shape {x.shape}")
    return max_pool_kernel(x)


def global_max_pool_backward(upstream, argmax, n):
    """Route upstream mass to the recorded argmax positions only."""
    upstream = np.asarray(upstream)
    grad = np.zeros((n, len(upstream)))
    grad[argmax, np.arange(len(upstream))] = upstream
    return grad


def dense_forward(x, w):
    """Bias-free matrix product.

    1-D x of length D -> length O; 2-D x of shape (N, D) applies the same w to
    each row (time-distributed), giving (N, O).
    """
    x = np.asarray(x)
    if x.shape[-1] != w.shape[0]:
        raise InputError(f"inner extents disagree: {x.shape[-1]} vs {w.shape[0]}")
    return x @ w


def dense_backward(x, w, upstream):
    """Gradients of dense_forward: returns (grad wrt x, grad wrt w)."""
    x = np.asarray(x)
    upstream = np.asarray(upstream)
    if x.ndim == 1:
        if upstream.shape != (w.shape[1],):
            raise InputError(f"upstream shape {upstream.shape} != ({w.shape[1]},)")
        return w @ upstream, np.outer(x, upstream)
    if upstream.shape != (x.shape[0], w.shape[1]):
        raise InputError(
            f"upstream shape {upstream.shape} != {(x.shape[0], w.shape[1])}")
    return upstream @ w.T, x.T @ upstream


def softmax(x):
    """Max-shifted softmax; entries in (0, 1], sum 1, argmax preserved."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 1:
        raise InputError("softmax input must be nonempty")
    z = np.exp(x - np.max(x))
    return z / z.sum()


def softmax_backward(probs, upstream):
    """Jacobian-vector product of softmax: p * (u - p.u)."""
    probs = np.asarray(probs)
    upstream = np.asarray(upstream)
    return probs * (upstream - probs @ upstream)


def cross_entropy(probs, label):
    """-ln probs[label], with probs clamped to >= LOG_CLAMP before the log."""
    probs = np.asarray(probs)
    if not 0 <= label < len(probs):
        raise InputError(f"label {label} outside [0, {len(probs)})")
    return float(-np.log(max(float(probs[label]), LOG_CLAMP)))


def cross_entropy_backward(probs, label):
    """Gradient wrt probs; zero where the clamp flattens the loss."""
    probs = np.asarray(probs)
    if not 0 <= label < len(probs):
        raise InputError(f"label {label} outside [0, {len(probs)})")
    grad = np.zeros_like(probs, dtype=np.float64)
    p = float(probs[label])
    if p >= LOG_CLAMP:
        grad[label] = -1.0 / p
    return grad
