"""Independent numerical oracles shared by the unit and acceptance tests."""

import numpy as np

from earlywarn import rul


def reference_loss(net, X, Y, mask=None):
    """Masked MSE of a from-scratch LSTM forward pass (no dropout, no input scaling).

    Written against the textbook cell equations rather than the package's
    forward code, so it checks the forward pass as well as the gradients.
    """
    X = np.asarray(X, dtype=float)
    B, T, _ = X.shape
    mask = np.ones((B, T), bool) if mask is None else mask
    seq = [X[:, t] for t in range(T)]
    for p in net.layers:
        H = p.b.size // 4
        h, c, out = np.zeros((B, H)), np.zeros((B, H)), []
        for x in seq:
            pre = x @ p.Wx.T + h @ p.Wh.T + p.b
            f = 1 / (1 + np.exp(-pre[:, :H]))
            i = 1 / (1 + np.exp(-pre[:, H:2 * H]))
            g = np.tanh(pre[:, 2 * H:3 * H])
            o = 1 / (1 + np.exp(-pre[:, 3 * H:]))
            c = f * c + i * g
            h = o * np.tanh(c)
            out.append(h)
        seq = out
    pred = np.stack([h @ net.head_W + net.head_b for h in seq], axis=1)
    return float(np.sum(np.where(mask, pred - Y, 0.0) ** 2) / mask.sum())


def lstm_gradient_errors(net, X, Y, mask=None, h=1e-6):
    """Norm-wise relative error of every analytic gradient group vs central differences.

    Dropout is off (``train=False``) so the loss is a deterministic function
    of the parameters.  The network must have no input normalization.
    """
    assert net.x_mean is None
    loss, grads = rul.loss_and_grads(net, X, Y, mask)
    assert abs(loss - reference_loss(net, X, Y, mask)) <= 1e-12 * max(1.0, loss)
    errs = []
    for arr, g in zip(net.param_arrays(), grads[:-1]):
        num = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + h
            lp = reference_loss(net, X, Y, mask)
            arr[i] = old - h
            lm = reference_loss(net, X, Y, mask)
            arr[i] = old
            num[i] = (lp - lm) / (2 * h)
        errs.append(np.linalg.norm(g - num) / max(np.linalg.norm(g), np.linalg.norm(num), 1e-12))
    b = net.head_b
    net.head_b = b + h
    lp = reference_loss(net, X, Y, mask)
    net.head_b = b - h
    lm = reference_loss(net, X, Y, mask)
    net.head_b = b
    num = (lp - lm) / (2 * h)
    errs.append(abs(grads[-1] - num) / max(abs(grads[-1]), abs(num), 1e-12))
    return np.array(errs)


def central_diff(f, x, h):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
