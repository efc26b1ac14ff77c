"""Stacked LSTM for remaining-useful-life regression, written against numpy.

Shapes: sequences are (B, T, F) with a boolean step mask (B, T) for padding;
predictions are (B, T).  Gradients come from explicit backpropagation
through time and are checked against finite differences in the tests.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

SCHEMA = "earlywarn.rul-network/1"
GATES = ("f", "i", "c", "o")


class TrainingError(RuntimeError):
    pass


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LSTMCellParams:
    """Gate weights stacked in (forget, input, candidate, output) order.

    ``Wh`` is (4H, H), ``Wx`` is (4H, I) and ``b`` is (4H,); the per-gate
    blocks are exposed as ``W_fh``, ``W_ix``, ``b_o`` and so on.
    """

    Wh: np.ndarray
    Wx: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4 = self.b.shape[0]
        if H4 % 4 or self.Wh.shape != (H4, H4 // 4) or self.Wx.shape[0] != H4:
            raise ValueError("inconsistent LSTM parameter shapes")

    @property
    def hidden_size(self) -> int:
        return self.Wh.shape[1]

    @property
    def input_size(self) -> int:
        return self.Wx.shape[1]

    def __getattr__(self, name):
        # W_fh, W_ix, b_c ... views into the stacked arrays
        if len(name) in (3, 4) and name[:2] in ("W_", "b_") and name[2] in GATES:
            H = self.__dict__["Wh"].shape[1]
            g = GATES.index(name[2])
            sl = slice(g * H, (g + 1) * H)
            if name[0] == "b" and len(name) == 3:
                return self.__dict__["b"][sl]
            if name[0] == "W" and len(name) == 4 and name[3] in "hx":
                return self.__dict__["W" + name[3]][sl]
        raise AttributeError(name)

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng, forget_bias: float = 1.0):
        bound = 1.0 / np.sqrt(input_size + hidden_size)
        H = hidden_size
        b = rng.uniform(-bound, bound, 4 * H)
        b[:H] = forget_bias
        return cls(rng.uniform(-bound, bound, (4 * H, H)),
                   rng.uniform(-bound, bound, (4 * H, input_size)), b)

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int):
        H = hidden_size
        return cls(np.zeros((4 * H, H)), np.zeros((4 * H, input_size)), np.zeros(4 * H))


def _cell(x, h_prev, c_prev, p: LSTMCellParams):
    H = p.hidden_size
    z = h_prev @ p.Wh.T + x @ p.Wx.T + p.b
    f = _sigmoid(z[..., :H])
    i = _sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = _sigmoid(z[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (f, i, g, o, tc)


def cell_forward(x_t, h_prev, c_prev, params: LSTMCellParams):
    """One LSTM step: gates, cell update and hidden output."""
    x_t = np.asarray(x_t, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x_t.shape[-1] != params.input_size:
        raise ValueError(f"input has {x_t.shape[-1]} features, cell expects {params.input_size}")
    if h_prev.shape[-1] != params.hidden_size or c_prev.shape != h_prev.shape:
        raise ValueError("hidden/cell state shape mismatch")
    h, c, _ = _cell(x_t, h_prev, c_prev, params)
    return h, c


@dataclass
class RULNetwork:
    layers: list
    head_W: np.ndarray          # (H,)
    head_b: float
    dropout_rate: float = 0.2
    input_spec: list = field(default_factory=list)
    # input normalization and target scale, fitted by the pipeline
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None

    @classmethod
    def init(cls, input_size: int, hidden_size: int = 100, n_layers: int = 3,
             dropout_rate: float = 0.2, seed=0, input_spec=None):
        rng = np.random.default_rng(seed)
        layers = [LSTMCellParams.init(input_size if k == 0 else hidden_size, hidden_size, rng)
                  for k in range(n_layers)]
        bound = 1.0 / np.sqrt(hidden_size)
        return cls(layers, rng.uniform(-bound, bound, hidden_size), 0.0, dropout_rate,
                   list(input_spec or []))

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    def copy(self) -> "RULNetwork":
        return copy.deepcopy(self)

    # flat parameter access for the optimizer and gradient checks
    def param_arrays(self) -> list:
        out = []
        for p in self.layers:
            out += [p.Wh, p.Wx, p.b]
        return out + [self.head_W]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "hidden_size": self.layers[0].hidden_size,
            "n_layers": len(self.layers),
            "input_size": self.input_size,
            "dropout_rate": self.dropout_rate,
            "input_spec": list(self.input_spec),
            "layers": [{"Wh": p.Wh.tolist(), "Wx": p.Wx.tolist(), "b": p.b.tolist()}
                       for p in self.layers],
            "head_W": self.head_W.tolist(),
            "head_b": float(self.head_b),
            "x_mean": None if self.x_mean is None else np.asarray(self.x_mean).tolist(),
            "x_std": None if self.x_std is None else np.asarray(self.x_std).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RULNetwork":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        layers = [LSTMCellParams(np.array(p["Wh"]), np.array(p["Wx"]), np.array(p["b"]))
                  for p in d["layers"]]
        xm = None if d["x_mean"] is None else np.array(d["x_mean"])
        xs = None if d["x_std"] is None else np.array(d["x_std"])
        return cls(layers, np.array(d["head_W"]), d["head_b"], d["dropout_rate"],
                   d["input_spec"], xm, xs)


def _as_batch(seq):
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 2:
        return seq[None], True
    if seq.ndim != 3:
        raise ValueError("sequence must be (T, F) or (B, T, F)")
    return seq, False


def _normalize(net: RULNetwork, X):
    if net.x_mean is None:
        return X
    return (X - net.x_mean) / net.x_std


def _forward(net: RULNetwork, X, train: bool, rng):
    B, T, _ = X.shape
    caches = []
    inp = X
    for li, p in enumerate(net.layers):
        H = p.hidden_size
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs, cs, gates = np.empty((B, T, H)), np.empty((B, T, H)), []
        for t in range(T):
            h, c, gt = _cell(inp[:, t], h, c, p)
            hs[:, t], cs[:, t] = h, c
            gates.append(gt)
        mask = None
        out = hs
        if train and net.dropout_rate > 0 and li < len(net.layers) - 1:
            keep = 1.0 - net.dropout_rate
            mask = (rng.random(hs.shape) < keep) / keep
            out = hs * mask
        caches.append((inp, hs, cs, gates, mask))
        inp = out
    pred = inp @ net.head_W + net.head_b
    return pred, caches, inp


def forward(net: RULNetwork, sequence, mode: str = "infer", rng=None) -> np.ndarray:
    """Per-step RUL predictions; dropout only when ``mode == "train"``."""
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    X, single = _as_batch(sequence)
    if X.shape[-1] != net.input_size:
        raise ValueError(f"sequence has {X.shape[-1]} features, network expects {net.input_size}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(0)
    pred, _, _ = _forward(net, _normalize(net, X), mode == "train", rng)
    return pred[0] if single else pred


def loss_and_grads(net: RULNetwork, X, Y, mask=None, train: bool = False, rng=None):
    """Masked mean squared error and gradients for every parameter array.

    Returns ``(loss, grads)`` with grads aligned to ``net.param_arrays()``
    followed by the head bias gradient.
    """
    X, _ = _as_batch(X)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B, T, _ = X.shape
    mask = np.ones((B, T), bool) if mask is None else np.asarray(mask, bool)
    n = mask.sum()
    pred, caches, top = _forward(net, _normalize(net, X), train, rng)
    err = np.where(mask, pred - Y, 0.0)
    loss = float(np.sum(err**2) / n)

    dpred = 2.0 * err / n
    g_headW = np.einsum("bt,bth->h", dpred, top)
    g_headb = float(dpred.sum())
    dout = dpred[..., None] * net.head_W
    layer_grads = []
    for li in range(len(net.layers) - 1, -1, -1):
        p = net.layers[li]
        inp, hs, cs, gates, dmask = caches[li]
        H = p.hidden_size
        dhs = dout if dmask is None else dout * dmask
        dWh, dWx, db = np.zeros_like(p.Wh), np.zeros_like(p.Wx), np.zeros_like(p.b)
        dinp = np.zeros_like(inp)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            f, i, g, o, tc = gates[t]
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((B, H))
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((B, H))
            dh = dhs[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc**2) + dc_next
            df = dc * c_prev
            di = dc * g
            dg = dc * i
            dz = np.concatenate([df * f * (1 - f), di * i * (1 - i), dg * (1 - g**2),
                                 do * o * (1 - o)], axis=1)
            dWh += dz.T @ h_prev
            dWx += dz.T @ inp[:, t]
            db += dz.sum(axis=0)
            dh_next = dz @ p.Wh
            dc_next = dc * f
            dinp[:, t] = dz @ p.Wx
        layer_grads.append((dWh, dWx, db))
        dout = dinp
    grads = []
    for dWh, dWx, db in reversed(layer_grads):
        grads += [dWh, dWx, db]
    grads.append(g_headW)
    return loss, grads + [g_headb]


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params: list, grads: list):
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        out = []
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mh = self.m[k] / (1 - self.b1**self.t)
            vh = self.v[k] / (1 - self.b2**self.t)
            out.append(p - self.lr * mh / (np.sqrt(vh) + self.eps))
        return out


def _set_params(net: RULNetwork, values: list):
    k = 0
    for p in net.layers:
        p.Wh, p.Wx, p.b = values[k], values[k + 1], values[k + 2]
        k += 3
    net.head_W = values[k]
    net.head_b = float(values[k + 1])


def pad_sequences(seqs, targets=None):
    """Stack ragged (T_i, F) sequences into (B, T_max, F) plus a step mask."""
    seqs = [np.asarray(s, dtype=float) for s in seqs]
    T = max(s.shape[0] for s in seqs)
    F = seqs[0].shape[1]
    X = np.zeros((len(seqs), T, F))
    M = np.zeros((len(seqs), T), bool)
    Y = np.zeros((len(seqs), T))
    for b, s in enumerate(seqs):
        X[b, :len(s)] = s
        M[b, :len(s)] = True
        if targets is not None:
            Y[b, :len(s)] = targets[b]
    return X, Y, M


def _dataset_loss(net, seqs, targets):
    X, Y, M = pad_sequences(seqs, targets)
    pred = forward(net, X, "infer")
    return float(np.sum(np.where(M, pred - Y, 0.0) ** 2) / M.sum())


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 4
    clip_norm: float = 5.0
    seed: int = 0
    shuffle: bool = True


def train(net: RULNetwork, train_seqs, train_targets, val_seqs=None, val_targets=None,
          config: TrainConfig | None = None):
    """Adam on masked MSE; returns (best-by-validation copy, history).

    Without a validation set the training loss picks the snapshot.
    """
    config = config or TrainConfig()
    if not len(train_seqs):
        raise ValueError("empty training set")
    if val_seqs is None:
        val_seqs, val_targets = train_seqs, train_targets
    if not len(val_seqs):
        raise ValueError("empty validation set")
    net = net.copy()
    rng = np.random.default_rng(config.seed)
    opt = Adam(config.lr)
    best = (_dataset_loss(net, val_seqs, val_targets), net.copy())
    history = {"train": [], "val": []}
    n = len(train_seqs)
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total, count = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            X, Y, M = pad_sequences([train_seqs[i] for i in idx], [train_targets[i] for i in idx])
            loss, grads = loss_and_grads(net, X, Y, M, train=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            if config.lr == 0:
                continue
            gnorm = np.sqrt(sum(float(np.sum(np.square(g))) for g in grads))
            if config.clip_norm and gnorm > config.clip_norm:
                grads = [g * (config.clip_norm / gnorm) for g in grads]
            params = net.param_arrays() + [np.array(net.head_b)]
            _set_params(net, opt.step(params, grads))
            total += loss * M.sum()
            count += M.sum()
        history["train"].append(total / max(count, 1))
        val = _dataset_loss(net, val_seqs, val_targets)
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history["val"].append(val)
        if val < best[0]:
            best = (val, net.copy())
    return best[1], history


def calibrate(net: RULNetwork, segment, targets, epochs: int = 5, base_lr: float = 1e-3,
              lr_scale: float = 0.1, seed: int = 0) -> RULNetwork:
    """Fine-tune a copy on one segment at a reduced learning rate."""
    if epochs == 0:
        return net.copy()
    cfg = TrainConfig(epochs=epochs, lr=base_lr * lr_scale, batch_size=1, seed=seed)
    out = net.copy()
    rng = np.random.default_rng(seed)
    opt = Adam(cfg.lr)
    X, Y, M = pad_sequences([segment], [targets])
    for epoch in range(epochs):
        loss, grads = loss_and_grads(out, X, Y, M, train=True, rng=rng)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at calibration epoch {epoch}")
        gnorm = np.sqrt(sum(float(np.sum(np.square(g))) for g in grads))
        if gnorm > cfg.clip_norm:
            grads = [g * (cfg.clip_norm / gnorm) for g in grads]
        _set_params(out, opt.step(out.param_arrays() + [np.array(out.head_b)], grads))
    return out


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("pred and actual must be non-empty with equal shapes")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def score_function(pred, actual, early: float = 13.0, late: float = 10.0) -> float:
    """Mean asymmetric score: exp(-d/13) - 1 for d < 0, exp(d/10) - 1 otherwise.

    ``d = pred - actual``; overestimating the RUL (d > 0) costs more.
    """
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or pred.size == 0:
        raise ValueError("pred and actual must be non-empty with equal shapes")
    d = pred - actual
    s = np.where(d < 0, np.expm1(-d / early), np.expm1(d / late))
    return float(np.mean(s))
