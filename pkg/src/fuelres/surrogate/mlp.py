"""Dense tanh network with hand-written reverse mode and Adam training.

Checkpoint layout (all little-endian)::

    8 bytes   magic b"FRSURR01"
    uint32    header length H
    H bytes   UTF-8 JSON header: {"dims": [...], "meta": {...}}
    float64[] x_mean, x_scale (dims[0] each), y_mean, y_scale (dims[-1] each)
    float64[] for each layer l: W_l row-major with shape (dims[l], dims[l+1]),
              then b_l with shape (dims[l+1],)
"""

from __future__ import annotations

import json
import math
import struct
import time
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

MAGIC = b"FRSURR01"


class NonFinite(FloatingPointError):
    def __init__(self, epoch: int, lr: float):
        super().__init__(f"loss became non-finite at epoch {epoch} (learning rate {lr})")
        self.epoch = epoch
        self.lr = lr


class Adam:
    """Adam moments for a list of arrays (ascent or descent is the caller's sign)."""

    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def steps(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        out = []
        for m, v, g in zip(self.m, self.v, grads):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            out.append(lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def forward(params, z):
    """Forward pass on normalized inputs; returns output and layer cache."""
    acts = [z]
    h = z
    n = len(params) // 2
    for l in range(n):
        W, b = params[2 * l], params[2 * l + 1]
        h = h @ W + b
        if l < n - 1:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def backward(params, acts, dout):
    """Gradients of ``sum(dout * output)`` w.r.t. parameters and inputs."""
    n = len(params) // 2
    grads = [None] * len(params)
    d = dout
    for l in reversed(range(n)):
        W = params[2 * l]
        if l < n - 1:
            d = d * (1.0 - acts[l + 1] ** 2)
        grads[2 * l] = acts[l].T @ d
        grads[2 * l + 1] = d.sum(axis=0)
        d = d @ W.T
    return grads, d


class MLPSurrogate(RegressorMixin, BaseEstimator):
    """Feed-forward tanh regressor trained with Adam on standardized data.

    Parameters
    ----------
    hidden : tuple of int
    lr : float
        Adam step size.
    epochs : int
    batch_size : int
    val_fraction : float
        Held-out share used to report the final MSE.
    lr_final : float
        Cosine-annealed learning rate reached at the last epoch.
    seed : int
    verbose : bool
    """

    def __init__(self, hidden=(64, 64), lr=3e-3, epochs=400, batch_size=128, val_fraction=0.1,
                 lr_final=1e-5, seed=0, verbose=False):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.val_fraction = val_fraction
        self.lr_final = lr_final
        self.seed = seed
        self.verbose = verbose

    # -- normalization helpers --------------------------------------------
    def _zx(self, X):
        return (X - self.x_mean_) / self.x_scale_

    def _init(self, dims, rng):
        params = []
        for a, b in zip(dims[:-1], dims[1:]):
            params.append(rng.normal(0.0, math.sqrt(1.0 / a), (a, b)))
            params.append(np.zeros(b))
        return params

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        y = y.reshape(len(y), -1)
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be >= 1")
        rng = np.random.default_rng(self.seed)
        n = X.shape[0]
        perm = rng.permutation(n)
        n_val = int(round(self.val_fraction * n)) if n > 10 else 0
        val, tr = perm[:n_val], perm[n_val:]
        self.x_mean_ = X[tr].mean(0)
        self.x_scale_ = X[tr].std(0)
        self.x_scale_[self.x_scale_ == 0] = 1.0
        self.y_mean_ = y[tr].mean(0)
        self.y_scale_ = y[tr].std(0)
        self.y_scale_[self.y_scale_ == 0] = 1.0
        self.x_min_, self.x_max_ = X.min(0), X.max(0)
        Zx = self._zx(X)
        Zy = (y - self.y_mean_) / self.y_scale_
        dims = [X.shape[1], *self.hidden, y.shape[1]]
        params = self._init(dims, rng)
        opt = Adam([p.shape for p in params], lr=self.lr)
        history = []
        t0 = time.perf_counter()
        for ep in range(self.epochs):
            lr = self.lr_final + 0.5 * (self.lr - self.lr_final) * (1 + math.cos(math.pi * ep / max(self.epochs, 1)))
            order = rng.permutation(tr)
            tot = 0.0
            for s in range(0, order.size, self.batch_size):
                idx = order[s : s + self.batch_size]
                out, acts = forward(params, Zx[idx])
                r = out - Zy[idx]
                tot += float((r * r).sum())
                grads, _ = backward(params, acts, 2.0 * r / r.size)
                for p, st in zip(params, opt.steps(grads, lr)):
                    p -= st
            train_mse = tot / (tr.size * y.shape[1])
            if not math.isfinite(train_mse):
                raise NonFinite(ep, lr)
            history.append(train_mse)
            if self.verbose and (ep % 10 == 0 or ep == self.epochs - 1):
                print(f"epoch {ep:4d} lr {lr:.2e} train {train_mse:.3e}")
        self.params_ = params
        self.dims_ = dims
        self.loss_history_ = history
        self.train_time_ = time.perf_counter() - t0
        if n_val:
            self.val_mse_ = float(((self._predict_z(Zx[val]) - Zy[val]) ** 2).mean())
            raw = self._predict_z(Zx[val]) * self.y_scale_ + self.y_mean_
            self.val_rmse_raw_ = np.sqrt(((raw - y[val]) ** 2).mean(0))
        else:
            self.val_mse_ = float("nan")
            self.val_rmse_raw_ = np.full(y.shape[1], np.nan)
        self.n_features_in_ = X.shape[1]
        return self

    def _predict_z(self, Z):
        return forward(self.params_, Z)[0]

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        return self._predict_z(self._zx(X)) * self.y_scale_ + self.y_mean_

    def out_of_distribution(self, X, margin: float = 0.1) -> np.ndarray:
        """Rows with any input beyond the training range by more than ``margin``."""
        check_is_fitted(self, "params_")
        X = np.atleast_2d(X)
        span = np.where(self.x_max_ > self.x_min_, self.x_max_ - self.x_min_, 1.0)
        return ((X < self.x_min_ - margin * span) | (X > self.x_max_ + margin * span)).any(1)

    def input_gradient(self, X, dy):
        """Gradient of ``sum(dy * predict(X))`` with respect to ``X``."""
        check_is_fitted(self, "params_")
        X = np.atleast_2d(np.asarray(X, float))
        out, acts = forward(self.params_, self._zx(X))
        _, dz = backward(self.params_, acts, np.asarray(dy, float) * self.y_scale_)
        return dz / self.x_scale_

    def predict_with_grad_fn(self, X):
        """Prediction plus a closure mapping output cotangents to input gradients."""
        X = np.atleast_2d(np.asarray(X, float))
        out, acts = forward(self.params_, self._zx(X))
        y = out * self.y_scale_ + self.y_mean_

        def vjp(dy):
            _, dz = backward(self.params_, acts, np.asarray(dy, float) * self.y_scale_)
            return dz / self.x_scale_

        return y, vjp

    # -- checkpoint -----------------------------------------------------------
    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "params_")
        meta = {
            "hidden": list(self.hidden),
            "val_mse": self.val_mse_,
            "epochs": self.epochs,
            "lr": self.lr,
            "x_min": self.x_min_.tolist(),
            "x_max": self.x_max_.tolist(),
        }
        header = json.dumps({"dims": self.dims_, "meta": meta}).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for arr in (self.x_mean_, self.x_scale_, self.y_mean_, self.y_scale_, *self.params_):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path: str | Path) -> "MLPSurrogate":
        raw = Path(path).read_bytes()
        if raw[:8] != MAGIC:
            raise ValueError(f"{path}: not a surrogate checkpoint")
        (hl,) = struct.unpack("<I", raw[8:12])
        head = json.loads(raw[12 : 12 + hl])
        dims, meta = head["dims"], head["meta"]
        pos = 12 + hl

        def take(shape):
            nonlocal pos
            k = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f8", count=k, offset=pos).reshape(shape).astype(float)
            pos += 8 * k
            return arr

        m = cls(hidden=tuple(meta["hidden"]), epochs=meta["epochs"], lr=meta["lr"])
        m.x_mean_, m.x_scale_ = take(dims[0]), take(dims[0])
        m.y_mean_, m.y_scale_ = take(dims[-1]), take(dims[-1])
        m.params_ = []
        for a, b in zip(dims[:-1], dims[1:]):
            m.params_ += [take((a, b)), take(b)]
        if pos != len(raw):
            raise ValueError(f"{path}: trailing bytes in checkpoint")
        m.dims_ = dims
        m.val_mse_ = meta["val_mse"]
        m.x_min_, m.x_max_ = np.array(meta["x_min"]), np.array(meta["x_max"])
        m.n_features_in_ = dims[0]
        return m
