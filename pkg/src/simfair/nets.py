"""Predictor architectures: a fully connected net and a bidirectional LSTM.

Both predict a single value from band observations.  The FNN consumes one
observation snapshot; the LSTM consumes a window of consecutive snapshots
per station.  Dense and recurrent weights initialize uniform in
+-sqrt(1/fan_in); biases start at zero.  Models optionally carry an affine
input/target normalization that is applied inside ``forward`` so that
checkpoints are self-contained.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


def _uniform_init(rng, fan_in: int, shape, name: str) -> Tensor:
    limit = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-limit, limit, shape), requires_grad=True, name=name)


def _zeros(shape, name: str) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


class Normalization:
    """Affine feature/target scaling baked into a model's forward pass."""

    def __init__(self, x_mean=None, x_std=None, y_mean=0.0, y_std=1.0, d=1):
        self.x_mean = np.zeros(d) if x_mean is None else np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.ones(d) if x_std is None else np.asarray(x_std, dtype=np.float64)
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)

    @classmethod
    def fit(cls, X, y) -> "Normalization":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xs = X.reshape(-1, X.shape[-1])
        std = xs.std(axis=0)
        ystd = y.std()
        return cls(xs.mean(axis=0), np.where(std == 0.0, 1.0, std),
                   y.mean(), ystd if ystd > 0.0 else 1.0)

    def scale_x(self, x):
        return (x - self.x_mean) * (1.0 / self.x_std)

    def unscale_y(self, z):
        return z * self.y_std + self.y_mean

    def scale_y_values(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.y_mean) / self.y_std

    def arrays(self) -> dict:
        return {"norm.x_mean": self.x_mean, "norm.x_std": self.x_std,
                "norm.y": np.array([self.y_mean, self.y_std])}

    @classmethod
    def from_arrays(cls, arrays: dict, d: int) -> "Normalization":
        if "norm.x_mean" not in arrays:
            return cls(d=d)
        return cls(arrays["norm.x_mean"], arrays["norm.x_std"],
                   float(arrays["norm.y"][0]), float(arrays["norm.y"][1]))


class Dense:
    def __init__(self, n_in: int, n_out: int, rng, name: str):
        self.W = _uniform_init(rng, n_in, (n_in, n_out), f"{name}.W")
        self.b = _zeros(n_out, f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return ad.matmul(x, self.W) + self.b

    def parameters(self):
        return [self.W, self.b]


class FnnPredictor:
    """Three 256-unit ReLU layers and a linear scalar head."""

    kind = "fnn"

    def __init__(self, d_in: int, hidden: int = 256, n_hidden: int = 3, seed: int = 0):
        self.d_in = int(d_in)
        self.hidden = int(hidden)
        self.n_hidden = int(n_hidden)
        rng = np.random.default_rng([seed, 11])
        sizes = [d_in] + [hidden] * n_hidden
        self.layers = [Dense(sizes[i], sizes[i + 1], rng, f"fnn.l{i}")
                       for i in range(n_hidden)]
        self.head = Dense(hidden, 1, rng, "fnn.head")
        self.norm = Normalization(d=d_in)

    def set_normalization(self, norm: Normalization):
        self.norm = norm

    def parameters(self) -> list[Tensor]:
        params = []
        for layer in self.layers:
            params += layer.parameters()
        return params + self.head.parameters()

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def forward(self, x) -> Tensor:
        """(batch, d) -> (batch, 1) physical-unit prediction."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ShapeError(f"fnn_forward: expected (batch, {self.d_in}), got {x.shape}")
        h = self.norm.scale_x(x)
        for layer in self.layers:
            h = ad.relu(layer(h))
        return self.norm.unscale_y(self.head(h))

    # -- checkpointing ---------------------------------------------------

    def config(self) -> dict:
        return {"d_in": self.d_in, "hidden": self.hidden, "n_hidden": self.n_hidden}

    def to_arrays(self) -> dict:
        out = {}
        for p in self.parameters():
            out[p.name] = p.data
        out.update(self.norm.arrays())
        return out

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "FnnPredictor":
        model = cls(config["d_in"], config["hidden"], config["n_hidden"])
        for p in model.parameters():
            p.data = np.array(arrays[p.name], dtype=np.float64)
        model.norm = Normalization.from_arrays(arrays, config["d_in"])
        return model


class LstmLayer:
    """One bidirectional layer: sigmoid gates, tanh candidate, per-direction weights."""

    def __init__(self, n_in: int, hidden: int, rng, name: str):
        self.hidden = hidden
        self.dirs = {}
        for tag in ("fw", "bw"):
            self.dirs[tag] = {
                "Wx": _uniform_init(rng, n_in, (n_in, 4 * hidden), f"{name}.{tag}.Wx"),
                "Wh": _uniform_init(rng, hidden, (hidden, 4 * hidden), f"{name}.{tag}.Wh"),
                "b": _zeros(4 * hidden, f"{name}.{tag}.b"),
            }

    def parameters(self):
        out = []
        for tag in ("fw", "bw"):
            d = self.dirs[tag]
            out += [d["Wx"], d["Wh"], d["b"]]
        return out

    def _run(self, xs: list[Tensor], tag: str) -> list[Tensor]:
        d = self.dirs[tag]
        batch = xs[0].shape[0]
        h = Tensor(np.zeros((batch, self.hidden)))
        c = Tensor(np.zeros((batch, self.hidden)))
        outs = []
        for x in xs:
            z = ad.matmul(x, d["Wx"]) + ad.matmul(h, d["Wh"]) + d["b"]
            zi, zf, zg, zo = ad.split(z, 4, axis=1)
            i = ad.sigmoid(zi)
            f = ad.sigmoid(zf)
            g = ad.tanh(zg)
            o = ad.sigmoid(zo)
            c = f * c + i * g
            h = o * ad.tanh(c)
            outs.append(h)
        return outs

    def __call__(self, xs: list[Tensor]) -> tuple[list[Tensor], Tensor]:
        fw = self._run(xs, "fw")
        bw = self._run(list(reversed(xs)), "bw")
        bw_aligned = list(reversed(bw))
        seq = [ad.concat([f, b], axis=1) for f, b in zip(fw, bw_aligned)]
        final = ad.concat([fw[-1], bw[-1]], axis=1)
        return seq, final


class LstmPredictor:
    """Stacked bidirectional LSTM over a time window with a dense head."""

    kind = "lstm"

    def __init__(self, d_in: int, hidden: int = 256, n_layers: int = 3,
                 fc_sizes: tuple = (1024, 128), window: int = 8, seed: int = 0):
        self.d_in = int(d_in)
        self.hidden = int(hidden)
        self.n_layers = int(n_layers)
        self.fc_sizes = tuple(int(s) for s in fc_sizes)
        self.window = int(window)
        rng = np.random.default_rng([seed, 12])
        self.lstm_layers = []
        n_in = d_in
        for i in range(n_layers):
            self.lstm_layers.append(LstmLayer(n_in, hidden, rng, f"lstm.l{i}"))
            n_in = 2 * hidden
        self.fc = []
        sizes = [2 * hidden] + list(self.fc_sizes)
        for i in range(len(self.fc_sizes)):
            self.fc.append(Dense(sizes[i], sizes[i + 1], rng, f"lstm.fc{i}"))
        self.head = Dense(sizes[-1], 1, rng, "lstm.head")
        self.norm = Normalization(d=d_in)

    def set_normalization(self, norm: Normalization):
        self.norm = norm

    def parameters(self) -> list[Tensor]:
        params = []
        for layer in self.lstm_layers:
            params += layer.parameters()
        for layer in self.fc:
            params += layer.parameters()
        return params + self.head.parameters()

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def forward(self, x) -> Tensor:
        """(batch, window, d) -> (batch, 1) physical-unit prediction."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 3 or x.shape[2] != self.d_in:
            raise ShapeError(f"lstm_forward: expected (batch, W, {self.d_in}), got {x.shape}")
        width = x.shape[1]
        if width < 1:
            raise ShapeError("lstm_forward: window must contain at least one step")
        h = self.norm.scale_x(x)
        batch = x.shape[0]
        steps = [piece.reshape((batch, self.d_in)) for piece in ad.split(h, width, axis=1)]
        final = None
        for layer in self.lstm_layers:
            steps, final = layer(steps)
        z = final
        for layer in self.fc:
            z = ad.relu(layer(z))
        return self.norm.unscale_y(self.head(z))

    def config(self) -> dict:
        return {"d_in": self.d_in, "hidden": self.hidden, "n_layers": self.n_layers,
                "fc_sizes": list(self.fc_sizes), "window": self.window}

    def to_arrays(self) -> dict:
        out = {}
        for p in self.parameters():
            out[p.name] = p.data
        out.update(self.norm.arrays())
        return out

    @classmethod
    def from_arrays(cls, config: dict, arrays: dict) -> "LstmPredictor":
        model = cls(config["d_in"], config["hidden"], config["n_layers"],
                    tuple(config["fc_sizes"]), config["window"])
        for p in model.parameters():
            p.data = np.array(arrays[p.name], dtype=np.float64)
        model.norm = Normalization.from_arrays(arrays, config["d_in"])
        return model
