"""From-scratch 1D CNN for gesture classification.

Layers implement forward/backward over (batch, time, channels) arrays with
reverse-mode gradients accumulated per layer; no autograd framework. The
standard network reproduces the published stack exactly:

    (50, 325) -conv128-> (48, 128) -conv128-> (46, 128)
    -ReLU/dropout/pool-> (23, 128) -conv256-> (21, 256)
    -ReLU/dropout/pool-> (10, 256) -conv512-> (8, 512)
    -ReLU/dropout/pool-> (4, 512) -flatten-> 2048 -dense/ReLU/dropout-> 512
    -dense-> n_classes

Convolutions are valid (no padding) along time, pooling is width-2 max with
floor division, dropout is inverted and active only in train mode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .features import N_FRAMES, ROW_WIDTH, FeatureNormalizer, N_FEATURES
from .scene import GestureClass

GNET_MAGIC = b"GNET1"


class ShapeError(ValueError):
    """Input does not match the network's expected shape."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


def _he_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv1D:
    """Valid convolution along time: (B, T, C_in) -> (B, T-K+1, C_out)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, dtype=np.float32):
        self.w = _he_init(rng, (c_out, c_in, kernel), c_in * kernel, dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.kernel = kernel
        self._x_windows = None

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def forward(self, x, train_mode=False, rng=None):
        if x.shape[2] != self.w.shape[1]:
            raise ShapeError(f"conv expects {self.w.shape[1]} channels, got {x.shape[2]}")
        if x.shape[1] < self.kernel:
            raise ShapeError(f"conv needs >= {self.kernel} time steps, got {x.shape[1]}")
        xw = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=1)
        self._x_windows = xw  # (B, T_out, C_in, K)
        return np.tensordot(xw, self.w, axes=([2, 3], [1, 2])) + self.b

    def backward(self, dy):
        xw = self._x_windows
        self.grads = {
            "w": np.tensordot(dy, xw, axes=([0, 1], [0, 1])),  # (C_out, C_in, K)
            "b": dy.sum(axis=(0, 1)),
        }
        # dx as a valid convolution of the padded upstream gradient with the
        # kernel reversed along time.
        k = self.kernel
        dyp = np.pad(dy, ((0, 0), (k - 1, k - 1), (0, 0)))
        dyw = np.lib.stride_tricks.sliding_window_view(dyp, k, axis=1)  # (B, T, C_out, K)
        w_flip = self.w[:, :, ::-1]  # (C_out, C_in, K)
        return np.tensordot(dyw, w_flip, axes=([2, 3], [0, 2]))


class ReLU:
    def params(self):
        return []

    def forward(self, x, train_mode=False, rng=None):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Dropout:
    """Inverted dropout; identity when not in train mode."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self._mask = None

    def params(self):
        return []

    def forward(self, x, train_mode=False, rng=None):
        if not train_mode or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask.astype(x.dtype)

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask.astype(dy.dtype)


class MaxPool1D:
    """Width-w max pooling along time with floor division (trailing remainder
    dropped). Gradient routes to the first maximum of each window."""

    def __init__(self, width: int = 2):
        self.width = width

    def params(self):
        return []

    def forward(self, x, train_mode=False, rng=None):
        b, t, c = x.shape
        t_out = t // self.width
        xr = x[:, : t_out * self.width, :].reshape(b, t_out, self.width, c)
        self._x_shape = x.shape
        self._argmax = xr.argmax(axis=2)
        return xr.max(axis=2)

    def backward(self, dy):
        b, t_out, c = dy.shape
        dxr = np.zeros((b, t_out, self.width, c), dtype=dy.dtype)
        np.put_along_axis(dxr, self._argmax[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(self._x_shape, dtype=dy.dtype)
        dx[:, : t_out * self.width, :] = dxr.reshape(b, t_out * self.width, c)
        return dx


class Flatten:
    def params(self):
        return []

    def forward(self, x, train_mode=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Dense:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32):
        self.w = _he_init(rng, (d_in, d_out), d_in, dtype)
        self.b = np.zeros(d_out, dtype=dtype)

    def params(self):
        return [("w", self.w), ("b", self.b)]

    def forward(self, x, train_mode=False, rng=None):
        if x.shape[1] != self.w.shape[0]:
            raise ShapeError(f"dense expects {self.w.shape[0]} inputs, got {x.shape[1]}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.grads = {"w": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.w.T


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    p = softmax(logits.astype(np.float64))
    n = logits.shape[0]
    loss = -np.mean(np.log(p[np.arange(n), labels] + 1e-300))
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), (dlogits / n).astype(logits.dtype)


class GestureNet:
    """A layer stack plus the featurization normalizer it was trained with."""

    def __init__(self, layers: list, n_classes: int, dropout_rate: float,
                 input_shape: tuple[int, int],
                 normalizer: FeatureNormalizer | None = None):
        self.layers = layers
        self.n_classes = n_classes
        self.dropout_rate = dropout_rate
        self.input_shape = input_shape
        self.normalizer = normalizer or FeatureNormalizer()

    @classmethod
    def standard(cls, n_classes: int = 9, dropout_rate: float = 0.3, seed: int = 0,
                 dtype=np.float32, normalizer: FeatureNormalizer | None = None) -> "GestureNet":
        rng = np.random.default_rng(seed)
        layers = [
            Conv1D(ROW_WIDTH, 128, 3, rng, dtype),
            Conv1D(128, 128, 3, rng, dtype),
            ReLU(), Dropout(dropout_rate), MaxPool1D(2),
            Conv1D(128, 256, 3, rng, dtype),
            ReLU(), Dropout(dropout_rate), MaxPool1D(2),
            Conv1D(256, 512, 3, rng, dtype),
            ReLU(), Dropout(dropout_rate), MaxPool1D(2),
            Flatten(),
            Dense(2048, 512, rng, dtype),
            ReLU(), Dropout(dropout_rate),
            Dense(512, n_classes, rng, dtype),
        ]
        return cls(layers, n_classes, dropout_rate, (N_FRAMES, ROW_WIDTH), normalizer)

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                out.append((f"layer{i}_{type(layer).__name__.lower()}_{name}", arr))
        return out

    def forward(self, x: np.ndarray, train_mode: bool = False,
                rng: np.random.Generator | None = None,
                trace: list | None = None) -> np.ndarray:
        """x: (B, T, C) or a single (T, C) matrix. Appends each layer's output
        shape (without the batch axis) to `trace` when given."""
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None, :, :]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"expected input {self.input_shape}, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, train_mode=train_mode, rng=rng)
            if trace is not None:
                trace.append(tuple(x.shape[1:]))
        return x[0] if squeeze else x

    def loss_and_grad(self, xb: np.ndarray, yb: np.ndarray,
                      rng: np.random.Generator | None = None,
                      train_mode: bool = True) -> tuple[float, list[dict]]:
        """Mean cross-entropy over the batch and per-layer parameter grads."""
        if xb.shape[0] == 0:
            raise ValueError("empty batch")
        logits = self.forward(xb, train_mode=train_mode, rng=rng)
        loss, dlogits = cross_entropy(logits, yb)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss}")
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return loss, [getattr(layer, "grads", {}) for layer in self.layers]

    def predict_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(argmax labels, softmax probabilities); inference mode, no rng."""
        logits = self.forward(x, train_mode=False)
        p = softmax(logits)
        return p.argmax(axis=-1), p

    def state_arrays(self) -> list[np.ndarray]:
        return [arr for _, arr in self.parameters()]

    def load_state_arrays(self, arrays: list[np.ndarray]) -> None:
        own = self.parameters()
        if len(arrays) != len(own):
            raise ShapeError(f"checkpoint has {len(arrays)} tensors, net has {len(own)}")
        for (name, dst), src in zip(own, arrays):
            if dst.shape != src.shape:
                raise ShapeError(f"{name}: shape {src.shape} != {dst.shape}")
            dst[...] = src

    def copy_state(self) -> list[np.ndarray]:
        return [arr.copy() for arr in self.state_arrays()]


def predict(
    net: GestureNet,
    matrix: np.ndarray,
    confidence_threshold: float = 0.8,
) -> tuple[GestureClass, float] | None:
    """Classify one feature matrix; None means no gesture (below threshold)."""
    _, p = net.predict_batch(matrix[None, :, :].astype(np.float32))
    idx = int(p[0].argmax())
    confidence = float(p[0, idx])
    if confidence < confidence_threshold:
        return None
    return GestureClass(idx), confidence


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 14
    dropout_rate: float = 0.3
    seed: int = 0
    beta1: float = 0.9       # Adam first-moment decay
    beta2: float = 0.999     # Adam second-moment decay
    adam_eps: float = 1e-8
    early_stop_val_accuracy: float = 1.0  # stop once val accuracy reaches this

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("learning_rate must be >= 0; batch_size/epochs positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


class AdamOptimizer:
    def __init__(self, net: GestureNet, config: TrainConfig):
        self.cfg = config
        self.m = [np.zeros_like(a, dtype=np.float64) for a in net.state_arrays()]
        self.v = [np.zeros_like(a, dtype=np.float64) for a in net.state_arrays()]
        self.t = 0

    def step(self, net: GestureNet, layer_grads: list[dict]) -> None:
        self.t += 1
        cfg = self.cfg
        flat_grads = []
        for layer, grads in zip(net.layers, layer_grads):
            for name, _ in layer.params():
                flat_grads.append(grads[name])
        arrays = net.state_arrays()
        bias1 = 1.0 - cfg.beta1 ** self.t
        bias2 = 1.0 - cfg.beta2 ** self.t
        for arr, g, m, v in zip(arrays, flat_grads, self.m, self.v):
            g = g.astype(np.float64)
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            update = cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + cfg.adam_eps)
            arr -= update.astype(arr.dtype)


@dataclass
class TrainResult:
    net: GestureNet
    log: list[dict] = field(default_factory=list)
    best_val_accuracy: float = 0.0


def train_arrays(
    x_train: np.ndarray, y_train: np.ndarray,
    x_val: np.ndarray, y_val: np.ndarray,
    config: TrainConfig,
    n_classes: int = 9,
    normalizer: FeatureNormalizer | None = None,
    verbose: bool = False,
) -> TrainResult:
    """Mini-batch Adam over pre-featurized arrays; keeps the best-validation
    checkpoint. Deterministic for a given config seed."""
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and val splits must be non-empty")
    net = GestureNet.standard(
        n_classes=n_classes, dropout_rate=config.dropout_rate,
        seed=config.seed, normalizer=normalizer,
    )
    opt = AdamOptimizer(net, config)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])

    best_state = net.copy_state()
    best_val = -1.0
    log: list[dict] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(x_train))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = net.loss_and_grad(x_train[idx], y_train[idx], rng=dropout_rng)
            opt.step(net, grads)
            epoch_loss += loss
            n_batches += 1
        train_preds = predict_labels(net, x_train)
        val_preds = predict_labels(net, x_val)
        entry = {
            "epoch": epoch,
            "loss": epoch_loss / max(n_batches, 1),
            "train_accuracy": float(np.mean(train_preds == y_train)),
            "val_accuracy": float(np.mean(val_preds == y_val)),
        }
        log.append(entry)
        if verbose:
            print(f"  epoch {epoch}: loss {entry['loss']:.4f} "
                  f"train {entry['train_accuracy']:.4f} val {entry['val_accuracy']:.4f}")
        if entry["val_accuracy"] > best_val:
            best_val = entry["val_accuracy"]
            best_state = net.copy_state()
        if entry["val_accuracy"] >= config.early_stop_val_accuracy:
            break
    net.load_state_arrays(best_state)
    return TrainResult(net=net, log=log, best_val_accuracy=best_val)


def predict_labels(net: GestureNet, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    preds = np.empty(len(x), dtype=np.int64)
    for i in range(0, len(x), batch_size):
        preds[i : i + batch_size], _ = net.predict_batch(x[i : i + batch_size])
    return preds


def featurize_split(manifest, split: str, normalizer: FeatureNormalizer) -> tuple[np.ndarray, np.ndarray]:
    """Load and featurize every sample of a manifest split through the same
    segmentation rules the live pipeline applies, so training and inference
    see identically windowed matrices."""
    from .dataset import load_sample_frames
    from .segmenter import offline_emission

    records = manifest.split_samples(split)
    x = np.zeros((len(records), N_FRAMES, ROW_WIDTH), dtype=np.float32)
    y = np.zeros(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        x[i] = offline_emission(load_sample_frames(manifest, rec), normalizer=normalizer)
        y[i] = rec.label.value
    return x, y


def train(manifest, config: TrainConfig, verbose: bool = False) -> TrainResult:
    """Fit the feature normalizer on the train split, featurize all splits,
    and run the optimizer. The normalizer travels with the returned network
    (and its checkpoint), so inference is self-contained."""
    from .dataset import load_sample_frames

    train_records = manifest.split_samples("train")
    if not train_records or not manifest.split_samples("val"):
        raise ValueError("dataset needs non-empty train and val splits")
    normalizer = FeatureNormalizer.fit(
        [load_sample_frames(manifest, rec) for rec in train_records]
    )
    x_train, y_train = featurize_split(manifest, "train", normalizer)
    x_val, y_val = featurize_split(manifest, "val", normalizer)
    return train_arrays(
        x_train, y_train, x_val, y_val, config,
        n_classes=len(GestureClass), normalizer=normalizer, verbose=verbose,
    )


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray        # [n_classes, n_classes] counts, rows = truth
    skipped_classes: tuple[int, ...] = ()  # classes with no test support

    def to_text(self, class_names: list[str] | None = None) -> str:
        n = self.confusion.shape[0]
        names = class_names or [str(i) for i in range(n)]
        width = max(max(len(s) for s in names), 5) + 1
        lines = [
            f"accuracy     {self.accuracy:.4f}",
            f"macro recall {self.macro_recall:.4f}",
            f"macro f1     {self.macro_f1:.4f}",
            "confusion (rows = truth):",
            " " * width + "".join(f"{s:>{width}}" for s in names),
        ]
        for i in range(n):
            row = "".join(f"{int(c):>{width}}" for c in self.confusion[i])
            lines.append(f"{names[i]:>{width}}" + row)
        if self.skipped_classes:
            lines.append(f"classes without support (excluded from macros): {list(self.skipped_classes)}")
        return "\n".join(lines)


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> EvalReport:
    """Accuracy, macro recall, macro F1 (classes with no support excluded and
    flagged), and the full confusion matrix."""
    if len(y_true) == 0:
        raise ValueError("no predictions to score")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[int(t), int(p)] += 1
    accuracy = float(np.trace(confusion)) / float(len(y_true))

    recalls, f1s, skipped = [], [], []
    for c in range(n_classes):
        support = confusion[c, :].sum()
        if support == 0:
            skipped.append(c)
            continue
        tp = confusion[c, c]
        recall = tp / support
        predicted = confusion[:, c].sum()
        precision = tp / predicted if predicted else 0.0
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        recalls.append(recall)
        f1s.append(f1)
    return EvalReport(
        accuracy=accuracy,
        macro_recall=float(np.mean(recalls)),
        macro_f1=float(np.mean(f1s)),
        confusion=confusion,
        skipped_classes=tuple(skipped),
    )


def evaluate(net: GestureNet, x: np.ndarray, y: np.ndarray) -> EvalReport:
    if len(x) == 0:
        raise ValueError("empty test split")
    return report_from_predictions(y, predict_labels(net, x), net.n_classes)


# ---------------------------------------------------------------------------
# Checkpoint format GNET1: little-endian
#   magic "GNET1" | u32 n_classes | f32 dropout_rate
#   | 5 x f32 normalizer shift | 5 x f32 normalizer scale
#   | u32 n_tensors | per tensor: u32 ndim, ndim x u32 dims, float32 data
# Tensors follow the standard network's fixed layer order.
# ---------------------------------------------------------------------------

_HDR = struct.Struct("<5sIf")
_U32 = struct.Struct("<I")


def save_checkpoint(path, net: GestureNet) -> None:
    arrays = net.state_arrays()
    with open(path, "wb") as fh:
        fh.write(_HDR.pack(GNET_MAGIC, net.n_classes, net.dropout_rate))
        fh.write(np.asarray(net.normalizer.shift, dtype="<f4").tobytes())
        fh.write(np.asarray(net.normalizer.scale, dtype="<f4").tobytes())
        fh.write(_U32.pack(len(arrays)))
        for arr in arrays:
            fh.write(_U32.pack(arr.ndim))
            for dim in arr.shape:
                fh.write(_U32.pack(dim))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> GestureNet:
    with open(path, "rb") as fh:
        raw = fh.read(_HDR.size)
        if len(raw) < _HDR.size:
            raise ValueError(f"{path}: truncated checkpoint header")
        magic, n_classes, dropout_rate = _HDR.unpack(raw)
        if magic != GNET_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        shift = np.frombuffer(fh.read(4 * N_FEATURES), dtype="<f4").astype(np.float64)
        scale = np.frombuffer(fh.read(4 * N_FEATURES), dtype="<f4").astype(np.float64)
        (n_tensors,) = _U32.unpack(fh.read(_U32.size))
        arrays = []
        for _ in range(n_tensors):
            (ndim,) = _U32.unpack(fh.read(_U32.size))
            shape = tuple(_U32.unpack(fh.read(_U32.size))[0] for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape)
            arrays.append(data.astype(np.float32))
    net = GestureNet.standard(
        n_classes=n_classes, dropout_rate=float(dropout_rate),
        normalizer=FeatureNormalizer(shift=shift, scale=scale),
    )
    net.load_state_arrays(arrays)
    return net
