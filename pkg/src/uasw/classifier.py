"""Multi-head dense network for obstacle attributes, trained from scratch.

A shared ReLU trunk feeds three softmax heads (material, surface, movement).
The loss is the sum of the heads' categorical cross-entropies, optimised with
Adam; the best-validation-loss weights are kept.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .radar_sim import MATERIALS, MOVEMENTS, SURFACES

HEADS = (MATERIALS, SURFACES, MOVEMENTS)
HEAD_NAMES = ("material", "surface", "movement")
HEAD_SIZES = tuple(len(h) for h in HEADS)
DEFAULT_HIDDEN = (12, 12)
N_FEATURES = 15

MAGIC = b"UASWMLP1"


class ObstacleLabel(NamedTuple):
    material: str
    surface: str
    movement: str

    def indices(self) -> tuple[int, int, int]:
        return (
            MATERIALS.index(self.material),
            SURFACES.index(self.surface),
            MOVEMENTS.index(self.movement),
        )

    @classmethod
    def from_indices(cls, idx) -> "ObstacleLabel":
        return cls(MATERIALS[idx[0]], SURFACES[idx[1]], MOVEMENTS[idx[2]])

    def validate(self) -> "ObstacleLabel":
        for value, allowed, name in zip(self, HEADS, HEAD_NAMES):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")
        return self


ALL_LABELS = tuple(
    ObstacleLabel(m, s, v) for m in MATERIALS for s in SURFACES for v in MOVEMENTS
)


@dataclass(eq=False)
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head_weights: list[np.ndarray]
    head_biases: list[np.ndarray]
    scaler_mean: np.ndarray
    scaler_std: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.scaler_mean.size

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.biases)

    @property
    def head_sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.head_biases)

    def params(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (trunk W, b pairs then heads)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        for w, b in zip(self.head_weights, self.head_biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [w.copy() for w in self.head_weights],
            [b.copy() for b in self.head_biases],
            self.scaler_mean.copy(),
            self.scaler_std.copy(),
        )

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        mine, theirs = self._arrays(), other._arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)
        )

    def _arrays(self):
        return self.params() + [self.scaler_mean, self.scaler_std]


def init_model(
    n_inputs: int = N_FEATURES,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    head_sizes: Sequence[int] = HEAD_SIZES,
    rng: np.random.Generator | None = None,
    zero: bool = False,
) -> MlpModel:
    """He-initialised weights, zero biases, identity scaler."""
    rng = np.random.default_rng(0) if rng is None else rng

    def dense(n_in, n_out):
        if zero:
            return np.zeros((n_in, n_out)), np.zeros(n_out)
        return rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, n_out)), np.zeros(n_out)

    weights, biases = [], []
    width = n_inputs
    for h in hidden:
        w, b = dense(width, h)
        weights.append(w)
        biases.append(b)
        width = h
    head_w, head_b = [], []
    for k in head_sizes:
        w, b = dense(width, k)
        head_w.append(w)
        head_b.append(b)
    return MlpModel(weights, biases, head_w, head_b, np.zeros(n_inputs), np.ones(n_inputs))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _trunk(model: MlpModel, x: np.ndarray):
    acts = [x]
    for w, b in zip(model.weights, model.biases):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    return acts


def logits(model: MlpModel, x_std: np.ndarray) -> list[np.ndarray]:
    """Head logits for already-standardised inputs of shape (batch, n_inputs)."""
    h = _trunk(model, x_std)[-1]
    return [h @ w + b for w, b in zip(model.head_weights, model.head_biases)]


def standardize(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} features, got {x.shape[-1]}")
    return (x - model.scaler_mean) / model.scaler_std


def forward(features, model: MlpModel) -> tuple[np.ndarray, ...]:
    """Per-head class probabilities for one raw feature vector (or a batch)."""
    x = standardize(model, features)
    single = x.ndim == 1
    probs = [softmax(z) for z in logits(model, np.atleast_2d(x))]
    return tuple(p[0] if single else p for p in probs)


def loss_and_grads(model: MlpModel, x_std: np.ndarray, targets: np.ndarray):
    """Summed cross-entropy (batch mean per head) and its gradient.

    ``targets`` is an int array of shape (batch, n_heads). Gradients come back
    in :meth:`MlpModel.params` order.
    """
    n = x_std.shape[0]
    acts = _trunk(model, x_std)
    h = acts[-1]
    loss = 0.0
    dh = np.zeros_like(h)
    head_grads = []
    for k, (w, b) in enumerate(zip(model.head_weights, model.head_biases)):
        p = softmax(h @ w + b)
        y = targets[:, k]
        loss -= np.log(np.clip(p[np.arange(n), y], 1e-300, None)).mean()
        dz = p.copy()
        dz[np.arange(n), y] -= 1.0
        dz /= n
        head_grads += [h.T @ dz, dz.sum(axis=0)]
        dh += dz @ w.T
    trunk_grads = []
    for i in range(len(model.weights) - 1, -1, -1):
        dz = dh * (acts[i + 1] > 0)
        trunk_grads = [acts[i].T @ dz, dz.sum(axis=0)] + trunk_grads
        dh = dz @ model.weights[i].T
    return float(loss), trunk_grads + head_grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 1000
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[tuple[float, ...]] = field(default_factory=list)
    best_epoch: int = 0


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]):
        c = self.cfg
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def label_targets(labels: Sequence[ObstacleLabel]) -> np.ndarray:
    return np.array([lab.indices() for lab in labels], dtype=np.int64).reshape(-1, 3)


def head_accuracy(model: MlpModel, x, targets: np.ndarray) -> tuple[float, ...]:
    probs = forward(np.atleast_2d(x), model)
    return tuple(float((p.argmax(axis=1) == targets[:, k]).mean()) for k, p in enumerate(probs))


def macro_f1(model: MlpModel, x, targets: np.ndarray) -> tuple[float, ...]:
    """Per-head F1 averaged over classes with equal weight; a class never
    predicted and never present scores 0."""
    probs = forward(np.atleast_2d(x), model)
    out = []
    for k, p in enumerate(probs):
        pred, true = p.argmax(axis=1), targets[:, k]
        scores = []
        for c in range(p.shape[1]):
            tp = np.sum((pred == c) & (true == c))
            denom = np.sum(pred == c) + np.sum(true == c)
            scores.append(2 * tp / denom if denom else 0.0)
        out.append(float(np.mean(scores)))
    return tuple(out)


def train(
    x_train,
    y_train: Sequence[ObstacleLabel],
    x_val,
    y_val: Sequence[ObstacleLabel],
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    config: TrainConfig = TrainConfig(),
) -> tuple[MlpModel, TrainHistory]:
    """Fit the scaler on the training split, then train with early stopping."""
    x_train = np.asarray(x_train, dtype=float)
    x_val = np.asarray(x_val, dtype=float)
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("training and validation splits must be non-empty")
    t_train, t_val = label_targets(y_train), label_targets(y_val)
    for k, name in enumerate(HEAD_NAMES):
        missing = set(range(HEAD_SIZES[k])) - set(t_train[:, k].tolist())
        if missing:
            absent = [HEADS[k][i] for i in sorted(missing)]
            raise ValueError(f"{name} class(es) {absent} absent from the training split")

    rng = np.random.default_rng(config.seed)
    model = init_model(x_train.shape[1], hidden, HEAD_SIZES, rng)
    model.scaler_mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    model.scaler_std = np.where(std > 0, std, 1.0)
    xs_train = standardize(model, x_train)
    xs_val = standardize(model, x_val)

    opt = Adam(model.params(), config)
    history = TrainHistory()
    history.train_loss.append(loss_and_grads(model, xs_train, t_train)[0])
    best_val = loss_and_grads(model, xs_val, t_val)[0]
    history.val_loss.append(best_val)
    history.val_accuracy.append(head_accuracy(model, x_val, t_val))
    best = model.copy()
    stale = 0
    n = len(xs_train)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = loss_and_grads(model, xs_train[idx], t_train[idx])
            opt.step(grads)
        history.train_loss.append(loss_and_grads(model, xs_train, t_train)[0])
        val = loss_and_grads(model, xs_val, t_val)[0]
        history.val_loss.append(val)
        history.val_accuracy.append(head_accuracy(model, x_val, t_val))
        if val < best_val:
            best_val, best, stale = val, model.copy(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


@dataclass(frozen=True)
class Classification:
    label: ObstacleLabel
    confidence: tuple[float, float, float]


def classify(features, model: MlpModel) -> Classification:
    """Argmax per head; ties go to the lowest class index."""
    probs = forward(features, model)
    idx = tuple(int(np.argmax(p)) for p in probs)
    conf = tuple(float(p[i]) for p, i in zip(probs, idx))
    return Classification(ObstacleLabel.from_indices(idx), conf)


def ensemble_classify(history: Sequence[Classification | ObstacleLabel]) -> ObstacleLabel:
    """Per-head majority over the last (up to) three outputs, oldest first.
    Ties go to whichever tied value was voted most recently."""
    if not history:
        raise ValueError("ensemble needs at least one classification")
    labels = [h.label if isinstance(h, Classification) else h for h in history[-3:]]
    out = []
    for k in range(3):
        votes = [lab[k] for lab in labels]
        counts = Counter(votes)
        top = max(counts.values())
        out.append(next(v for v in reversed(votes) if counts[v] == top))
    return ObstacleLabel(*out)


def model_to_bytes(model: MlpModel) -> bytes:
    """Serialise to the flat little-endian ``UASWMLP1`` layout.

    Layout: magic, u32 n_inputs, u32 n_hidden, u32 x n_hidden widths,
    u32 n_heads, u32 x n_heads sizes, then float32 arrays: each trunk layer's
    W (row-major, in x out) and b, each head's W and b, scaler mean, scaler std.
    """
    hidden, heads = model.hidden, model.head_sizes
    header = MAGIC + struct.pack(
        f"<II{len(hidden)}I I{len(heads)}I",
        model.n_inputs, len(hidden), *hidden, len(heads), *heads,
    )
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for a in model._arrays()
    )
    return header + body


def model_from_bytes(data: bytes) -> MlpModel:
    if data[:8] != MAGIC:
        raise ValueError("not a UASWMLP1 model file")
    try:
        off = 8
        n_inputs, n_hidden = struct.unpack_from("<II", data, off)
        off += 8
        hidden = struct.unpack_from(f"<{n_hidden}I", data, off)
        off += 4 * n_hidden
        (n_heads,) = struct.unpack_from("<I", data, off)
        off += 4
        heads = struct.unpack_from(f"<{n_heads}I", data, off)
        off += 4 * n_heads
    except struct.error as exc:
        raise ValueError(f"truncated model header: {exc}") from None

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        if off + 4 * count > len(data):
            raise ValueError("truncated model body")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).astype(float)
        off += 4 * count
        return arr.reshape(shape)

    weights, biases, hw, hb = [], [], [], []
    width = n_inputs
    for h in hidden:
        weights.append(take((width, h)))
        biases.append(take((h,)))
        width = h
    for k in heads:
        hw.append(take((width, k)))
        hb.append(take((k,)))
    mean, std = take((n_inputs,)), take((n_inputs,))
    if off != len(data):
        raise ValueError(f"{len(data) - off} trailing bytes in model file")
    return MlpModel(weights, biases, hw, hb, mean, std)


def save_model(model: MlpModel, path):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
