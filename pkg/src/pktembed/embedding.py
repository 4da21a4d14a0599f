"""Skip-gram n-gram embeddings trained with noise-contrastive estimation.

The model discriminates true context tokens from noise tokens with a
logistic loss (the negative-sampling form): for a (target t, context c)
pair and noise ids k,

    loss = -log sigmoid(s(t, c)) - sum_k log sigmoid(-s(t, k))
    s(t, w) = rows[t] . nce_weights[w] + nce_biases[w]

averaged over the batch. One set of ``num_negative`` noise ids is drawn per
batch from a log-uniform (Zipfian) distribution over ids 1..|V|, which
matches the frequency ranking of the dictionary. Training is plain SGD,
single-threaded, and bit-deterministic for a fixed seed. Row 0 (the
out-of-vocabulary id) is never a target and never receives updates, so it
stays exactly zero.

Matrices are float32 in memory (matching the bit-exact P2VEMB1 file
format); loss and gradient arithmetic runs in float64.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ConsistencyError, DegenerateStreamError, DivergenceError,
                     FormatError, TruncatedError)

MAGIC = b"P2VEMB1"


@dataclass
class EmbeddingConfig:
    batch_size: int = 128
    skip_window: int = 1
    num_skips: int = 2
    embedding_size: int = 128
    num_negative: int = 64
    num_steps: int = 100_000
    learning_rate: float = 1.0
    seed: int = 1

    def __post_init__(self):
        if self.num_skips > 2 * self.skip_window:
            raise ValueError("num_skips must be <= 2 * skip_window")
        if self.batch_size % self.num_skips != 0:
            raise ValueError("batch_size must be divisible by num_skips")
        if min(self.batch_size, self.skip_window, self.num_skips,
               self.embedding_size, self.num_negative, self.num_steps) < 1:
            raise ValueError("all size hyperparameters must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EmbeddingModel:
    rows: np.ndarray         # (|V|+1, d) token embeddings; row 0 = OOV, zero
    nce_weights: np.ndarray  # (|V|+1, d) output weights
    nce_biases: np.ndarray   # (|V|+1,) output biases

    @property
    def vocab_size(self) -> int:
        return self.rows.shape[0] - 1

    @property
    def embedding_size(self) -> int:
        return self.rows.shape[1]


@dataclass
class BatchGradients:
    """Sparse gradients touching only the ids seen by one batch."""
    row_ids: np.ndarray
    row_grads: np.ndarray    # (len(row_ids), d) float64
    out_ids: np.ndarray
    weight_grads: np.ndarray  # (len(out_ids), d) float64
    bias_grads: np.ndarray    # (len(out_ids),) float64


def init_model(vocab_size: int, config: EmbeddingConfig,
               rng=None) -> EmbeddingModel:
    """Fresh model: rows uniform in [-1, 1), weights N(0, 1/sqrt(d)),
    biases zero, OOV row zeroed."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    d = config.embedding_size
    rows = rng.uniform(-1.0, 1.0, size=(vocab_size + 1, d))
    rows[0] = 0.0
    weights = rng.normal(0.0, 1.0 / np.sqrt(d), size=(vocab_size + 1, d))
    biases = np.zeros(vocab_size + 1)
    return EmbeddingModel(rows=rows.astype(np.float32),
                          nce_weights=weights.astype(np.float32),
                          nce_biases=biases.astype(np.float32))


def generate_batch(stream, cursor, config: EmbeddingConfig, rng):
    """Next batch of (target, context) pairs from a flat token stream.

    The batch covers batch_size/num_skips consecutive window centers
    starting at ``cursor`` (wrapping at the end of the stream); centers
    whose token is 0 (out of vocabulary) are skipped. For each center,
    num_skips contexts are drawn without replacement from the surrounding
    window of radius skip_window.

    Returns (targets, contexts, new_cursor).
    """
    stream = np.asarray(stream)
    sw = config.skip_window
    lo, hi = sw, len(stream) - 1 - sw
    if hi < lo:
        raise DegenerateStreamError(
            f"stream of {len(stream)} tokens has no window of radius {sw}")
    n_centers = hi - lo + 1
    if cursor is None or not lo <= cursor <= hi:
        cursor = lo
    windows = config.batch_size // config.num_skips

    # Scan forward from the cursor (wrapping once at most) for the next
    # ``windows`` centers whose target is in vocabulary.
    found = []
    n_found = 0
    pos = cursor
    scanned = 0
    while n_found < windows and scanned < n_centers:
        take = min(max(2 * windows, 512), n_centers - scanned, hi + 1 - pos)
        segment = np.arange(pos, pos + take)
        good = segment[stream[segment] != 0]
        if good.size:
            found.append(good)
            n_found += good.size
        scanned += take
        pos += take
        if pos > hi:
            pos = lo
    valid = (np.concatenate(found) if found
             else np.empty(0, dtype=np.int64))
    if valid.size == 0:
        raise DegenerateStreamError("every window center is out of vocabulary")
    if valid.size >= windows:
        centers = valid[:windows]
    else:
        # Fewer usable centers than windows: the full circle was scanned,
        # so further sweeps repeat the same centers in the same order.
        centers = np.resize(valid, windows)
    last = int(centers[-1])
    new_cursor = lo if last + 1 > hi else last + 1

    offsets = np.concatenate([np.arange(-sw, 0), np.arange(1, sw + 1)])
    perms = rng.permuted(np.tile(offsets, (windows, 1)), axis=1)
    chosen = perms[:, :config.num_skips]

    targets = np.repeat(stream[centers].astype(np.int64), config.num_skips)
    contexts = stream[
        (np.repeat(centers, config.num_skips) + chosen.ravel())
    ].astype(np.int64)
    return targets, contexts, new_cursor


def sample_noise(vocab_size: int, num_negative: int, rng) -> np.ndarray:
    """Log-uniform noise ids over 1..vocab_size: P(k) ~ log((k+1)/k)."""
    u = rng.random(num_negative)
    ids = np.floor(np.exp(u * np.log(vocab_size + 1.0))).astype(np.int64)
    return np.minimum(ids, vocab_size)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x):
    return np.logaddexp(0.0, x)


def nce_loss_and_grad(model: EmbeddingModel, targets, contexts, noise):
    """Batch loss and sparse gradients for fixed noise ids.

    Noise ids are shared across the batch. Gradients are nonzero only for
    the target rows and the context/noise output weights and biases.
    """
    targets = np.asarray(targets, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.int64)
    noise = np.asarray(noise, dtype=np.int64)
    batch = targets.size

    t_rows = model.rows[targets].astype(np.float64)        # (B, d)
    c_w = model.nce_weights[contexts].astype(np.float64)   # (B, d)
    c_b = model.nce_biases[contexts].astype(np.float64)    # (B,)
    n_w = model.nce_weights[noise].astype(np.float64)      # (K, d)
    n_b = model.nce_biases[noise].astype(np.float64)       # (K,)

    s_true = np.einsum("bd,bd->b", t_rows, c_w) + c_b      # (B,)
    s_noise = t_rows @ n_w.T + n_b                          # (B, K)
    loss = float(np.mean(_softplus(-s_true) + _softplus(s_noise).sum(axis=1)))

    g_true = (_sigmoid(s_true) - 1.0) / batch               # (B,)
    g_noise = _sigmoid(s_noise) / batch                     # (B, K)

    # d loss / d rows[target]
    row_grad_dense = g_true[:, None] * c_w + g_noise @ n_w  # (B, d)
    row_ids, row_inv = np.unique(targets, return_inverse=True)
    row_grads = np.zeros((row_ids.size, t_rows.shape[1]))
    np.add.at(row_grads, row_inv, row_grad_dense)

    # d loss / d nce_weights, nce_biases at contexts and noise ids
    all_out = np.concatenate([contexts, noise])
    out_ids, out_inv = np.unique(all_out, return_inverse=True)
    weight_grads = np.zeros((out_ids.size, t_rows.shape[1]))
    bias_grads = np.zeros(out_ids.size)
    np.add.at(weight_grads, out_inv[:batch], g_true[:, None] * t_rows)
    np.add.at(bias_grads, out_inv[:batch], g_true)
    np.add.at(weight_grads, out_inv[batch:], g_noise.T @ t_rows)
    np.add.at(bias_grads, out_inv[batch:], g_noise.sum(axis=0))

    grads = BatchGradients(row_ids=row_ids, row_grads=row_grads,
                           out_ids=out_ids, weight_grads=weight_grads,
                           bias_grads=bias_grads)
    return loss, grads


def apply_gradients(model: EmbeddingModel, grads: BatchGradients, lr: float):
    """SGD step over the touched ids, rounding back to the model dtype."""
    dtype = model.rows.dtype
    model.rows[grads.row_ids] = (
        model.rows[grads.row_ids].astype(np.float64) - lr * grads.row_grads
    ).astype(dtype)
    model.nce_weights[grads.out_ids] = (
        model.nce_weights[grads.out_ids].astype(np.float64)
        - lr * grads.weight_grads
    ).astype(dtype)
    model.nce_biases[grads.out_ids] = (
        model.nce_biases[grads.out_ids].astype(np.float64)
        - lr * grads.bias_grads
    ).astype(dtype)


def train_on_stream(model: EmbeddingModel, stream, config: EmbeddingConfig,
                    rng, label="stream") -> np.ndarray:
    """Run config.num_steps SGD steps on one flat stream; returns the
    per-step losses."""
    stream = np.asarray(stream)
    losses = np.empty(config.num_steps)
    cursor = None
    for step in range(config.num_steps):
        targets, contexts, cursor = generate_batch(stream, cursor, config, rng)
        noise = sample_noise(model.vocab_size, config.num_negative, rng)
        loss, grads = nce_loss_and_grad(model, targets, contexts, noise)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"{label}: non-finite loss at step {step}", step=step)
        apply_gradients(model, grads, config.learning_rate)
        losses[step] = loss
    return losses


def train_embeddings(flat_paths, vocabulary, config: EmbeddingConfig,
                     initial: EmbeddingModel = None,
                     loss_sink=None) -> EmbeddingModel:
    """Train over flat token files in order, warm-starting across files.

    The first file trains from a fresh initialization (or from ``initial``);
    every later file resumes from the matrix the previous file produced.
    """
    from .translate import load_flat

    rng = np.random.default_rng(config.seed)
    model = initial if initial is not None else init_model(
        vocabulary.vocab_size, config, rng)
    if model.vocab_size != vocabulary.vocab_size:
        raise ConsistencyError(
            f"model has {model.vocab_size} vocabulary rows, "
            f"vocabulary expects {vocabulary.vocab_size}")
    for path in flat_paths:
        if not Path(path).exists():
            raise FileNotFoundError(f"flat token file missing: {path}")
        stream, n = load_flat(path)
        if n != vocabulary.n:
            raise ConsistencyError(
                f"{path}: tokens built with n={n}, vocabulary has "
                f"n={vocabulary.n}")
        if stream.size and int(stream.max()) > vocabulary.vocab_size:
            raise ConsistencyError(
                f"{path}: token id {int(stream.max())} exceeds vocabulary "
                f"size {vocabulary.vocab_size}")
        try:
            losses = train_on_stream(model, stream, config, rng, label=str(path))
        except DegenerateStreamError as err:
            raise DegenerateStreamError(f"{path}: {err}") from err
        if loss_sink is not None:
            loss_sink(str(path), losses)
    return model


def save_embeddings(model: EmbeddingModel, path):
    rows = np.ascontiguousarray(model.rows, dtype="<f4")
    weights = np.ascontiguousarray(model.nce_weights, dtype="<f4")
    biases = np.ascontiguousarray(model.nce_biases, dtype="<f4")
    header = MAGIC + struct.pack("<II", rows.shape[0], rows.shape[1])
    Path(path).write_bytes(header + rows.tobytes() + weights.tobytes()
                           + biases.tobytes())
    return Path(path)


def load_embeddings(path) -> EmbeddingModel:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a P2VEMB1 file", offset=0)
    offset = len(MAGIC)
    if len(data) < offset + 8:
        raise TruncatedError(f"{path}: embedding header truncated",
                             offset=len(data))
    n_rows, n_cols = struct.unpack_from("<II", data, offset)
    offset += 8
    expected = 4 * (2 * n_rows * n_cols + n_rows)
    if len(data) != offset + expected:
        raise TruncatedError(
            f"{path}: expected {expected} matrix bytes, found "
            f"{len(data) - offset}", offset=offset)
    matrix_bytes = 4 * n_rows * n_cols
    rows = np.frombuffer(data, dtype="<f4", count=n_rows * n_cols,
                         offset=offset).reshape(n_rows, n_cols)
    weights = np.frombuffer(data, dtype="<f4", count=n_rows * n_cols,
                            offset=offset + matrix_bytes).reshape(n_rows, n_cols)
    biases = np.frombuffer(data, dtype="<f4", count=n_rows,
                           offset=offset + 2 * matrix_bytes)
    return EmbeddingModel(rows=rows.astype(np.float32),
                          nce_weights=weights.astype(np.float32),
                          nce_biases=biases.astype(np.float32))
