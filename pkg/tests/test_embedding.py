import math

import numpy as np
import pytest

from pktembed.embedding import (EmbeddingConfig, EmbeddingModel,
                                apply_gradients, generate_batch, init_model,
                                load_embeddings, nce_loss_and_grad,
                                sample_noise, save_embeddings, train_embeddings,
                                train_on_stream)
from pktembed.errors import (ConsistencyError, DegenerateStreamError,
                             DivergenceError, FormatError)
from pktembed.translate import TokenizedCapture, save_tokens
from pktembed.vocab import build_vocabulary


def small_config(**kw):
    defaults = dict(batch_size=8, skip_window=1, num_skips=2,
                    embedding_size=16, num_negative=5, num_steps=20, seed=3)
    defaults.update(kw)
    return EmbeddingConfig(**defaults)


def random_f64_model(vocab_size, d, rng):
    rows = rng.normal(size=(vocab_size + 1, d))
    rows[0] = 0.0
    return EmbeddingModel(rows=rows,
                          nce_weights=rng.normal(size=(vocab_size + 1, d)),
                          nce_biases=rng.normal(size=vocab_size + 1))


def test_config_invariants():
    with pytest.raises(ValueError):
        EmbeddingConfig(skip_window=1, num_skips=3)
    with pytest.raises(ValueError):
        EmbeddingConfig(batch_size=9, num_skips=2)


def test_batch_single_window():
    cfg = small_config(batch_size=2)
    stream = np.array([1, 2, 3], dtype=np.uint32)
    targets, contexts, cursor = generate_batch(stream, None, cfg,
                                               np.random.default_rng(0))
    assert sorted(zip(targets.tolist(), contexts.tolist())) == [(2, 1), (2, 3)]
    assert cursor == 1


def test_batch_window_property():
    # stream[i] = i + 1 so values encode positions.
    stream = np.arange(1, 200, dtype=np.uint32)
    rng = np.random.default_rng(1)
    for sw, ns in ((1, 2), (2, 2), (3, 4)):
        cfg = small_config(batch_size=8 * ns, skip_window=sw, num_skips=ns)
        cursor = None
        for _ in range(30):
            targets, contexts, cursor = generate_batch(stream, cursor, cfg, rng)
            dist = np.abs(targets.astype(int) - contexts.astype(int))
            assert (dist >= 1).all() and (dist <= sw).all()
            # contexts within a window are distinct
            for w in range(len(targets) // ns):
                group = contexts[w * ns:(w + 1) * ns].tolist()
                assert len(set(group)) == ns


def test_batch_skips_oov_targets():
    stream = np.array([5, 0, 7, 0, 9, 0, 11, 3], dtype=np.uint32)
    cfg = small_config(batch_size=4)
    rng = np.random.default_rng(2)
    for _ in range(10):
        targets, _, _ = generate_batch(stream, None, cfg, rng)
        assert (targets != 0).all()


def test_batch_cursor_wraps():
    stream = np.array([1, 2, 3, 4], dtype=np.uint32)  # centers 1 and 2
    cfg = small_config(batch_size=2)
    rng = np.random.default_rng(3)
    cursors = []
    cursor = None
    for _ in range(4):
        _, _, cursor = generate_batch(stream, cursor, cfg, rng)
        cursors.append(cursor)
    assert cursors == [2, 1, 2, 1]


def test_batch_stream_too_short():
    with pytest.raises(DegenerateStreamError):
        generate_batch(np.array([1, 2], dtype=np.uint32), None,
                       small_config(), np.random.default_rng(0))


def test_batch_all_oov():
    with pytest.raises(DegenerateStreamError):
        generate_batch(np.zeros(50, dtype=np.uint32), None, small_config(),
                       np.random.default_rng(0))


def test_batch_empirical_distribution_matches_enumeration():
    # With num_skips < 2*skip_window the contexts are sampled; over many
    # batches every (center, offset) cell must be hit uniformly, matching
    # exhaustive window enumeration.
    stream = np.arange(1, 25, dtype=np.uint32)  # values = positions + 1
    sw, ns = 2, 2
    cfg = EmbeddingConfig(batch_size=128, skip_window=sw, num_skips=ns,
                          embedding_size=4, num_negative=1, num_steps=1)
    rng = np.random.default_rng(4)
    counts = {}
    cursor = None
    n_batches = 2000
    for _ in range(n_batches):
        targets, contexts, cursor = generate_batch(stream, cursor, cfg, rng)
        for t, c in zip(targets.tolist(), contexts.tolist()):
            counts[(t, c)] = counts.get((t, c), 0) + 1
    n_centers = len(stream) - 2 * sw
    # Exhaustive enumeration: each center appears equally often; each of
    # its 2*sw offsets is equally likely.
    expected = n_batches * cfg.batch_size / (n_centers * 2 * sw)
    for (t, c), observed in counts.items():
        assert abs(t - c) <= sw
        assert abs(observed - expected) / expected < 0.05
    assert len(counts) == n_centers * 2 * sw


def test_zero_init_loss_is_log2():
    cfg = small_config()
    vocab = 50
    model = EmbeddingModel(rows=np.zeros((vocab + 1, 16)),
                           nce_weights=np.zeros((vocab + 1, 16)),
                           nce_biases=np.zeros(vocab + 1))
    targets = np.array([1, 2, 3, 4])
    contexts = np.array([2, 3, 4, 5])
    noise = np.array([7, 8, 9, 10, 11])
    loss, _ = nce_loss_and_grad(model, targets, contexts, noise)
    assert abs(loss - (1 + 5) * math.log(2)) < 1e-12


def test_hand_computed_single_pair():
    model = EmbeddingModel(
        rows=np.array([[0.0, 0.0], [0.5, -0.25], [0.0, 0.0]]),
        nce_weights=np.array([[0.0, 0.0], [0.2, 0.4], [-0.3, 0.6]]),
        nce_biases=np.array([0.0, 0.1, -0.2]))
    # s_true = 0.5*0.2 - 0.25*0.4 + 0.1 = 0.1
    # s_noise = 0.5*(-0.3) - 0.25*0.6 - 0.2 = -0.5
    # loss = -log sigmoid(0.1) - log sigmoid(-(-0.5))
    expected = -(math.log(1 / (1 + math.exp(-0.1)))
                 + math.log(1 / (1 + math.exp(-0.5))))
    loss, _ = nce_loss_and_grad(model, np.array([1]), np.array([1]),
                                np.array([2]))
    assert abs(loss - expected) < 1e-12


def finite_difference_check(model, targets, contexts, noise, rng, n_coords=10,
                            tol=1e-5):
    loss0, grads = nce_loss_and_grad(model, targets, contexts, noise)
    assert np.isfinite(loss0)
    arrays = {"rows": (model.rows, grads.row_ids, grads.row_grads),
              "weights": (model.nce_weights, grads.out_ids, grads.weight_grads),
              "biases": (model.nce_biases, grads.out_ids, grads.bias_grads)}
    h = 1e-4
    for _ in range(n_coords):
        name = ("rows", "weights", "biases")[rng.integers(0, 3)]
        arr, ids, grad = arrays[name]
        k = rng.integers(0, len(ids))
        row = ids[k]
        if arr.ndim == 2:
            col = rng.integers(0, arr.shape[1])
            analytic = grad[k, col]
            index = (row, col)
        else:
            analytic = grad[k]
            index = (row,)
        orig = arr[index]
        arr[index] = orig + h
        up, _ = nce_loss_and_grad(model, targets, contexts, noise)
        arr[index] = orig - h
        down, _ = nce_loss_and_grad(model, targets, contexts, noise)
        arr[index] = orig
        fd = (up - down) / (2 * h)
        rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)
        assert rel < tol, f"{name}{index}: analytic {analytic} vs fd {fd}"


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(3):
        vocab = int(rng.integers(10, 40))
        d = int(rng.integers(3, 12))
        model = random_f64_model(vocab, d, rng)
        batch = int(rng.integers(2, 10)) * 2
        targets = rng.integers(1, vocab + 1, batch)
        contexts = rng.integers(0, vocab + 1, batch)
        noise = rng.integers(1, vocab + 1, int(rng.integers(1, 8)))
        finite_difference_check(model, targets, contexts, noise, rng)


def test_gradient_locality_and_row0_invariance():
    rng = np.random.default_rng(6)
    cfg = small_config()
    model = init_model(30, cfg, rng)
    before_rows = model.rows.copy()
    before_w = model.nce_weights.copy()
    before_b = model.nce_biases.copy()
    targets = np.array([3, 3, 5, 7])
    contexts = np.array([4, 0, 6, 8])   # includes an OOV context
    noise = np.array([9, 10])
    loss, grads = nce_loss_and_grad(model, targets, contexts, noise)
    apply_gradients(model, grads, 0.5)
    touched_rows = set(targets.tolist())
    touched_out = set(contexts.tolist()) | set(noise.tolist())
    for i in range(31):
        if i not in touched_rows:
            np.testing.assert_array_equal(model.rows[i], before_rows[i])
        if i not in touched_out:
            np.testing.assert_array_equal(model.nce_weights[i], before_w[i])
            assert model.nce_biases[i] == before_b[i]
    assert (model.rows[0] == 0).all()   # 0 never appears as a target


def test_noise_sampler_matches_log_uniform_cdf():
    rng = np.random.default_rng(7)
    vocab = 1000
    ids = sample_noise(vocab, 50_000, rng)
    assert ids.min() >= 1 and ids.max() <= vocab
    # P(id <= k) = ln(k+1) / ln(V+1) for the log-uniform distribution
    for k in (1, 10, 100, 500):
        expected = math.log(k + 1) / math.log(vocab + 1)
        assert abs((ids <= k).mean() - expected) < 0.01


def test_training_determinism_bit_identical():
    rng_stream = np.random.default_rng(8)
    stream = rng_stream.integers(1, 30, 500).astype(np.uint32)
    cfg = small_config(num_steps=50)
    results = []
    for _ in range(2):
        model = init_model(30, cfg, np.random.default_rng(cfg.seed))
        train_on_stream(model, stream, cfg, np.random.default_rng(cfg.seed))
        results.append((model.rows.tobytes(), model.nce_weights.tobytes(),
                        model.nce_biases.tobytes()))
    assert results[0] == results[1]


def test_cooccurrence_geometry():
    # A (=1) always neighbours B (=2) in alternating runs and is never
    # within a window of C (=3); with a window of 2, A and B see identical
    # context distributions, so their embeddings converge.
    rng = np.random.default_rng(0)
    parts = []
    for _ in range(60):
        parts += [1, 2] * 30
        parts += list(rng.integers(5, 31, 6))
        parts += [3, 4] * 30
        parts += list(rng.integers(5, 31, 6))
    stream = np.array(parts, dtype=np.uint32)
    cfg = EmbeddingConfig(batch_size=16, skip_window=2, num_skips=4,
                          embedding_size=4, num_negative=5, num_steps=4000,
                          learning_rate=0.5, seed=9)
    r = np.random.default_rng(9)
    model = init_model(30, cfg, r)
    train_on_stream(model, stream, cfg, r)

    def cosine(a, b):
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    rows = model.rows.astype(np.float64)
    assert cosine(rows[1], rows[2]) > cosine(rows[1], rows[3])


def test_loss_decreases_on_structured_stream():
    rng = np.random.default_rng(10)
    stream = np.tile(np.arange(1, 21), 100).astype(np.uint32)
    cfg = small_config(batch_size=16, num_steps=2500, embedding_size=8,
                       num_negative=4)
    model = init_model(20, cfg, rng)
    losses = train_on_stream(model, stream, cfg, rng)
    assert losses[-1000:].mean() < losses[:1000].mean()
    assert (model.rows[0] == 0).all()   # OOV row untouched by training


def test_divergence_reports_step():
    model = random_f64_model(10, 4, np.random.default_rng(11))
    model.rows *= 1e200
    model.nce_weights *= 1e200
    cfg = small_config(batch_size=4, num_steps=5)
    stream = np.arange(1, 11, dtype=np.uint32)
    with np.errstate(over="ignore", invalid="ignore"), \
            pytest.raises(DivergenceError) as exc:
        train_on_stream(model, stream, cfg, np.random.default_rng(0))
    assert exc.value.step == 0


def _write_flat(tmp_path, name, ids, vocabulary):
    tokens = TokenizedCapture(flat=np.asarray(ids, dtype=np.uint32),
                              per_packet=[np.asarray(ids, dtype=np.uint32)],
                              source=name, n=vocabulary.n)
    flat = tmp_path / f"{name}.flat"
    save_tokens(tokens, flat, tmp_path / f"{name}.pkt")
    return flat


def test_train_embeddings_warm_start_and_errors(tmp_path):
    vocabulary = build_vocabulary({bytes([i, 0]): 40 - i for i in range(1, 21)},
                                  20)
    rng = np.random.default_rng(12)
    f1 = _write_flat(tmp_path, "a", rng.integers(1, 21, 300), vocabulary)
    f2 = _write_flat(tmp_path, "b", rng.integers(1, 21, 300), vocabulary)
    cfg = small_config(num_steps=30)

    one = train_embeddings([f1], vocabulary, cfg)
    both = train_embeddings([f1, f2], vocabulary, cfg)
    # second file continues from the first file's matrix
    assert one.rows.tobytes() != both.rows.tobytes()

    resumed = train_embeddings([f2], vocabulary, cfg,
                               initial=EmbeddingModel(
                                   rows=one.rows.copy(),
                                   nce_weights=one.nce_weights.copy(),
                                   nce_biases=one.nce_biases.copy()))
    assert resumed.rows.shape == both.rows.shape

    with pytest.raises(FileNotFoundError, match="missing.flat"):
        train_embeddings([tmp_path / "missing.flat"], vocabulary, cfg)

    dead = _write_flat(tmp_path, "dead", np.zeros(100, dtype=np.uint32),
                       vocabulary)
    with pytest.raises(DegenerateStreamError, match="dead"):
        train_embeddings([f1, dead], vocabulary, cfg)


def test_train_embeddings_checks_n(tmp_path):
    v2 = build_vocabulary({b"ab": 1}, 4)
    v3 = build_vocabulary({b"abc": 1}, 4)
    flat = _write_flat(tmp_path, "n3", [1, 1, 1, 1], v3)
    with pytest.raises(ConsistencyError):
        train_embeddings([flat], v2, small_config(num_steps=1))


def test_save_load_roundtrip_bit_exact(tmp_path):
    cfg = small_config()
    model = init_model(40, cfg, np.random.default_rng(13))
    save_embeddings(model, tmp_path / "e.bin")
    loaded = load_embeddings(tmp_path / "e.bin")
    assert loaded.rows.tobytes() == model.rows.tobytes()
    assert loaded.nce_weights.tobytes() == model.nce_weights.tobytes()
    assert loaded.nce_biases.tobytes() == model.nce_biases.tobytes()
    # zero matrix round-trips too
    zero = EmbeddingModel(rows=np.zeros((3, 2), dtype=np.float32),
                          nce_weights=np.zeros((3, 2), dtype=np.float32),
                          nce_biases=np.zeros(3, dtype=np.float32))
    save_embeddings(zero, tmp_path / "z.bin")
    assert load_embeddings(tmp_path / "z.bin").rows.tobytes() == \
        zero.rows.tobytes()


def test_load_embeddings_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"WRONGMAG" + b"\x00" * 16)
    with pytest.raises(FormatError):
        load_embeddings(bad)
    model = init_model(5, small_config(), np.random.default_rng(0))
    path = save_embeddings(model, tmp_path / "ok.bin")
    data = path.read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(data[:-5])
    with pytest.raises(FormatError):
        load_embeddings(cut)
