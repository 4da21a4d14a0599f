"""End-to-end orchestration: training phases, the six-step inference path,
and the throughput/speedup benchmark.

Training runs five phases (dictionary, translation, embeddings, features
plus labels, classifier), persisting every intermediate so any phase can
restart from the artifacts of its predecessors. Only one capture's raw
data is resident at a time. Inference runs read -> ngram -> translate ->
featurize -> predict with per-step wall times; every step after the serial
read is chunked over packets and is bit-identical for any worker count.
"""

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import parallel
from .config import PipelineConfig
from .classify import (StreamingGaussianNB, WarmStartForestClassifier,
                       load_model, save_model)
from .embedding import load_embeddings, save_embeddings, train_embeddings
from .errors import ConsistencyError, PipelineError
from .featurize import (_featurize_chunk, featurize_capture, load_features,
                        save_features)
from .groundtruth import label_capture, load_attack_records, load_labels, save_labels
from .ngrams import ngram_codes
from .pcap import read_capture
from .translate import load_packets, save_tokens, translate_capture
from .vocab import build_vocabulary, count_ngrams, load_vocabulary, save_vocabulary


def split_captures(paths, which: str) -> list:
    """Deterministic even/odd/all selection over name-sorted capture
    paths (even = train, odd = test)."""
    ordered = sorted(Path(p) for p in paths)
    if which == "all":
        return ordered
    if which == "even":
        return ordered[0::2]
    if which == "odd":
        return ordered[1::2]
    raise ValueError(f"split must be even, odd or all, got {which!r}")


@dataclass
class ThroughputReport:
    files: int
    bytes: int
    workers: int
    read_s: float = 0.0
    ngram_s: float = 0.0
    translate_s: float = 0.0
    featurize_s: float = 0.0
    boundary_s: float = 0.0   # no cross-language boundary here; always 0
    predict_s: float = 0.0
    predict_rows: int = 0

    @property
    def parallel_s(self) -> float:
        return self.ngram_s + self.translate_s + self.featurize_s + self.predict_s

    @property
    def serial_s(self) -> float:
        return self.read_s + self.boundary_s

    @property
    def total_s(self) -> float:
        return self.parallel_s + self.serial_s

    @property
    def rate_mb_s(self) -> float:
        return self.bytes / self.total_s / 1e6 if self.total_s > 0 else 0.0

    def machine_line(self) -> str:
        return (f"files={self.files} bytes={self.bytes} workers={self.workers} "
                f"read_s={self.read_s:.6f} ngram_s={self.ngram_s:.6f} "
                f"translate_s={self.translate_s:.6f} "
                f"featurize_s={self.featurize_s:.6f} "
                f"boundary_s={self.boundary_s:.6f} "
                f"predict_s={self.predict_s:.6f} "
                f"predict_rows={self.predict_rows} "
                f"parallel_s={self.parallel_s:.6f} serial_s={self.serial_s:.6f} "
                f"rate_mb_s={self.rate_mb_s:.3f}")

    def merged_with(self, other: "ThroughputReport") -> "ThroughputReport":
        return ThroughputReport(
            files=self.files + other.files, bytes=self.bytes + other.bytes,
            workers=self.workers, read_s=self.read_s + other.read_s,
            ngram_s=self.ngram_s + other.ngram_s,
            translate_s=self.translate_s + other.translate_s,
            featurize_s=self.featurize_s + other.featurize_s,
            boundary_s=self.boundary_s + other.boundary_s,
            predict_s=self.predict_s + other.predict_s,
            predict_rows=self.predict_rows + other.predict_rows)


def theoretical_speedup(parallel_time: float, serial_time: float,
                        threads) -> float:
    """Amdahl projection from a measured parallel/serial split."""
    if parallel_time < 0 or serial_time < 0:
        raise ValueError("times must be nonnegative")
    if parallel_time + serial_time == 0:
        raise ValueError("both times are zero; speedup undefined")
    if threads != math.inf and threads < 1:
        raise ValueError("threads must be >= 1")
    total = parallel_time + serial_time
    scaled = serial_time if threads == math.inf else (
        parallel_time / threads + serial_time)
    if scaled == 0:
        return math.inf
    return total / scaled


# Training phases ----------------------------------------------------------

def _phase(name, path, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except Exception as err:
        raise PipelineError(f"phase {name!r} failed on {path}: {err}") from err


def phase_vocabulary(cfg: PipelineConfig, capture_paths) -> Path:
    """Phase 1: count n-grams across captures and persist the dictionary."""
    def captures():
        for path in capture_paths:
            yield _phase("vocabulary", path, read_capture, path)

    counts = count_ngrams(captures(), cfg.n, workers=cfg.workers)
    vocabulary = build_vocabulary(counts, cfg.vocab_size, n=cfg.n)
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    save_vocabulary(vocabulary, cfg.vocab_path)
    return cfg.vocab_path


def _translate_one(cfg, vocabulary, path):
    # Per-file helper: the capture dies with this frame, so at most one
    # file's raw data is resident across the phase loop.
    capture = _phase("translate", path, read_capture, path)
    tokens = _phase("translate", path, translate_capture, capture,
                    vocabulary, workers=cfg.workers)
    save_tokens(tokens, cfg.flat_path(path), cfg.packets_path(path))


def phase_translate(cfg: PipelineConfig, capture_paths) -> list:
    """Phase 2: token files (flat + per-packet) for every capture."""
    vocabulary = load_vocabulary(cfg.vocab_path)
    cfg.tokens_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for path in capture_paths:
        _translate_one(cfg, vocabulary, path)
        out.append((cfg.flat_path(path), cfg.packets_path(path)))
    return out


def phase_embeddings(cfg: PipelineConfig, capture_paths) -> Path:
    """Phase 3: train embeddings over the flat token files in order."""
    vocabulary = load_vocabulary(cfg.vocab_path)
    flat_paths = [cfg.flat_path(p) for p in capture_paths]
    model = _phase("embeddings", cfg.tokens_dir, train_embeddings,
                   flat_paths, vocabulary, cfg.embedding_config())
    save_embeddings(model, cfg.embeddings_path)
    return cfg.embeddings_path


def phase_features(cfg: PipelineConfig, capture_paths) -> list:
    """Phase 4: feature matrices from per-packet tokens and embeddings."""
    model = load_embeddings(cfg.embeddings_path)
    cfg.features_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for path in capture_paths:
        per_packet = _phase("features", path, load_packets,
                            cfg.packets_path(path))
        features = _phase("features", path, featurize_capture, per_packet,
                          model, workers=cfg.workers, source=str(path))
        save_features(features, cfg.features_path(path))
        out.append(cfg.features_path(path))
    return out


def _label_one(cfg, records, path):
    capture = _phase("labels", path, read_capture, path)
    labels = _phase("labels", path, label_capture, capture, records)
    save_labels(labels, cfg.labels_path(path))


def phase_labels(cfg: PipelineConfig, capture_paths, attack_csv) -> list:
    """Label every capture against the attack records."""
    records = load_attack_records(attack_csv)
    cfg.labels_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for path in capture_paths:
        _label_one(cfg, records, path)
        out.append(cfg.labels_path(path))
    return out


def phase_classifier(cfg: PipelineConfig, capture_paths) -> Path:
    """Phase 5: warm-start fit over the per-capture feature/label files."""
    model = cfg.make_classifier()
    for path in capture_paths:
        features = _phase("classifier", path, load_features,
                          cfg.features_path(path))
        labels = _phase("classifier", path, load_labels, cfg.labels_path(path))
        _phase("classifier", path, model.fit_file, features.data,
               labels.labels)
    if isinstance(model, WarmStartForestClassifier) and not model.trees_:
        raise PipelineError(
            "phase 'classifier' failed: no training file contained a "
            "positive example; the forest is empty")
    if isinstance(model, StreamingGaussianNB) and (model.class_count_ == 0).any():
        raise PipelineError(
            "phase 'classifier' failed: a class is absent from the "
            "training corpus")
    save_model(model, cfg.model_path)
    return cfg.model_path


def run_training(cfg: PipelineConfig, capture_paths, attack_csv) -> dict:
    """Run phases 1-5 in order; returns the persisted artifact paths."""
    capture_paths = [Path(p) for p in capture_paths]
    artifacts = {"vocabulary": phase_vocabulary(cfg, capture_paths)}
    artifacts["tokens"] = phase_translate(cfg, capture_paths)
    artifacts["embeddings"] = phase_embeddings(cfg, capture_paths)
    artifacts["features"] = phase_features(cfg, capture_paths)
    artifacts["labels"] = phase_labels(cfg, capture_paths, attack_csv)
    artifacts["model"] = phase_classifier(cfg, capture_paths)
    return artifacts


# Inference ----------------------------------------------------------------

def _ngram_chunk(ctx, bounds):
    start, stop = bounds
    n = ctx["n"]
    codes = [ngram_codes(c, n) for c in ctx["contents"][start:stop]]
    lengths = np.fromiter((c.size for c in codes), dtype=np.int64,
                          count=len(codes))
    flat = (np.concatenate(codes) if codes
            else np.empty(0, dtype=np.int64))
    return flat, lengths


def _translate_ids_chunk(ctx, codes):
    return ctx["vocabulary"].lookup_codes(codes)


def _predict_chunk(ctx, rows):
    return ctx["model"].predict_proba(rows)[:, 1]


def check_artifact_consistency(vocabulary, embeddings, model):
    """Cross-check (n, |V|, d) across loaded artifacts before any work."""
    if embeddings.vocab_size != vocabulary.vocab_size:
        raise ConsistencyError(
            f"embeddings cover {embeddings.vocab_size} ids, vocabulary "
            f"expects {vocabulary.vocab_size}")
    d = embeddings.embedding_size
    if model.n_features_in_ is not None and model.n_features_in_ != d:
        raise ConsistencyError(
            f"model expects {model.n_features_in_} features, embeddings "
            f"provide {d}")


def run_inference(vocabulary, embeddings, model, capture_path,
                  workers: int = 1):
    """Score one capture; returns (scores, ThroughputReport).

    Scores are identical for any worker count.
    """
    check_artifact_consistency(vocabulary, embeddings, model)

    t0 = time.perf_counter()
    capture = read_capture(capture_path)
    t_read = time.perf_counter() - t0
    report = ThroughputReport(files=1, bytes=capture.byte_size,
                              workers=workers, read_s=t_read)
    n_packets = len(capture.packets)
    if n_packets == 0:
        return np.empty(0), report

    contents = [p.content for p in capture.packets]
    bounds = parallel.chunk_ranges(n_packets, workers * 2)

    t0 = time.perf_counter()
    parts = parallel.map_chunks(
        _ngram_chunk, bounds, {"contents": contents, "n": vocabulary.n},
        workers)
    codes = [p[0] for p in parts]
    lengths = np.concatenate([p[1] for p in parts])
    report.ngram_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    id_parts = parallel.map_chunks(
        _translate_ids_chunk, codes, {"vocabulary": vocabulary}, workers)
    flat_ids = np.concatenate(id_parts)
    report.translate_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    offsets = np.zeros(n_packets + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    per_packet = [flat_ids[offsets[i]:offsets[i + 1]]
                  for i in range(n_packets)]
    pkt_bounds = parallel.chunk_ranges(n_packets, workers * 2)
    feat_parts = parallel.map_chunks(
        _featurize_chunk, pkt_bounds,
        {"rows": embeddings.rows, "per_packet": per_packet}, workers)
    features = np.concatenate(feat_parts, axis=0)
    report.featurize_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    row_bounds = parallel.chunk_ranges(features.shape[0], workers * 2)
    score_parts = parallel.map_chunks(
        _predict_chunk, [features[a:b] for a, b in row_bounds],
        {"model": model}, workers)
    scores = np.concatenate(score_parts)
    report.predict_s = time.perf_counter() - t0
    report.predict_rows = int(features.shape[0])

    return scores, report


def load_inference_artifacts(cfg: PipelineConfig):
    vocabulary = load_vocabulary(cfg.vocab_path)
    embeddings = load_embeddings(cfg.embeddings_path)
    model = load_model(cfg.model_path)
    return vocabulary, embeddings, model


# Benchmark ----------------------------------------------------------------

@dataclass
class BenchResult:
    thread_counts: list
    reports: list                      # one merged report per thread count
    relative_speedup: dict = field(default_factory=dict)
    parallel_speedup: dict = field(default_factory=dict)
    projected_speedup: dict = field(default_factory=dict)
    projected_limit: float = 0.0

    def table(self) -> str:
        lines = ["threads  total_s  parallel_s  serial_s  rate_MB/s  "
                 "speedup  parallel_speedup"]
        for t, rep in zip(self.thread_counts, self.reports):
            lines.append(
                f"{t:>7}  {rep.total_s:>7.3f}  {rep.parallel_s:>10.3f}  "
                f"{rep.serial_s:>8.3f}  {rep.rate_mb_s:>9.3f}  "
                f"{self.relative_speedup[t]:>7.2f}  "
                f"{self.parallel_speedup[t]:>16.2f}")
        lines.append(f"amdahl_limit={self.projected_limit:.2f} (from the "
                     "1-thread parallel/serial split)")
        return "\n".join(lines)


def bench(vocabulary, embeddings, model, capture_paths,
          thread_counts) -> BenchResult:
    """Run inference over the captures at each thread count and report
    per-phase times, observed rates, and measured vs projected speedups."""
    capture_paths = list(capture_paths)
    if not capture_paths:
        raise ValueError("bench needs at least one capture")
    thread_counts = list(thread_counts)
    if 1 not in thread_counts:
        thread_counts = [1] + thread_counts
    reports = []
    for workers in thread_counts:
        merged = None
        for path in capture_paths:
            _, rep = run_inference(vocabulary, embeddings, model, path,
                                   workers=workers)
            merged = rep if merged is None else merged.merged_with(rep)
        reports.append(merged)

    base = reports[thread_counts.index(1)]
    result = BenchResult(thread_counts=thread_counts, reports=reports)
    for t, rep in zip(thread_counts, reports):
        result.relative_speedup[t] = (base.total_s / rep.total_s
                                      if rep.total_s > 0 else 0.0)
        result.parallel_speedup[t] = (base.parallel_s / rep.parallel_s
                                      if rep.parallel_s > 0 else 0.0)
        result.projected_speedup[t] = theoretical_speedup(
            base.parallel_s, base.serial_s, t)
    result.projected_limit = theoretical_speedup(base.parallel_s,
                                                 base.serial_s, math.inf)
    return result
