"""pktembed: byte n-gram embeddings and classifiers for packet captures.

The pipeline turns raw pcap files into per-packet feature vectors (byte
n-grams -> frequency-ranked ids -> skip-gram embeddings -> mean pooling)
and trains warm-start classifiers for benign/malicious packet
classification, with persistence for every intermediate artifact and a
parallel inference path.
"""

__version__ = "0.1.0"

from .classify import (StreamingGaussianNB, WarmStartForestClassifier,
                       load_model, save_model)
from .embedding import (EmbeddingConfig, EmbeddingModel, load_embeddings,
                        save_embeddings, train_embeddings)
from .errors import (ConsistencyError, DegenerateStreamError, DivergenceError,
                     FormatError, PipelineError, PktembedError, TruncatedError)
from .evaluate import (EvaluationCurves, evaluate_scores, f1_score,
                       operating_points, pr_curve, roc_curve)
from .featurize import (FeatureMatrix, featurize_capture, featurize_packet,
                        load_features, save_features)
from .groundtruth import (AttackRecord, LabelVector, label_capture,
                          load_attack_records, load_labels, save_labels)
from .ngrams import ngrams
from .pcap import (CaptureFile, PacketRecord, Protocol, extract_content,
                   read_capture, write_capture)
from .pipeline import (ThroughputReport, bench, run_inference, run_training,
                       split_captures, theoretical_speedup)
from .config import PipelineConfig, load_config
from .synth import generate_synthetic_corpus
from .translate import (TokenizedCapture, load_flat, load_packets,
                        save_tokens, translate_capture)
from .vectorizer import CaptureVectorizer
from .vocab import (Vocabulary, build_vocabulary, count_ngrams,
                    load_vocabulary, save_vocabulary)

__all__ = [
    "AttackRecord", "CaptureFile", "CaptureVectorizer", "ConsistencyError",
    "DegenerateStreamError", "DivergenceError", "EmbeddingConfig",
    "EmbeddingModel", "EvaluationCurves", "FeatureMatrix", "FormatError",
    "LabelVector", "PacketRecord", "PipelineConfig", "PipelineError",
    "PktembedError", "Protocol", "StreamingGaussianNB", "ThroughputReport",
    "TokenizedCapture", "TruncatedError", "Vocabulary",
    "WarmStartForestClassifier", "bench", "build_vocabulary", "count_ngrams",
    "evaluate_scores", "extract_content", "f1_score", "featurize_capture",
    "featurize_packet", "generate_synthetic_corpus", "label_capture",
    "load_attack_records", "load_config", "load_embeddings", "load_features",
    "load_flat", "load_labels", "load_model", "load_packets",
    "load_vocabulary", "ngrams", "operating_points", "pr_curve",
    "read_capture", "roc_curve", "run_inference", "run_training",
    "save_embeddings", "save_features", "save_labels", "save_model",
    "save_tokens", "save_vocabulary", "split_captures", "theoretical_speedup",
    "train_embeddings", "translate_capture", "write_capture",
]
