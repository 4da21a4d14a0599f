"""Estimator facade: captures in, packet feature matrix out.

CaptureVectorizer composes the dictionary, embedding and averaging stages
behind the scikit-learn transformer API, so the whole representation
pipeline drops into sklearn Pipelines and cross-validation next to any
classifier (including the native ones in classify.py).
"""

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .embedding import init_model, train_on_stream
from .featurize import featurize_capture
from .pcap import CaptureFile, read_capture
from .translate import translate_capture
from .vocab import build_vocabulary, count_ngrams


class CaptureVectorizer(BaseEstimator, TransformerMixin):
    """Learn n-gram embeddings from captures and emit per-packet features.

    fit() builds the frequency-ranked vocabulary over all captures, then
    trains skip-gram embeddings over each capture's token stream in order
    (warm-starting across captures). transform() averages the learned
    embeddings over each packet's tokens; rows follow capture order, then
    packet order.
    """

    def __init__(self, n=2, vocab_size=65536, batch_size=128, skip_window=1,
                 num_skips=2, embedding_size=128, num_negative=64,
                 num_steps=100_000, learning_rate=1.0, random_state=0,
                 workers=1):
        self.n = n
        self.vocab_size = vocab_size
        self.batch_size = batch_size
        self.skip_window = skip_window
        self.num_skips = num_skips
        self.embedding_size = embedding_size
        self.num_negative = num_negative
        self.num_steps = num_steps
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.workers = workers

    def _embedding_config(self):
        from .embedding import EmbeddingConfig
        return EmbeddingConfig(
            batch_size=self.batch_size, skip_window=self.skip_window,
            num_skips=self.num_skips, embedding_size=self.embedding_size,
            num_negative=self.num_negative, num_steps=self.num_steps,
            learning_rate=self.learning_rate, seed=self.random_state)

    @staticmethod
    def _captures(X) -> list:
        out = []
        for item in X:
            if isinstance(item, CaptureFile):
                out.append(item)
            else:
                out.append(read_capture(Path(item)))
        return out

    def fit(self, X, y=None):
        """X is an iterable of CaptureFile objects or pcap paths."""
        captures = self._captures(X)
        config = self._embedding_config()
        counts = count_ngrams(captures, self.n, workers=self.workers)
        self.vocabulary_ = build_vocabulary(counts, self.vocab_size, n=self.n)
        rng = np.random.default_rng(config.seed)
        self.embedding_model_ = init_model(self.vocabulary_.vocab_size,
                                           config, rng)
        for capture in captures:
            tokens = translate_capture(capture, self.vocabulary_,
                                       workers=self.workers)
            train_on_stream(self.embedding_model_, tokens.flat, config, rng,
                            label=capture.path)
        return self

    def transform(self, X) -> np.ndarray:
        """Per-packet feature rows (float32) for the given captures."""
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("CaptureVectorizer is not fitted")
        blocks = []
        for capture in self._captures(X):
            tokens = translate_capture(capture, self.vocabulary_,
                                       workers=self.workers)
            features = featurize_capture(tokens, self.embedding_model_,
                                         workers=self.workers)
            blocks.append(features.data)
        if not blocks:
            return np.zeros((0, self.embedding_size), dtype=np.float32)
        return np.concatenate(blocks, axis=0)
