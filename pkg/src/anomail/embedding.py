"""Distributed bag-of-words paragraph vectors with negative sampling.

Training is a plain SGD loop: per epoch, per document, per in-vocabulary
token, the document vector is pushed toward the token's output vector and
away from noise tokens drawn from the unigram^(3/4) distribution. The
loop is JIT-compiled (numba) and single-threaded, so a fixed seed gives
bit-identical vectors.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptyVocabulary, InvalidParams, LengthMismatch, ZeroVector
from .featurize import TokenDocument

_MIN_ALPHA = 1e-4  # linear decay floor for the learning rate

# xorshift64* constants; arithmetic stays in uint64 so the stream is
# identical on every platform.
_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)
_MULT = np.uint64(0x2545F4914F6CDD1D)
_NONZERO = np.uint64(0x106689D45497FDB5)
_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2^-53


@dataclass
class EmbeddingParams:
    vector_size: int = 40
    min_count: int = 2
    epochs: int = 40
    negative_samples: int = 5
    initial_learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.vector_size < 1 or self.epochs < 1 or self.min_count < 1:
            raise InvalidParams("vector_size, epochs and min_count must be >= 1")
        if self.negative_samples < 1:
            raise InvalidParams("negative_samples must be >= 1")
        if not self.initial_learning_rate > 0:
            raise InvalidParams("initial_learning_rate must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParams("seed must fit in 64 unsigned bits")


@dataclass
class DocVector:
    event_id: str
    values: np.ndarray


class Vocabulary:
    """Tokens that reached min_count, indexed by descending corpus count
    (lexicographic tiebreak)."""

    def __init__(self, tokens: list[str], counts: np.ndarray):
        self.tokens = tokens
        self.counts = counts
        self._index = {token: i for i, token in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        return self._index[token]

    def count(self, token: str) -> int:
        return int(self.counts[self._index[token]])


def build_vocab(docs: list[TokenDocument], min_count: int) -> Vocabulary:
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(doc.tokens)
    kept = sorted(
        ((token, n) for token, n in counts.items() if n >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    if not kept:
        raise EmptyVocabulary(f"no token reached min_count={min_count}")
    return Vocabulary([t for t, _ in kept], np.array([n for _, n in kept], dtype=np.int64))


@njit(cache=True)
def _mix_seed(seed):
    z = seed + _MIX1
    z = (z ^ (z >> _S30)) * _MIX2
    z = (z ^ (z >> _S27)) * _MIX3
    z = z ^ (z >> _S31)
    if z == np.uint64(0):
        z = _NONZERO
    return z


@njit(cache=True)
def _draw(cdf, state):
    """Advance the xorshift64* state and sample an index from the cdf."""
    state ^= state >> _S12
    state ^= state << _S25
    state ^= state >> _S27
    bits = (state * _MULT) >> _S11
    u = float(bits) * _TO_UNIT
    lo = 0
    hi = cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return state, lo


@njit(cache=True)
def _train_dbow(tokens, offsets, doc_vecs, syn1, noise_cdf, epochs, negative,
                alpha0, alpha_min, seed):
    n_docs = offsets.shape[0] - 1
    dim = doc_vecs.shape[1]
    vocab_size = syn1.shape[0]
    total = float(epochs * tokens.shape[0])
    state = _mix_seed(seed)
    step = 0
    grad = np.empty(dim, dtype=np.float64)
    for _ in range(epochs):
        for d in range(n_docs):
            for p in range(offsets[d], offsets[d + 1]):
                target = tokens[p]
                alpha = alpha0 - (alpha0 - alpha_min) * (step / total)
                if alpha < alpha_min:
                    alpha = alpha_min
                for j in range(dim):
                    grad[j] = 0.0
                for s in range(negative + 1):
                    if s == 0:
                        w = target
                        label = 1.0
                    else:
                        if vocab_size < 2:
                            break  # no distinct noise token exists
                        state, w = _draw(noise_cdf, state)
                        while w == target:
                            state, w = _draw(noise_cdf, state)
                        label = 0.0
                    dot = 0.0
                    for j in range(dim):
                        dot += doc_vecs[d, j] * syn1[w, j]
                    if dot > 30.0:
                        f = 1.0
                    elif dot < -30.0:
                        f = 0.0
                    else:
                        f = 1.0 / (1.0 + math.exp(-dot))
                    g = (label - f) * alpha
                    for j in range(dim):
                        grad[j] += g * syn1[w, j]
                    for j in range(dim):
                        syn1[w, j] += g * doc_vecs[d, j]
                for j in range(dim):
                    doc_vecs[d, j] += grad[j]
                step += 1


def train(docs: list[TokenDocument], params: EmbeddingParams) -> list[DocVector]:
    """Train paragraph vectors and return one DocVector per document, in
    input order.

    Documents whose tokens are all below min_count receive no updates and
    keep their (finite) random initialization. Bit-reproducible for a
    fixed seed.
    """
    if not isinstance(params, EmbeddingParams):
        raise InvalidParams("params must be an EmbeddingParams instance")
    vocab = build_vocab(docs, params.min_count)

    token_ids: list[int] = []
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    for i, doc in enumerate(docs):
        token_ids.extend(vocab.index(t) for t in doc.tokens if t in vocab)
        offsets[i + 1] = len(token_ids)
    flat = np.array(token_ids, dtype=np.int64)

    dim = params.vector_size
    bound = 0.5 / dim
    rng = np.random.default_rng(int(params.seed))
    doc_vecs = rng.uniform(-bound, bound, size=(len(docs), dim))
    syn1 = rng.uniform(-bound, bound, size=(len(vocab), dim))
    kernel_seed = np.uint64(rng.integers(0, 2**64, dtype=np.uint64))

    weights = np.power(vocab.counts.astype(np.float64), 0.75)
    noise_cdf = np.cumsum(weights)
    noise_cdf /= noise_cdf[-1]
    noise_cdf[-1] = 1.0

    if flat.size:
        _train_dbow(
            flat,
            offsets,
            doc_vecs,
            syn1,
            noise_cdf,
            np.int64(params.epochs),
            np.int64(params.negative_samples),
            float(params.initial_learning_rate),
            _MIN_ALPHA,
            kernel_seed,
        )
    return [DocVector(doc.event_id, doc_vecs[i].copy()) for i, doc in enumerate(docs)]


def cosine(a: DocVector, b: DocVector) -> float:
    """Cosine similarity in [-1, 1]. A single zero vector compares as 0.0;
    two zero vectors have no defined angle and raise ZeroVector."""
    va = np.asarray(a.values, dtype=np.float64)
    vb = np.asarray(b.values, dtype=np.float64)
    if va.shape != vb.shape:
        raise LengthMismatch(f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 and norm_b == 0.0:
        raise ZeroVector("cosine of two zero vectors is undefined")
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(va, vb) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))
