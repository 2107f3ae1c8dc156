"""Text embedding behind a provider contract.

Two providers: a deterministic built-in one (hashed character n-grams,
dependency-free, bit-stable across platforms) and a client for a remote
embedding service speaking the common JSON shape
``{"model":..., "input":[texts]}`` -> ``{"data":[{"embedding":[...]},...]}``.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import numpy as np
import requests

from .errors import DataError, ProviderError
from .util import fnv1a64

DEFAULT_DIM = 256
_NGRAM_SIZES = (3, 4, 5)


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    kind: str = "hashed_ngram"  # or "remote"
    dim: int = DEFAULT_DIM
    endpoint_url: str = ""
    api_key_env: str = "SMUTF_API_KEY"
    model_name: str = "text-embedding"
    timeout_ms: int = 10_000
    max_retries: int = 2

    def __post_init__(self):
        if self.kind not in ("hashed_ngram", "remote"):
            raise DataError("unknown embedder kind %r" % self.kind)
        if self.kind == "hashed_ngram" and self.dim < 8:
            raise DataError("hashed_ngram dim must be >= 8, got %d" % self.dim)
        if self.kind == "remote" and not self.endpoint_url:
            raise DataError("remote embedder requires an endpoint URL")


class _Cache:
    """Thread-safe text -> vector cache."""

    def __init__(self):
        self._data: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, key: str):
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value: np.ndarray):
        with self._lock:
            self._data[key] = value


class HashedNgramProvider:
    """Character n-gram feature hashing with L2 normalization.

    Texts are lowercased, padded with boundary markers '^' and '$', and all
    character n-grams for n in {3,4,5} are hashed (FNV-1a 64) into ``dim``
    buckets. Count vectors are L2-normalized; the all-empty text maps to the
    zero vector.
    """

    kind = "hashed_ngram"

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 8:
            raise DataError("hashed_ngram dim must be >= 8, got %d" % dim)
        self.dim = dim
        self._cache = _Cache()

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        counts = np.zeros(self.dim, dtype=np.float64)
        padded = "^" + text.lower() + "$"
        for n in _NGRAM_SIZES:
            # hash on the utf-8 bytes of each character n-gram
            for i in range(len(padded) - n + 1):
                gram = padded[i : i + n].encode("utf-8")
                counts[fnv1a64(gram) % self.dim] += 1.0
        norm = np.linalg.norm(counts)
        if norm > 0:
            counts /= norm
        counts.setflags(write=False)
        self._cache.put(text, counts)
        return counts


class RemoteEmbeddingProvider:
    """Client for an HTTP embedding service; dimension pinned by first reply."""

    kind = "remote"

    def __init__(self, config: EmbeddingProviderConfig):
        self.config = config
        self.dim: int | None = None
        self._cache = _Cache()
        self._lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = "Bearer " + key
        return headers

    def _post(self, texts: list[str]) -> list[np.ndarray]:
        payload = {"model": self.config.model_name, "input": texts}
        timeout = self.config.timeout_ms / 1000.0
        last_err: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                resp = requests.post(
                    self.config.endpoint_url,
                    json=payload,
                    headers=self._headers(),
                    timeout=timeout,
                )
                resp.raise_for_status()
                body = resp.json()
                vectors = [
                    np.asarray(item["embedding"], dtype=np.float64)
                    for item in body["data"]
                ]
                if len(vectors) != len(texts):
                    raise ProviderError(
                        "embedding service returned %d vectors for %d inputs"
                        % (len(vectors), len(texts))
                    )
                return vectors
            except ProviderError:
                raise
            except (requests.RequestException, KeyError, ValueError, TypeError) as exc:
                last_err = exc
        raise ProviderError(
            "embedding request to %s failed after %d attempts: %s"
            % (self.config.endpoint_url, self.config.max_retries + 1, last_err)
        )

    def _check_dim(self, vec: np.ndarray):
        with self._lock:
            if self.dim is None:
                self.dim = int(vec.shape[0])
            elif vec.shape[0] != self.dim:
                raise ProviderError(
                    "embedding dimension changed mid-run: got %d, expected %d"
                    % (vec.shape[0], self.dim)
                )
        if not np.all(np.isfinite(vec)):
            raise ProviderError("embedding service returned non-finite values")

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = self._post([text])[0]
        self._check_dim(vec)
        vec.setflags(write=False)
        self._cache.put(text, vec)
        return vec


def make_provider(config: EmbeddingProviderConfig):
    if config.kind == "hashed_ngram":
        return HashedNgramProvider(dim=config.dim)
    return RemoteEmbeddingProvider(config)


def embed_value_set(provider, values: list[str]) -> np.ndarray:
    """Arithmetic mean of per-value embeddings; not re-normalized.

    An empty value list maps to the zero vector.
    """
    if not values:
        dim = provider.dim if provider.dim is not None else DEFAULT_DIM
        return np.zeros(dim, dtype=np.float64)
    acc = np.zeros_like(provider.embed(values[0]))
    for v in values:
        acc = acc + provider.embed(v)
    return acc / len(values)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch: %s vs %s" % (a.shape, b.shape))
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
