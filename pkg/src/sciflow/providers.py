"""Provider contracts for model-backed signals, with deterministic offline
fallbacks so the whole suite runs without network access.

Every provider carries a stable ``id``; reports stamp these ids so scores
produced under different provider configurations are never silently merged.
Remote clients validate response ranges instead of clamping: an out-of-range
score indicates a misconfigured judge and must surface as an error.
"""

from __future__ import annotations

import base64
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from .docio import read_document
from .errors import ConfigError, DocumentParseError, SchemaVersionError
from .graph import FlowDirection, LayoutMeta

PERCEPTION_SCHEMA_VERSION = "sciflow-perception/1"


# --- contracts --------------------------------------------------------------


@runtime_checkable
class EmbeddingProvider(Protocol):
    id: str

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


@runtime_checkable
class JudgeProvider(Protocol):
    id: str

    def alignment(self, graph_document: str, prompt_document: str) -> float: ...

    def flow(self, image: bytes, prompt_document: str) -> float: ...


@runtime_checkable
class ImageTextProvider(Protocol):
    """Image-to-text similarity as a raw cosine in [-1, 1]."""

    id: str

    def similarity(self, image: bytes, text: str) -> float: ...


@runtime_checkable
class PerceptualProvider(Protocol):
    id: str

    def distance(self, image_a: bytes, image_b: bytes) -> float: ...


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; any zero vector yields 0 by definition."""
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.dot(a, b) / norm)


def is_unembeddable(vector: np.ndarray) -> bool:
    return float(np.linalg.norm(vector)) == 0.0


# --- deterministic local fallbacks ------------------------------------------


class TrigramEmbedder:
    """Lexical fallback for the sentence-embedding provider.

    Lowercases, strips punctuation, hashes character trigrams into a
    fixed-width count vector and L2-normalizes. Purely lexical; reports
    label it as such through the provider id.
    """

    def __init__(self, dim: int = 512):
        if dim <= 0:
            raise ConfigError("embedding dimension must be positive")
        self.dim = dim
        self.id = f"trigram-{dim}"

    @staticmethod
    def _normalize(text: str) -> str:
        cleaned = "".join(c if c.isalnum() else " " for c in text.lower())
        return " ".join(cleaned.split())

    @classmethod
    def trigrams(cls, text: str) -> list[str]:
        s = cls._normalize(text)
        if not s:
            return []
        if len(s) < 3:
            return [s]
        return [s[i : i + 3] for i in range(len(s) - 2)]

    def _bucket(self, trigram: str) -> int:
        digest = hashlib.blake2b(trigram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = []
        for text in texts:
            vec = np.zeros(self.dim, dtype=np.float64)
            for tri in self.trigrams(text):
                vec[self._bucket(tri)] += 1.0
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec /= norm
            # empty text stays a zero vector: flagged unembeddable
            vectors.append(vec)
        return vectors


class ConstantJudge:
    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"judge constant must lie in [0,1], got {value}")
        self.value = value
        self.id = f"constant-judge-{value:g}"

    def alignment(self, graph_document: str, prompt_document: str) -> float:
        return self.value

    def flow(self, image: bytes, prompt_document: str) -> float:
        return self.value


def constant_judge(value: float) -> ConstantJudge:
    return ConstantJudge(value)


class ConstantImageText:
    def __init__(self, cosine_value: float):
        if not -1.0 <= cosine_value <= 1.0:
            raise ConfigError(f"image-text cosine constant must lie in [-1,1], got {cosine_value}")
        self.value = cosine_value
        self.id = f"constant-imagetext-{cosine_value:g}"

    def similarity(self, image: bytes, text: str) -> float:
        return self.value


class IdentityPerceptual:
    """Byte-identity stand-in for the learned perceptual metric: distance 0
    for identical images, a fixed distance otherwise."""

    def __init__(self, mismatch_distance: float = 1.0):
        if mismatch_distance < 0:
            raise ConfigError("mismatch distance must be nonnegative")
        self.mismatch_distance = mismatch_distance
        self.id = f"identity-perceptual-{mismatch_distance:g}"

    def distance(self, image_a: bytes, image_b: bytes) -> float:
        return 0.0 if image_a == image_b else self.mismatch_distance


# --- perception fixtures -----------------------------------------------------


def _check_bbox(bbox: Any, location: str) -> tuple[float, float, float, float]:
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        raise DocumentParseError("bbox must be [x0, y0, x1, y1]", location=location)
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
        raise DocumentParseError(f"bbox {bbox} outside normalized bounds", location=location)
    return (x0, y0, x1, y1)


def _check_confidence(value: Any, location: str) -> float:
    conf = float(value)
    if not 0.0 <= conf <= 1.0:
        raise DocumentParseError(f"confidence {value} outside [0,1]", location=location)
    return conf


@dataclass(frozen=True)
class Region:
    bbox: tuple[float, float, float, float]
    shape_class: str
    confidence: float


@dataclass(frozen=True)
class TextItem:
    bbox: tuple[float, float, float, float]
    text: str
    confidence: float


@dataclass(frozen=True)
class PerceptionBundle:
    regions: tuple[Region, ...] = ()
    texts: tuple[TextItem, ...] = ()
    layout: LayoutMeta | None = None


def parse_perception_document(doc: dict[str, Any]) -> PerceptionBundle:
    version = doc.get("schema_version")
    if version != PERCEPTION_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"expected {PERCEPTION_SCHEMA_VERSION!r}, found {version!r}", location="schema_version"
        )
    regions = []
    for i, rd in enumerate(doc.get("regions", [])):
        loc = f"regions[{i}]"
        regions.append(
            Region(
                bbox=_check_bbox(rd.get("bbox"), f"{loc}.bbox"),
                shape_class=str(rd.get("shape_class", "")),
                confidence=_check_confidence(rd.get("confidence", 1.0), f"{loc}.confidence"),
            )
        )
    texts = []
    for i, td in enumerate(doc.get("texts", [])):
        loc = f"texts[{i}]"
        texts.append(
            TextItem(
                bbox=_check_bbox(td.get("bbox"), f"{loc}.bbox"),
                text=str(td.get("text", "")),
                confidence=_check_confidence(td.get("confidence", 1.0), f"{loc}.confidence"),
            )
        )
    layout = None
    layout_doc = doc.get("layout")
    if layout_doc is not None:
        direction = layout_doc.get("flow_direction", "unknown")
        try:
            flow = FlowDirection(direction)
        except ValueError:
            raise DocumentParseError(f"invalid flow_direction {direction!r}", location="layout") from None
        size = layout_doc.get("figure_size")
        layout = LayoutMeta(flow_direction=flow, figure_size=(int(size[0]), int(size[1])) if size else None)
    return PerceptionBundle(regions=tuple(regions), texts=tuple(texts), layout=layout)


def load_perception_fixture(path: str | Path) -> PerceptionBundle:
    return parse_perception_document(read_document(path))


# --- remote providers --------------------------------------------------------


class ProviderError(Exception):
    """Base class for provider failures; carries the provider id."""

    def __init__(self, provider_id: str, message: str):
        self.provider_id = provider_id
        super().__init__(f"{provider_id}: {message}")


class ProviderTimeoutError(ProviderError):
    pass


class ProviderTransportError(ProviderError):
    pass


class ProviderResponseError(ProviderError):
    """Response was not parseable into the expected shape."""


class ProviderRangeError(ProviderError):
    """Response value violated the provider contract range."""


@dataclass(frozen=True)
class RemoteConfig:
    endpoint: str
    auth_env: str | None = None
    timeout_ms: int = 10_000
    retries: int = 2

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.retries < 0:
            raise ConfigError("retry count must be nonnegative")


class _RemoteClient:
    def __init__(self, config: RemoteConfig, provider_id: str, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.id = provider_id
        headers = {}
        if config.auth_env:
            token = os.environ.get(config.auth_env, "")
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.endpoint,
            timeout=config.timeout_ms / 1000.0,
            headers=headers,
            transport=transport,
        )

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        last_timeout: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                response = self._client.post(path, json=payload)
            except httpx.TimeoutException as exc:
                last_timeout = exc
                continue
            except httpx.TransportError as exc:
                raise ProviderTransportError(self.id, str(exc)) from exc
            if response.status_code != 200:
                raise ProviderTransportError(self.id, f"HTTP {response.status_code}")
            try:
                body = response.json()
            except ValueError as exc:
                raise ProviderResponseError(self.id, "response is not valid JSON") from exc
            if not isinstance(body, dict):
                raise ProviderResponseError(self.id, "response body must be an object")
            return body
        raise ProviderTimeoutError(self.id, f"timed out after {self.config.retries + 1} attempts") from last_timeout

    def _score(self, path: str, payload: dict[str, Any], key: str, low: float, high: float) -> float:
        body = self._post(path, payload)
        if key not in body:
            raise ProviderResponseError(self.id, f"response missing {key!r}")
        try:
            value = float(body[key])
        except (TypeError, ValueError):
            raise ProviderResponseError(self.id, f"{key!r} is not a number: {body[key]!r}") from None
        if not low <= value <= high:
            raise ProviderRangeError(self.id, f"{key} {value} outside [{low}, {high}]")
        return value


class RemoteEmbeddingProvider(_RemoteClient):
    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(config, f"remote-embed:{config.endpoint}", transport)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        body = self._post("/embed", {"texts": list(texts)})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderResponseError(self.id, "vector count does not match text count")
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            norm = float(np.linalg.norm(arr))
            if norm != 0.0 and abs(norm - 1.0) > 1e-3:
                raise ProviderRangeError(self.id, f"vector norm {norm} is not unit")
            out.append(arr)
        return out


class RemoteJudgeProvider(_RemoteClient):
    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(config, f"remote-judge:{config.endpoint}", transport)

    def alignment(self, graph_document: str, prompt_document: str) -> float:
        return self._score("/alignment", {"graph": graph_document, "prompt": prompt_document}, "score", 0.0, 1.0)

    def flow(self, image: bytes, prompt_document: str) -> float:
        payload = {"image": base64.b64encode(image).decode("ascii"), "prompt": prompt_document}
        return self._score("/flow", payload, "score", 0.0, 1.0)


class RemoteImageTextProvider(_RemoteClient):
    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(config, f"remote-imagetext:{config.endpoint}", transport)

    def similarity(self, image: bytes, text: str) -> float:
        payload = {"image": base64.b64encode(image).decode("ascii"), "text": text}
        return self._score("/similarity", payload, "similarity", -1.0, 1.0)


class RemotePerceptualProvider(_RemoteClient):
    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(config, f"remote-perceptual:{config.endpoint}", transport)

    def distance(self, image_a: bytes, image_b: bytes) -> float:
        payload = {
            "image_a": base64.b64encode(image_a).decode("ascii"),
            "image_b": base64.b64encode(image_b).decode("ascii"),
        }
        return self._score("/distance", payload, "distance", 0.0, float("inf"))
