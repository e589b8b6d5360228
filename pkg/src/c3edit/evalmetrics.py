"""Quantitative consistency and quality metrics.

All scores run over a pluggable embedder so a pretrained image/text encoder
can be swapped in when comparable absolute numbers matter; the default is the
package's frozen seeded feature pyramid (images) and hashed bag-of-tokens
(text), which needs no downloads and is bit-reproducible. Scores are stored
raw (cosines in [-1, 1]); the CLI multiplies by 100 when printing.
"""

from __future__ import annotations

from typing import Mapping, Protocol, Sequence

import numpy as np
import torch

from .editmodel import encode_prompt
from .errors import ValidationError
from .losses import default_pyramid

COVARIANCE_EPS = 1e-6


class Embedder(Protocol):
    dim: int

    def embed_image(self, image) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class PyramidEmbedder:
    """Default embedder: grid-pooled pyramid responses / hashed token bag.

    Pre-activation feature maps are average-pooled onto a fixed 4x4 grid per
    level and centered on the extractor's response to a flat gray image;
    without the centering, the operator's fixed bias dominates every
    embedding and all cosines saturate near 1.
    """

    GRID = 4

    def __init__(self):
        self.dim = self.GRID * self.GRID * sum(
            w.shape[0] for w in default_pyramid().weights
        )
        self._reference = self._pool(np.full((64, 64, 3), 0.5))

    def _pool(self, pixels: np.ndarray) -> np.ndarray:
        tensor = torch.from_numpy(np.asarray(pixels, dtype=np.float64))
        with torch.no_grad():
            feats = default_pyramid().pre_activation_features(tensor)
        pooled = [
            torch.nn.functional.adaptive_avg_pool2d(f, self.GRID).reshape(-1).numpy()
            for f in feats
        ]
        return np.concatenate(pooled)

    def embed_image(self, image) -> np.ndarray:
        pixels = image.pixels if hasattr(image, "pixels") else np.asarray(image)
        return self._pool(pixels) - self._reference

    def embed_text(self, text: str) -> np.ndarray:
        return encode_prompt(text, dim=self.dim)


def _default_embedder() -> Embedder:
    return PyramidEmbedder()


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def image_image_score(images: Sequence, embedder: Embedder | None = None) -> float:
    """Mean adjacent-pair embedding cosine, wrap-around included."""
    if len(images) < 2:
        raise ValidationError("image_image_score needs at least 2 images")
    emb = embedder or _default_embedder()
    vectors = [emb.embed_image(img) for img in images]
    n = len(vectors)
    return float(np.mean([cosine(vectors[i], vectors[(i + 1) % n]) for i in range(n)]))


def image_text_score(images: Sequence, prompt: str, embedder: Embedder | None = None) -> float:
    """Mean cosine between each image embedding and the prompt embedding."""
    if not images:
        raise ValidationError("image_text_score needs at least 1 image")
    if not prompt or not prompt.strip():
        raise ValidationError("prompt must be non-empty")
    emb = embedder or _default_embedder()
    text_vec = emb.embed_text(prompt)
    return float(np.mean([cosine(emb.embed_image(img), text_vec) for img in images]))


def _moments(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = vectors.mean(axis=0)
    if vectors.shape[0] < 2:
        sigma = np.zeros((vectors.shape[1], vectors.shape[1]))
    else:
        sigma = np.cov(vectors, rowvar=False)
    sigma = sigma + COVARIANCE_EPS * np.eye(vectors.shape[1])
    return mu, sigma


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition; negative
    eigenvalues (numerical noise) are clipped to zero."""
    eigvals, eigvecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def frechet_distance(set_a: Sequence, set_b: Sequence, embedder: Embedder | None = None) -> float:
    """Gaussian-moment distance between the two sets' embedding clouds.

    Embeddings are first rotated into the joint sample span: the distance is
    invariant under that orthogonal change of basis (the epsilon-regularized
    complement cancels exactly), and working in <= n_a+n_b dimensions keeps
    the matrix square root numerically clean for high-dimensional embedders.
    """
    if not set_a or not set_b:
        raise ValidationError("frechet_distance needs non-empty image sets")
    emb = embedder or _default_embedder()
    va = np.stack([emb.embed_image(img) for img in set_a])
    vb = np.stack([emb.embed_image(img) for img in set_b])
    joint = np.vstack([va, vb])
    center = joint.mean(axis=0)
    _, singular, vt = np.linalg.svd(joint - center, full_matrices=False)
    keep = singular > (singular[0] if singular.size else 0.0) * 1e-12
    if not keep.any():
        return 0.0  # all embeddings identical
    vt = vt[keep]
    va = (va - center) @ vt.T
    vb = (vb - center) @ vt.T
    mu_a, sig_a = _moments(va)
    mu_b, sig_b = _moments(vb)
    diff = mu_a - mu_b
    sqrt_b = _sqrtm_psd(sig_b)
    cross = _sqrtm_psd(sqrt_b @ sig_a @ sqrt_b)
    value = float(diff @ diff + np.trace(sig_a) + np.trace(sig_b) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def feature_scatter(
    groups: Mapping[str, Sequence], embedder: Embedder | None = None
) -> list[tuple[str, float, float]]:
    """Project all embeddings onto the pooled set's top-2 principal
    components. Component signs are fixed by making each component's
    largest-magnitude coordinate positive."""
    emb = embedder or _default_embedder()
    labels: list[str] = []
    vectors: list[np.ndarray] = []
    for name, images in groups.items():
        for img in images:
            labels.append(name)
            vectors.append(emb.embed_image(img))
    if len(vectors) < 3:
        raise ValidationError("feature_scatter needs at least 3 images in total")
    matrix = np.stack(vectors)
    centered = matrix - matrix.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2].copy()
    if components.shape[0] < 2:  # fewer dims than 2: pad with zeros
        components = np.vstack([components, np.zeros((2 - components.shape[0], matrix.shape[1]))])
    for i in range(2):
        pivot = np.argmax(np.abs(components[i]))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    coords = centered @ components.T
    return [(labels[i], float(coords[i, 0]), float(coords[i, 1])) for i in range(len(labels))]


def build_report(
    rendered: Sequence,
    edited: Sequence,
    prompt: str,
    embedder: Embedder | None = None,
    view_ids: Sequence[int] | None = None,
) -> dict:
    """Full metric report comparing original renders against edited views."""
    emb = embedder or _default_embedder()
    ids = list(view_ids) if view_ids is not None else list(range(len(edited)))
    vectors = [emb.embed_image(img) for img in edited]
    n = len(vectors)
    pairs = [
        {
            "view_a": ids[i],
            "view_b": ids[(i + 1) % n],
            "cosine": cosine(vectors[i], vectors[(i + 1) % n]),
        }
        for i in range(n)
    ]
    text_vec = emb.embed_text(prompt)
    per_view_text = [
        {"view_id": ids[i], "cosine": cosine(vectors[i], text_vec)} for i in range(n)
    ]
    scatter = feature_scatter({"rendered": rendered, "edited": edited}, embedder=emb)
    return {
        "prompt": prompt,
        "image_image_score": float(np.mean([p["cosine"] for p in pairs])),
        "image_text_score": float(np.mean([p["cosine"] for p in per_view_text])),
        "frechet_distance": frechet_distance(rendered, edited, embedder=emb),
        "pairs": pairs,
        "per_view_text": per_view_text,
        "scatter": [{"group": g, "x": x, "y": y} for g, x, y in scatter],
    }
