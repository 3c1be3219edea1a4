"""2-D embedding export: bottleneck activations projected onto their top
two principal directions (power iteration with deflation), written as a
point CSV and a self-contained scatter SVG.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Batch, SOURCE_TAG
from .exceptions import DataError
from .networks import ModelBundle, forward_features

# one color family per domain, shaded by class
_SOURCE_COLORS = ["#c0392b", "#e67e22", "#d35400", "#a93226", "#f1948a"]
_TARGET_COLORS = ["#2980b9", "#16a085", "#1f618d", "#117a65", "#85c1e9"]


def power_iteration_top2(
    cov: np.ndarray, tol: float = 1e-10, max_iter: int = 1000
) -> tuple[np.ndarray, np.ndarray]:
    """Top-2 eigenpairs of a symmetric PSD matrix via power iteration.

    The second direction comes from deflating the first:
    cov' = cov - lam1 * v1 v1^T.
    """
    d = cov.shape[0]
    rng = np.random.default_rng(0)
    vecs, vals = [], []
    work = cov.copy()
    for _ in range(2):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            w = work @ v
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            w /= norm
            if w @ v < 0:
                w = -w
            if np.linalg.norm(w - v) < tol:
                v = w
                break
            v = w
        lam = float(v @ work @ v)
        # deterministic sign: largest-magnitude coordinate positive
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            v = -v
        vecs.append(v)
        vals.append(lam)
        work = work - lam * np.outer(v, v)
    return np.array(vecs), np.array(vals)


def pca_project_2d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center and project onto the top two principal directions.

    Returns (projected n x 2, components 2 x d).
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3:
        raise DataError(f"projection needs at least 3 samples, got shape {x.shape}")
    centered = x - x.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / (x.shape[0] - 1)
    comps, _ = power_iteration_top2(cov)
    return centered @ comps.T, comps


def bottleneck_embeddings(bundle: ModelBundle, batch: Batch) -> np.ndarray:
    """Eval-mode bottleneck activations for a batch."""
    feats = forward_features(None, bundle, batch)
    return bundle.B.forward(None, feats).data


def export_embeddings(
    bundle: ModelBundle,
    src_eval: Batch,
    tgt_eval: Batch,
    out_csv,
    out_svg,
) -> np.ndarray:
    """Write `x,y,domain,label` CSV plus a scatter SVG of the projection."""
    if src_eval.labels is None or tgt_eval.labels is None:
        raise DataError("embedding export needs labeled evaluation data")
    emb = np.vstack([
        bottleneck_embeddings(bundle, src_eval),
        bottleneck_embeddings(bundle, tgt_eval),
    ])
    domains = np.concatenate([src_eval.domain_tags, tgt_eval.domain_tags])
    labels = np.concatenate([src_eval.labels, tgt_eval.labels])
    projected, _ = pca_project_2d(emb)

    lines = ["x,y,domain,label"]
    for i in range(projected.shape[0]):
        lines.append(
            f"{projected[i, 0]!r},{projected[i, 1]!r},{int(domains[i])},{int(labels[i])}"
        )
    Path(out_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_scatter_svg(projected, domains, labels, out_svg)
    return projected


def write_scatter_svg(points: np.ndarray, domains, labels, path,
                      size: int = 480, margin: float = 30.0) -> None:
    """Self-contained scatter plot; source in warm colors, target in cool."""
    pts = np.asarray(points, dtype=np.float64)
    domains = np.asarray(domains)
    labels = np.asarray(labels)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = size - 2 * margin

    def to_px(p):
        x = margin + (p[0] - lo[0]) / span[0] * inner
        y = size - margin - (p[1] - lo[1]) / span[1] * inner
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i in range(pts.shape[0]):
        x, y = to_px(pts[i])
        family = _SOURCE_COLORS if domains[i] == SOURCE_TAG else _TARGET_COLORS
        color = family[int(labels[i]) % len(family)]
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}" '
                     f'fill-opacity="0.7"/>')
    parts.append(f'<text x="{margin}" y="{margin - 10:.0f}" font-size="12" '
                 f'fill="#333">warm = source, cool = target; shade = class</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
