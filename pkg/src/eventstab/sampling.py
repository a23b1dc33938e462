"""Iterative greedy keyframe sampling with dynamic suppression.

Every candidate frame gets::

    comb = w_rel * rel + w_q * qual + w_u * uni + w_d * div

``rel`` (event count) and ``qual`` (count-raster variance) are min-max normalized over
the sequence. ``uni`` and ``div`` are recomputed against the already selected frames:
``uni = 1 - exp(-d / (tau * N / K))`` with ``d`` the index distance to the nearest
selected frame, ``div = 1 - max cosine similarity`` of coarse spatial histograms.
The first pick uses ``rel`` and ``qual`` only.
"""
from __future__ import annotations

from typing import List, NamedTuple, Sequence

import numpy as np

from .errors import KExceedsFrameCount
from .model import EventFrame, IgsConfig


class FrameScores(NamedTuple):
    rel: np.ndarray
    qual: np.ndarray
    uni: np.ndarray
    div: np.ndarray
    comb: np.ndarray


def minmax(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def intrinsic_scores(frames: Sequence[EventFrame]):
    counts = [f.counts for f in frames]
    rel = minmax([c.sum() for c in counts])
    qual = minmax([c.var() for c in counts])
    return rel, qual


def pooled_histogram(frame: EventFrame, bins: int) -> np.ndarray:
    """Sum of (pos + neg) counts over a ``bins`` x ``bins`` grid of image cells, flattened."""
    counts = frame.counts
    h, w = counts.shape
    rows = np.arange(h) * bins // h
    cols = np.arange(w) * bins // w
    hist = np.zeros((bins, bins))
    np.add.at(hist, (rows[:, None], cols[None, :]), counts)
    return hist.ravel()


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def suppression_scores(i: int, selected: Sequence[int], frames, cfg: IgsConfig, hists=None):
    """Temporal-uniformity and diversity scores of frame ``i`` against ``selected``."""
    n = len(frames)
    if hists is None:
        hists = [pooled_histogram(f, cfg.hist_bins) for f in frames]
    d = min(abs(i - j) for j in selected)
    uni = 1.0 - np.exp(-d / (cfg.tau * n / cfg.k))
    sim = max(cosine_similarity(hists[i], hists[j]) for j in selected)
    return float(uni), 1.0 - sim


def combined_score(rel, qual, uni, div, weights) -> float:
    w_rel, w_q, w_u, w_d = weights
    return w_rel * rel + w_q * qual + w_u * uni + w_d * div


def _weights(cfg: IgsConfig):
    return cfg.w_rel, cfg.w_q, cfg.w_u, cfg.w_d


def igs_select(frames: Sequence[EventFrame], cfg: IgsConfig) -> List[int]:
    """Select ``cfg.k`` frame indices (returned ascending); ties go to the lowest index."""
    n = len(frames)
    if cfg.k > n:
        raise KExceedsFrameCount(f"k = {cfg.k} exceeds {n} frames")
    if cfg.k < 1:
        return []
    rel, qual = intrinsic_scores(frames)
    hists = np.array([pooled_histogram(f, cfg.hist_bins) for f in frames])
    norms = np.linalg.norm(hists, axis=1)
    idx = np.arange(n)
    scale = cfg.tau * n / cfg.k

    first = int(np.argmax(cfg.w_rel * rel + cfg.w_q * qual))
    selected = [first]
    dist = np.abs(idx - first).astype(np.float64)
    max_sim = _similarity_to(hists, norms, first)
    free = np.ones(n, dtype=bool)
    free[first] = False
    while len(selected) < cfg.k:
        uni = 1.0 - np.exp(-dist / scale)
        div = 1.0 - max_sim
        comb = combined_score(rel, qual, uni, div, _weights(cfg))
        comb = np.where(free, comb, -np.inf)
        pick = int(np.argmax(comb))
        selected.append(pick)
        free[pick] = False
        dist = np.minimum(dist, np.abs(idx - pick))
        max_sim = np.maximum(max_sim, _similarity_to(hists, norms, pick))
    return sorted(selected)


def _similarity_to(hists, norms, j) -> np.ndarray:
    sim = np.zeros(len(hists))
    both = (norms > 0) & (norms[j] > 0)
    if norms[j] > 0:
        sim[both] = hists[both] @ hists[j] / (norms[both] * norms[j])
    else:
        sim[norms == 0] = 1.0
    return sim


def frame_scores(frames, selected, cfg: IgsConfig) -> FrameScores:
    """All four sub-scores and the combined score for every frame given ``selected``."""
    rel, qual = intrinsic_scores(frames)
    hists = [pooled_histogram(f, cfg.hist_bins) for f in frames]
    uni = np.zeros(len(frames))
    div = np.zeros(len(frames))
    if selected:
        for i in range(len(frames)):
            uni[i], div[i] = suppression_scores(i, selected, frames, cfg, hists)
    comb = combined_score(rel, qual, uni, div, _weights(cfg))
    return FrameScores(rel, qual, uni, div, comb)
