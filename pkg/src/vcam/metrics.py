"""Image-fidelity and consistency metrics: PSNR, SSIM, epipolar (T)SED, and
the oracle-backed cross-pass hallucination disagreement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .geometry import Camera, MatchSet, epipolar_sed, fundamental_matrix
from .oracle import Frame


class MetricError(ValueError):
    """Raised for mismatched or undersized metric inputs."""


def _check_same_size(a: Frame, b: Frame):
    if (a.width, a.height) != (b.width, b.height):
        raise MetricError(f"frame sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def psnr(a: Frame, b: Frame) -> float:
    """Peak signal-to-noise ratio in dB over all channels; +inf when equal."""
    _check_same_size(a, b)
    diff = a.rgb.astype(np.float64) - b.rgb.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_L = 255.0


def _gaussian_window() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) / 2.0
    coords = np.arange(_SSIM_WINDOW) - half
    g = np.exp(-(coords ** 2) / (2.0 * _SSIM_SIGMA ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


_WINDOW = _gaussian_window()


def ssim(a: Frame, b: Frame) -> float:
    """Mean structural similarity with the reference 11x11 sigma=1.5 Gaussian
    window, computed per channel over the valid region and averaged."""
    _check_same_size(a, b)
    if min(a.width, a.height) < _SSIM_WINDOW:
        raise MetricError(f"images must be at least {_SSIM_WINDOW} pixels per side")
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    total = 0.0
    for ch in range(3):
        x = a.rgb[..., ch].astype(np.float64)
        y = b.rgb[..., ch].astype(np.float64)
        mu_x = convolve2d(x, _WINDOW, mode="valid")
        mu_y = convolve2d(y, _WINDOW, mode="valid")
        var_x = convolve2d(x * x, _WINDOW, mode="valid") - mu_x * mu_x
        var_y = convolve2d(y * y, _WINDOW, mode="valid") - mu_y * mu_y
        cov = convolve2d(x * y, _WINDOW, mode="valid") - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        total += float(np.mean(num / den))
    return total / 3.0


def tsed(frames: list[Frame], cameras: list[Camera],
         correspondences: list[MatchSet],
         symmetric: bool = True) -> tuple[list[float], float]:
    """Per-adjacent-pair mean epipolar distance and the aggregate mean.

    Uses the exact fundamental matrix from the camera poses; correspondences
    come from the caller (oracle ground truth or an external matcher), one
    MatchSet per adjacent frame pair.
    """
    if len(frames) < 2:
        raise MetricError("need at least two frames")
    if len(cameras) != len(frames):
        raise MetricError("camera count must match frame count")
    if correspondences is None or len(correspondences) != len(frames) - 1:
        raise MetricError("need one correspondence set per adjacent pair")
    per_pair = []
    for i, matches in enumerate(correspondences):
        F = fundamental_matrix(cameras[i], cameras[i + 1])
        _, mean = epipolar_sed(F, matches, symmetric=symmetric)
        per_pair.append(mean)
    return per_pair, float(np.mean(per_pair))


@dataclass
class DisagreementReport:
    """Cross-pass hallucination disagreement in 8-bit units."""

    mean: float
    compared_cells: int
    no_overlap: bool = False
    per_pair: list[float] = field(default_factory=list)


def _frame_cell_colors(frame: Frame, meta) -> dict[int, np.ndarray]:
    """cell key -> hallucination color for one generated frame (colors are
    constant per cell within a frame by construction)."""
    keys = meta.cell_keys()[meta.hallucinated]
    colors = frame.rgb[meta.hallucinated]
    out: dict[int, np.ndarray] = {}
    for key, color in zip(keys.tolist(), colors):
        if key not in out:
            out[key] = color.astype(np.float64)
    return out


def cross_pass_disagreement(result, scene=None, adjacent_only: bool = False) -> DisagreementReport:
    """Mean |RGB| difference over scene cells hallucinated in multiple passes.

    With adjacent_only, comparisons are restricted to temporally adjacent
    target frames from different passes (the flicker a viewer would see);
    otherwise every pass pair sharing a hallucinated cell is compared. Needs
    per-pixel oracle metadata on the result; returns 0 with the no-overlap
    flag when nothing is co-hallucinated.
    """
    if not result.target_metadata:
        raise MetricError("result carries no oracle metadata")

    diffs: list[float] = []
    if adjacent_only:
        indices = sorted(result.frames)
        per_pair = []
        for k0, k1 in zip(indices, indices[1:]):
            if result.target_pass.get(k0) == result.target_pass.get(k1):
                per_pair.append(0.0)
                continue
            cells0 = _frame_cell_colors(result.frames[k0], result.target_metadata[k0])
            cells1 = _frame_cell_colors(result.frames[k1], result.target_metadata[k1])
            common = cells0.keys() & cells1.keys()
            pair_diffs = [float(np.mean(np.abs(cells0[c] - cells1[c]))) for c in common]
            diffs.extend(pair_diffs)
            per_pair.append(float(np.mean(pair_diffs)) if pair_diffs else 0.0)
        if not diffs:
            return DisagreementReport(0.0, 0, no_overlap=True, per_pair=per_pair)
        return DisagreementReport(float(np.mean(diffs)), len(diffs), per_pair=per_pair)

    per_pass_cells: dict[int, dict[int, np.ndarray]] = {}
    for k, meta in result.target_metadata.items():
        pid = result.target_pass[k]
        cells = _frame_cell_colors(result.frames[k], meta)
        per_pass_cells.setdefault(pid, {}).update(cells)
    for j, meta in result.anchor_metadata.items():
        # Target-backed anchors were already merged via their target frame;
        # setdefault makes re-merging harmless.
        pid = result.anchor_pass[j]
        cells = _frame_cell_colors(result.anchor_frames[j], meta)
        merged = per_pass_cells.setdefault(pid, {})
        for key, color in cells.items():
            merged.setdefault(key, color)

    cell_owners: dict[int, list[int]] = {}
    for pid, cells in per_pass_cells.items():
        for key in cells:
            cell_owners.setdefault(key, []).append(pid)
    compared = 0
    for key, owners in cell_owners.items():
        if len(owners) < 2:
            continue
        colors = [per_pass_cells[pid][key] for pid in sorted(owners)]
        cell_diffs = [float(np.mean(np.abs(colors[i] - colors[j])))
                      for i in range(len(colors)) for j in range(i + 1, len(colors))]
        diffs.append(float(np.mean(cell_diffs)))
        compared += 1
    if not diffs:
        return DisagreementReport(0.0, 0, no_overlap=True)
    return DisagreementReport(float(np.mean(diffs)), compared)


@dataclass
class MetricReport:
    """Per-frame metric values and their means; fields for neural metrics are
    reserved so externally computed values can be merged."""

    per_frame: dict[str, list[float]] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    lpips: float | None = None
    motion_smoothness: float | None = None

    def add(self, name: str, values: list[float]):
        values = [float(v) for v in values]
        self.per_frame[name] = values
        finite = [v for v in values if math.isfinite(v)]
        self.means[name] = float(np.mean(finite)) if finite else math.inf

    @property
    def frame_count(self) -> int:
        return max((len(v) for v in self.per_frame.values()), default=0)


def evaluate_frames(predictions: list[Frame], references: list[Frame],
                    cameras: list[Camera] | None = None,
                    correspondences: list[MatchSet] | None = None) -> MetricReport:
    """PSNR/SSIM of predictions against references, plus TSED when cameras and
    correspondences are supplied."""
    if len(predictions) != len(references):
        raise MetricError("prediction and reference counts differ")
    if not predictions:
        raise MetricError("nothing to evaluate")
    report = MetricReport()
    report.add("psnr", [psnr(p, r) for p, r in zip(predictions, references)])
    report.add("ssim", [ssim(p, r) for p, r in zip(predictions, references)])
    if cameras is not None and correspondences is not None:
        per_pair, _ = tsed(predictions, cameras, correspondences)
        report.add("tsed", per_pair)
    return report
