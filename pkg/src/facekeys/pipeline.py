"""Feature pipeline shared by the benchmark and the CLI.

Turns an image block into model-ready features: optional pixel scaling,
optional LBP coding (pixel-map or cell-histogram form), optional PCA
projection. A fitted pipeline serializes to flat arrays plus JSON-safe
metadata so trained models can be applied to new images later.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import pca as pca_mod
from .dataset import FeatureMatrix
from .lbp import LbpConfig, lbp_basic, lbp_circular, lbp_histogram_features


@dataclass(eq=False)
class FeaturePipeline:
    """scale -> (lbp) -> (pca), each stage optional except scaling policy."""

    scale_pixels: bool = True
    lbp: LbpConfig | None = None
    lbp_mode: str = "pixel_map"  # or "histogram"
    pca: pca_mod.PcaModel | None = None

    def __post_init__(self):
        if self.lbp_mode not in ("pixel_map", "histogram"):
            raise ValueError(f"unknown lbp_mode {self.lbp_mode!r}")

    def _lbp_matrix(self, images: np.ndarray) -> np.ndarray:
        rows = []
        for i in range(images.shape[0]):
            cfg = self.lbp
            if cfg.neighbors == 8 and cfg.radius == 1.0 and not cfg.rotation_invariant:
                coded = lbp_basic(images[i])
            else:
                coded = lbp_circular(images[i], cfg)
            if self.lbp_mode == "histogram":
                rows.append(lbp_histogram_features(coded, cfg))
            else:
                rows.append(coded.codes.reshape(-1).astype(np.float64))
        return np.stack(rows)

    def transform(self, images: np.ndarray) -> FeatureMatrix:
        """Feature rows for an (n, h, w) uint8 image block."""
        source = "raw"
        if self.lbp is not None:
            X = self._lbp_matrix(images)
            source = "lbp"
        else:
            X = images.reshape(images.shape[0], -1).astype(np.float64)
            if self.scale_pixels:
                X /= 255.0
        if self.pca is not None:
            X = pca_mod.transform(self.pca, X)
            source = "pca"
        return FeatureMatrix(X, source)


def fit_pipeline(
    images_train: np.ndarray,
    scale_pixels: bool = True,
    lbp: LbpConfig | None = None,
    lbp_mode: str = "pixel_map",
    pca_components: int | None = None,
    variance_target: float | None = None,
) -> FeaturePipeline:
    """Fit pipeline state (the PCA stage) on training images only."""
    pipe = FeaturePipeline(scale_pixels=scale_pixels, lbp=lbp, lbp_mode=lbp_mode)
    if pca_components is not None or variance_target is not None:
        pre = pipe.transform(images_train)
        pipe.pca = pca_mod.fit_pca(
            pre.values, n_components=pca_components, variance_target=variance_target
        )
    return pipe


def pipeline_to_payload(pipe: FeaturePipeline) -> tuple[dict, dict[str, np.ndarray]]:
    """JSON-safe metadata plus arrays for serialization."""
    meta = {
        "scale_pixels": pipe.scale_pixels,
        "lbp": asdict(pipe.lbp) if pipe.lbp is not None else None,
        "lbp_mode": pipe.lbp_mode,
        "has_pca": pipe.pca is not None,
    }
    arrays: dict[str, np.ndarray] = {}
    if pipe.pca is not None:
        arrays["pipe_pca_mean"] = pipe.pca.mean
        arrays["pipe_pca_components"] = pipe.pca.components
        arrays["pipe_pca_variance"] = pipe.pca.explained_variance
        arrays["pipe_pca_ratio"] = pipe.pca.explained_ratio
    return meta, arrays


def pipeline_from_payload(meta: dict, arrays) -> FeaturePipeline:
    """Inverse of pipeline_to_payload."""
    lbp_cfg = LbpConfig(**meta["lbp"]) if meta.get("lbp") else None
    model = None
    if meta.get("has_pca"):
        model = pca_mod.PcaModel(
            mean=np.asarray(arrays["pipe_pca_mean"]),
            components=np.asarray(arrays["pipe_pca_components"]),
            explained_variance=np.asarray(arrays["pipe_pca_variance"]),
            explained_ratio=np.asarray(arrays["pipe_pca_ratio"]),
        )
    return FeaturePipeline(
        scale_pixels=bool(meta["scale_pixels"]),
        lbp=lbp_cfg,
        lbp_mode=meta.get("lbp_mode", "pixel_map"),
        pca=model,
    )
