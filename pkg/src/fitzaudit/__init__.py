"""Skin-tone estimation, dataset composition audits and Fitzpatrick-disaggregated evaluation."""

from .colorspace import Lab, Pixel, YCbCr, rgb_to_lab, rgb_to_ycbcr
from .dataset import (
    ColumnMap,
    ManifestRecord,
    SplitSpec,
    condition_skin_coverage,
    distribution_stats,
    load_manifest,
    sampling_weights,
    split,
)
from .evalharness import (
    PredictionRecord,
    concordance,
    confusion_matrix,
    ita_distribution,
    topk_accuracy,
)
from .image import ImageBuffer, load_image
from .ita import ItaResult, compute_ita, ita_to_fitzpatrick, trimmed_stats
from .skinmask import SkinMask, mask_coverage, pixel_is_skin, skin_mask

__version__ = "0.1.0"
