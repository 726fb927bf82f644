"""Reproducibility of binary activation maps.

Pairwise Dice and Jaccard overlap, the eigenvalue-based summarized multiple
overlap coefficient, and a jackknife test that flags anomalous maps under
false discovery rate control.
"""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionMismatchError,
    FormatError,
    OverlapRelError,
)
from .volume import (
    Format,
    GridDims,
    StatMap,
    StudySet,
    VoxelMask,
    load_mask,
    load_statmap,
    save_mask,
    save_statmap,
    threshold_statmap,
)
from .overlap import OverlapMatrix, PairCounts, dice, dice_to_jaccard, jaccard, overlap_matrix, pair_counts
from .spectral import Spectrum, SummaryResult, eigen_sym, summarize
from .outliers import (
    JackknifeRecord,
    OutlierReport,
    arcsine_transform,
    bh_fdr,
    jackknife_test,
    loo_summaries,
    t_sf,
)
from .composite import DiffMap, composite_map, diff_masks
from .synth import SynthConfig, generate, generate_statmaps, oracle_jaccard
