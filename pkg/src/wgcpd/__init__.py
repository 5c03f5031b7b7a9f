"""Distance-based change-point detection for vectors, graphs and functions."""

from .data import (
    DistanceMatrix,
    Observation,
    ScanWindow,
    Sequence,
    read_distance_matrix,
    read_sequence,
    validate_sequence,
)
from .detect import DetectionResult, detect
from .distances import Metric, build_distance_matrix, pairwise
from .errors import DegenerateDispersion, InputError, NumericalError, WgcpdError
from .kernel import center_gram, estimate_eigenvalues
from .nullmodel import (
    permutation_pvalue,
    pvalue_from_null,
    pvalue_S2_corrected,
    simulate_null_S1,
    simulate_null_S2,
)
from .scan import moments, scan_subinterval, scan_sums, statistic_S
from .segmentation import SegmentationConfig, binary_segment, changepoints_to_partition, rand_index

__version__ = "0.1.0"
