"""Frequency tagging for CNNs.

Flicker image regions at distinct frequencies, drive the frames through a
forward-only inference engine, and score each convolutional filter by the SNR
of its activation spectrum at harmonic and intermodulation frequencies.
"""

from .cifar import load_cifar10, write_cifar10
from .engine import (ActivationTrace, Model, collect_traces, forward_with_taps,
                     load_model, reduce_feature_map)
from .errors import (AlignmentError, BaselineError, FormatError, FreqtagError,
                     GraphError, NumericError)
from .importance import (ImportanceConfig, ImportanceReport, SnrTable, assess,
                         component_snr_table, layer_histogram)
from .pruning import EvalResult, FilterMask, apply_mask, evaluate
from .spectra import (Component, ComponentSet, Spectrum, amplitude_spectrum,
                      bin_of_frequency, default_exclusion, enumerate_components,
                      snr_at_bin, sns_at_bin)
from .stimulus import (REGION_LEFT, REGION_RIGHT, UNTAGGED, FrameSequence,
                       RegionMask, TaggingConfig, coefficient_series,
                       contrast_coefficient, default_half_mask,
                       tag_image_sequence, write_frame_pngs)
from .tensorstore import TensorStore

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace", "AlignmentError", "BaselineError", "Component",
    "ComponentSet", "EvalResult", "FilterMask", "FormatError", "FrameSequence",
    "FreqtagError", "GraphError", "ImportanceConfig", "ImportanceReport",
    "Model", "NumericError", "REGION_LEFT", "REGION_RIGHT", "RegionMask",
    "SnrTable", "Spectrum", "TaggingConfig", "TensorStore", "UNTAGGED",
    "amplitude_spectrum", "apply_mask", "assess", "bin_of_frequency",
    "coefficient_series", "collect_traces", "component_snr_table",
    "contrast_coefficient", "default_exclusion", "default_half_mask",
    "enumerate_components", "evaluate", "forward_with_taps", "layer_histogram",
    "load_cifar10", "load_model", "reduce_feature_map", "snr_at_bin",
    "sns_at_bin", "tag_image_sequence", "write_cifar10", "write_frame_pngs",
]
