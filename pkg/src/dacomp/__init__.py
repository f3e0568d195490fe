"""Deformation-aware image compression.

Small, smooth deformations of an image are usually invisible, yet they can
make it much cheaper to compress.  This package measures image fidelity
with the deformation-aware SSD (DASSD) and alternates between compressing a
deformed copy of the input and re-estimating the deformation that best
explains the compressed result.
"""
from .codec import (Budget, BudgetInfeasible, CodecError, CodecHandle, CompressResult, ExternalSpec,
                    builtin, compress_to_budget, external, probe_external)
from .driver import RateSchedule, RunConfig, RunResult, baseline, default_schedule, run
from .flow import FlowEnergy, FlowParams, estimate_flow, flow_energy, flow_gradient_check
from .image import ImageIOError, MetricsReport, load_image, luminance, psnr, save_image, ssd
from .metrics import DassdResult, dassd
from .warp import FlowField, read_flo, warp, write_flo
from .wavelet import (ThresholdBudget, WaveletPyramid, compress_global_threshold,
                      compress_subband_threshold, dwt_forward, dwt_inverse)
from .weights import WeightMap, build_weight_map, edge_map

__version__ = "0.1.0"

__all__ = [
    "Budget", "BudgetInfeasible", "CodecError", "CodecHandle", "CompressResult", "DassdResult",
    "ExternalSpec", "FlowEnergy", "FlowField", "FlowParams", "ImageIOError", "MetricsReport",
    "RateSchedule", "RunConfig", "RunResult", "ThresholdBudget", "WaveletPyramid", "WeightMap",
    "baseline", "build_weight_map", "builtin", "compress_global_threshold",
    "compress_subband_threshold", "compress_to_budget", "dassd", "default_schedule",
    "dwt_forward", "dwt_inverse", "edge_map", "estimate_flow", "external", "flow_energy",
    "flow_gradient_check", "load_image", "luminance", "probe_external", "psnr", "read_flo",
    "run", "save_image", "ssd", "warp", "write_flo",
]
