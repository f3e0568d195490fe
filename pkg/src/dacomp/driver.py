"""Alternating deformation-aware compression.

Starting from the identity flow and a generous budget, repeat:

1. ``x <- compress(warp(y, flow), budget)``
2. ``flow <- estimate_flow(y, x, w, init=flow)``
3. tighten the budget according to the schedule

then run one last compression at the target budget.  The weight map is
computed once from ``y``.
"""
from __future__ import annotations

import dataclasses
import datetime
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .codec import Budget, CodecHandle, CompressResult, compress_to_budget
from .flow import FlowParams, effective_lambda, estimate_flow, flow_energy, smoothness
from .image import MetricsReport, as_image, psnr, ssd
from .metrics import dassd
from .warp import FlowField, warp
from .weights import ALPHA_DEFAULTS, DEFAULT_SIGMA, WeightMap, build_weight_map

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RateSchedule:
    """Sequence of intermediate budgets ending at ``target``.

    The start value is held for ``plateau`` iterations, then moved one
    ``step`` toward the target every ``slow_period`` iterations for
    ``slow_iterations`` iterations, then one step per iteration.  Values that
    would reach or cross the target are not emitted; the caller finishes
    with one compression at the target itself.
    """

    mode: str
    start: float
    target: float
    step: float = 1.0
    plateau: int = 10
    slow_iterations: int = 25
    slow_period: int = 5

    def __post_init__(self):
        if self.mode not in ("ratio", "quality", "bpp"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.step <= 0:
            raise ValueError("step must be > 0")
        if self.plateau < 0 or self.slow_iterations < 0 or self.slow_period < 1:
            raise ValueError("schedule phase lengths must be non-negative")

    @classmethod
    def direct(cls, mode: str, target: float, iterations: int) -> "RateSchedule":
        """Every iteration at the target budget."""
        return cls(mode, target, target, 1.0, iterations, 0, 1)

    def values(self) -> list:
        direction = math.copysign(1.0, self.target - self.start)
        reached = lambda v: (v - self.target) * direction >= -1e-12  # noqa: E731
        if self.start == self.target:
            return [self.target] * self.plateau
        if reached(self.start):
            return []
        out = [self.start] * self.plateau
        cur = self.start
        for i in range(self.slow_iterations):
            if i % self.slow_period == 0:
                cur += direction * self.step
            if reached(cur):
                return out
            out.append(cur)
        while True:
            cur += direction * self.step
            if reached(cur):
                return out
            out.append(cur)


def default_schedule(codec: CodecHandle, mode: str, target: float) -> RateSchedule:
    """Gradual schedule with per-codec starting points and step sizes."""
    if mode == "ratio":
        start, step = (5.0, 1.0) if codec.builtin else (20.0, 5.0)
    elif mode == "quality":
        if codec.external is not None and not codec.external.higher_is_better:
            start, step = 30.0, 1.0
        else:
            start, step = 50.0, 1.0
    else:
        start, step = 0.75, 0.125
    # a start already beyond the target degenerates to a direct schedule
    if (mode == "ratio" and start > target) or (mode == "bpp" and start < target):
        start = target
    if mode == "quality":
        better = codec.external is None or codec.external.higher_is_better
        if (better and start < target) or (not better and start > target):
            start = target
    return RateSchedule(mode, start, target, step)


def default_alpha(codec: CodecHandle) -> float:
    return ALPHA_DEFAULTS[codec.family]


@dataclass
class RunConfig:
    codec: CodecHandle
    schedule: RateSchedule
    lam: float = 65.0
    alpha: float | None = None
    sigma: float = DEFAULT_SIGMA
    flow: FlowParams | None = None
    max_iterations: int = 500
    constant_w_metric: bool = False

    def flow_params(self) -> FlowParams:
        fp = self.flow or FlowParams()
        return dataclasses.replace(fp, lam=self.lam)

    def resolved_alpha(self) -> float:
        return default_alpha(self.codec) if self.alpha is None else self.alpha

    def to_dict(self) -> dict:
        codec = {"kind": self.codec.kind, "levels": self.codec.levels}
        if self.codec.external is not None:
            codec["external"] = dataclasses.asdict(self.codec.external)
        return {
            "codec": codec,
            "schedule": dataclasses.asdict(self.schedule),
            "lambda": self.lam,
            "alpha": self.resolved_alpha(),
            "sigma": self.sigma,
            "flow": dataclasses.asdict(self.flow_params()),
            "max_iterations": self.max_iterations,
            "constant_w_metric": self.constant_w_metric,
        }


@dataclass
class TraceRecord:
    iteration: int
    budget: float
    achieved_rate: float
    ssd: float
    compression_error: float
    energy: float
    dassd: float


@dataclass
class RunResult:
    deformed: np.ndarray
    compressed: np.ndarray
    flow: FlowField
    report: MetricsReport
    trace: list = field(default_factory=list)
    weights: WeightMap | None = None
    ssd_to_deformed: float = 0.0
    codec_parameter: float = 0.0


def _report(y, compressed, result: CompressResult, w, params, init=None, iterations=0):
    d = dassd(compressed, y, w, params, init=init)
    return MetricsReport(
        ssd=d.ssd,
        psnr=psnr(d.ssd, y.size),
        dassd=d.dassd,
        flow_penalty=d.flow_penalty,
        achieved_rate=result.achieved_rate,
        iterations=iterations,
    )


def run(y, cfg: RunConfig) -> RunResult:
    y = as_image(y)
    params = cfg.flow_params()
    values = cfg.schedule.values()
    if len(values) > cfg.max_iterations:
        raise ValueError(
            f"schedule needs {len(values)} iterations to reach the target, "
            f"more than max_iterations={cfg.max_iterations}"
        )
    weights = build_weight_map(y, cfg.resolved_alpha(), cfg.sigma)
    w = weights.weights
    mu = effective_lambda(cfg.lam)
    flow = FlowField.identity(y.shape)
    trace = []
    for i, eps in enumerate(values):
        deformed = warp(y, flow)
        res = compress_to_budget(cfg.codec, deformed, Budget(cfg.schedule.mode, eps))
        x = res.decoded
        comp_err = ssd(x, deformed)
        joint = comp_err + mu * smoothness(flow.u, flow.v, w)
        flow = estimate_flow(y, x, w, params, init=flow)
        e = flow_energy(y, x, flow, w, cfg.lam).total
        trace.append(TraceRecord(i, eps, res.achieved_rate, ssd(x, y), comp_err, joint, e))
        log.info("iter %3d  budget %-8g rate %.5f  ssd %.4f  dassd %.4f",
                 i, eps, res.achieved_rate, trace[-1].ssd, e)

    deformed = warp(y, flow)
    res = compress_to_budget(cfg.codec, deformed, Budget(cfg.schedule.mode, cfg.schedule.target))
    compressed = res.decoded
    w_metric = None if cfg.constant_w_metric else w
    report = _report(y, compressed, res, w_metric, params, init=flow, iterations=len(values) + 1)
    comp_err = ssd(compressed, deformed)
    trace.append(TraceRecord(
        len(values), cfg.schedule.target, res.achieved_rate, report.ssd, comp_err,
        comp_err + mu * smoothness(flow.u, flow.v, w), report.dassd,
    ))
    log.info("final  budget %-8g rate %.5f  ssd %.4f  dassd %.4f",
             cfg.schedule.target, res.achieved_rate, report.ssd, report.dassd)
    return RunResult(deformed, compressed, flow, report, trace, weights, comp_err, res.codec_parameter)


def baseline(y, codec: CodecHandle, budget: Budget, w=None, params: FlowParams | None = None):
    """Plain compression of ``y``; returns ``(compressed, report)``."""
    y = as_image(y)
    res = compress_to_budget(codec, y, budget)
    return res.decoded, _report(y, res.decoded, res, w, params or FlowParams(), iterations=1)


def report_dict(cfg: RunConfig, result: RunResult, baseline_report: MetricsReport | None = None,
                timestamp: bool = True) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "metrics": result.report.to_dict(),
        "ssd_to_deformed": result.ssd_to_deformed,
        "codec_parameter": result.codec_parameter,
        "max_flow_magnitude": float(result.flow.magnitude().max()),
        "trace": [dataclasses.asdict(r) for r in result.trace],
    }
    if baseline_report is not None:
        out["baseline"] = baseline_report.to_dict()
    if timestamp:
        out["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return out


def write_report(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
