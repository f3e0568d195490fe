"""Uniform compress-to-budget interface over built-in and external codecs.

External codecs are driven through shell command templates.  The encode
template must contain ``{in}``, ``{out}`` and ``{q}``: it reads the image
written to ``{in}`` and writes the bitstream to ``{out}`` at quality
parameter ``{q}``.  An optional decode template (``{in}`` = bitstream,
``{out}`` = decoded PNG, or PGM/PPM with ``decoded_ext``) turns the bitstream
back into an image; without
one, the bitstream itself is read with OpenCV, which covers JPEG, WebP and
usually JPEG 2000.

Example templates::

    cjpeg -quality {q} {in} > {out}                      # in_ext=ppm
    cwebp -quiet -q {q} {in} -o {out}                    # decode: dwebp {in} -o {out}
    opj_compress -i {in} -o {out} -r {q}                 # out_ext=j2k, higher q = lower quality
"""
from __future__ import annotations

import logging
import math
import os
import shlex
import subprocess
import tempfile
import uuid
from dataclasses import dataclass

import cv2
import numpy as np

from .image import ImageIOError, as_image, load_image, save_image
from .wavelet import DEFAULT_LEVELS, ThresholdBudget, global_threshold, subband_threshold

log = logging.getLogger(__name__)

KINDS = ("global", "subband", "external")
MAX_PROBES = 20


class CodecError(RuntimeError):
    """An external codec failed or produced unusable output."""


class BudgetInfeasible(CodecError):
    def __init__(self, budget: float, smallest_rate: float):
        super().__init__(
            f"budget infeasible: requested {budget:.6g}, smallest achievable rate {smallest_rate:.6g}"
        )
        self.budget = budget
        self.smallest_rate = smallest_rate


@dataclass(frozen=True)
class ExternalSpec:
    encode: str
    decode: str | None = None
    q_min: int = 1
    q_max: int = 100
    higher_is_better: bool = True
    in_ext: str = "png"
    out_ext: str = "bin"
    decoded_ext: str = "png"
    workdir: str | None = None
    timeout: float = 60.0
    full_scan: bool = False
    family: str = "jpeg2000"

    def __post_init__(self):
        for key in ("{in}", "{out}", "{q}"):
            if key not in self.encode:
                raise ValueError(f"encode template lacks the {key} placeholder: {self.encode!r}")
        if self.decode is not None:
            for key in ("{in}", "{out}"):
                if key not in self.decode:
                    raise ValueError(f"decode template lacks the {key} placeholder: {self.decode!r}")
        if self.decoded_ext.lower() not in ("png", "pgm", "ppm", "pnm"):
            raise ValueError(f"decoded_ext must be png, pgm, ppm or pnm, not {self.decoded_ext!r}")
        if self.q_min > self.q_max:
            raise ValueError("q_min must not exceed q_max")

    def best_to_worst(self) -> range:
        if self.higher_is_better:
            return range(self.q_max, self.q_min - 1, -1)
        return range(self.q_min, self.q_max + 1)


@dataclass(frozen=True)
class CodecHandle:
    kind: str
    external: ExternalSpec | None = None
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown codec kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "external" and self.external is None:
            raise ValueError("external codec requires an ExternalSpec")

    @property
    def builtin(self) -> bool:
        return self.kind != "external"

    @property
    def family(self) -> str:
        """Codec family used to pick the default regularization strength."""
        return self.kind if self.builtin else self.external.family


@dataclass
class CompressResult:
    decoded: np.ndarray
    achieved_rate: float
    codec_parameter: float


@dataclass(frozen=True)
class Budget:
    """A rate target.

    ``mode`` is ``ratio`` (N:1), ``bpp`` (bits per pixel) or ``quality``
    (codec parameter used verbatim, external codecs only).
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("ratio", "bpp", "quality"):
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if self.mode != "quality" and not self.value > 0:
            raise ValueError("budget must be > 0")

    def bpp_for(self, img: np.ndarray) -> float:
        """Bits per pixel implied by this budget for ``img``."""
        if self.mode == "bpp":
            return self.value
        if self.mode == "ratio":
            channels = 1 if img.ndim == 2 else img.shape[2]
            return 8.0 * channels / self.value
        raise ValueError("quality budgets have no bit rate")

    def threshold_budget(self) -> ThresholdBudget:
        if self.mode != "ratio":
            raise ValueError(f"built-in codecs take ratio budgets, not {self.mode}")
        return ThresholdBudget.from_ratio(self.value)


def _run(cmd: str, timeout: float, what: str) -> None:
    try:
        proc = subprocess.run(cmd, shell=True, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise CodecError(f"{what} timed out after {timeout:g} s: {cmd}") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode(errors="replace").strip()
        raise CodecError(f"{what} exited with status {proc.returncode}: {stderr}")


def _read_decoded(path: str) -> np.ndarray:
    ext = os.path.splitext(path)[1].lower()
    if ext in (".png", ".pgm", ".ppm", ".pnm"):
        return load_image(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"unreadable file: {path}")
    if raw.ndim == 3:
        raw = raw[:, :, 2::-1]
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    return raw.astype(np.float64) / scale


def probe_external(codec: CodecHandle, img, q) -> tuple[np.ndarray, int]:
    """Encode ``img`` at parameter ``q``; return ``(decoded, encoded_bytes)``."""
    spec = codec.external
    if spec is None:
        raise ValueError("probe_external needs an external codec")
    img = as_image(img)
    with tempfile.TemporaryDirectory(dir=spec.workdir) as work:
        stem = uuid.uuid4().hex
        src = os.path.join(work, f"{stem}.{spec.in_ext}")
        enc = os.path.join(work, f"{stem}.enc.{spec.out_ext}")
        save_image(img, src)
        _run(spec.encode.format_map({"in": shlex.quote(src), "out": shlex.quote(enc), "q": q}),
             spec.timeout, "encoder")
        if not os.path.isfile(enc):
            raise CodecError(f"encoder produced no output file for q={q}")
        nbytes = os.path.getsize(enc)
        if spec.decode is not None:
            dec = os.path.join(work, f"{stem}.dec.{spec.decoded_ext}")
            _run(spec.decode.format_map({"in": shlex.quote(enc), "out": shlex.quote(dec)}),
                 spec.timeout, "decoder")
            if not os.path.isfile(dec):
                raise CodecError(f"decoder produced no output file for q={q}")
        else:
            dec = enc
        try:
            decoded = _read_decoded(dec)
        except ImageIOError as exc:
            raise CodecError(f"codec output unreadable for q={q}: {exc}") from exc
    if decoded.shape != img.shape:
        if decoded.ndim == 2 and img.ndim == 3:
            decoded = np.repeat(decoded[:, :, None], 3, axis=2)
        elif decoded.ndim == 3 and img.ndim == 2:
            decoded = decoded @ np.array([0.299, 0.587, 0.114])
        if decoded.shape != img.shape:
            raise CodecError(f"decoded shape {decoded.shape} differs from input {img.shape}")
    return decoded, nbytes


def _bpp(nbytes: int, img: np.ndarray) -> float:
    return nbytes * 8.0 / (img.shape[0] * img.shape[1])


def _search_external(codec: CodecHandle, img: np.ndarray, target_bpp: float) -> CompressResult:
    """Highest-quality parameter whose encoded rate fits ``target_bpp``.

    Assumes size grows with quality.  Bisection over the parameter range
    ordered best-to-worst; ``full_scan`` probes every parameter instead.
    """
    spec = codec.external
    order = list(spec.best_to_worst())
    cache = {}

    def probe(i):
        if i not in cache:
            q = order[i]
            decoded, nbytes = probe_external(codec, img, q)
            cache[i] = (decoded, _bpp(nbytes, img), q)
            log.debug("probe q=%s -> %.4f bpp", q, cache[i][1])
        return cache[i]

    if spec.full_scan:
        for i in range(len(order)):
            if probe(i)[1] <= target_bpp:
                d, rate, q = probe(i)
                return CompressResult(d, rate, q)
        raise BudgetInfeasible(target_bpp, min(r for _, r, _ in cache.values()))

    worst = probe(len(order) - 1)
    if worst[1] > target_bpp:
        raise BudgetInfeasible(target_bpp, worst[1])
    if probe(0)[1] <= target_bpp:
        d, rate, q = probe(0)
        return CompressResult(d, rate, q)
    # invariant: order[lo] infeasible, order[hi] feasible
    lo, hi = 0, len(order) - 1
    while hi - lo > 1 and len(cache) < MAX_PROBES:
        mid = (lo + hi) // 2
        if probe(mid)[1] <= target_bpp:
            hi = mid
        else:
            lo = mid
    d, rate, q = probe(hi)
    return CompressResult(d, rate, q)


def compress_at_quality(codec: CodecHandle, img, q) -> CompressResult:
    """Run an external codec at a fixed quality parameter (no rate search)."""
    img = as_image(img)
    decoded, nbytes = probe_external(codec, img, q)
    return CompressResult(decoded, _bpp(nbytes, img), q)


def compress_to_budget(codec: CodecHandle, img, budget: Budget) -> CompressResult:
    """Compress ``img`` so its rate does not exceed ``budget``.

    Built-in codecs report the retained coefficient fraction as their rate;
    external codecs report encoded bits per pixel.
    """
    img = as_image(img)
    if codec.builtin:
        tb = budget.threshold_budget()
        fn = global_threshold if codec.kind == "global" else subband_threshold
        decoded, kept = fn(img, tb, codec.levels)
        return CompressResult(decoded, kept / img.size, tb.kept_fraction)
    if budget.mode == "quality":
        q = budget.value
        return compress_at_quality(codec, img, int(q) if float(q).is_integer() else q)
    return _search_external(codec, img, budget.bpp_for(img))


def builtin(kind: str, levels: int = DEFAULT_LEVELS) -> CodecHandle:
    return CodecHandle(kind, None, levels)


def external(encode: str, decode: str | None = None, **kwargs) -> CodecHandle:
    return CodecHandle("external", ExternalSpec(encode, decode, **kwargs))


def rate_ok(result: CompressResult, budget: Budget, img: np.ndarray, codec: CodecHandle) -> bool:
    if budget.mode == "quality":
        return True
    if codec.builtin:
        limit = budget.threshold_budget().kept_count(img.size)
        return round(result.achieved_rate * img.size) <= limit
    return result.achieved_rate <= budget.bpp_for(img) + 1e-12 * max(1.0, math.fabs(result.achieved_rate))
