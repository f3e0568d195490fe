import functools
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from dacomp import codec as codecs
from dacomp.codec import (Budget, BudgetInfeasible, CodecError, CodecHandle, ExternalSpec, builtin,
                          compress_at_quality, compress_to_budget, probe_external, rate_ok)
from dacomp.wavelet import ThresholdBudget, compress_global_threshold, compress_subband_threshold

from conftest import mock_codec

IMG = np.random.default_rng(0).integers(0, 256, (16, 16)) / 255.0
Q_MAX = 40


@functools.lru_cache(maxsize=None)
def _scan(mode, higher_is_better=True):
    """Encoded rate of every parameter, probed once per mode."""
    codec = mock_codec(mode, q_max=Q_MAX, higher_is_better=higher_is_better)
    return codec, {q: probe_external(codec, IMG, q)[1] * 8 / IMG.size
                   for q in codec.external.best_to_worst()}


def _scan_oracle(mode, target_bpp, higher_is_better=True):
    """Best feasible parameter by exhaustive scan, best first."""
    codec, rates = _scan(mode, higher_is_better)
    for q in codec.external.best_to_worst():
        if rates[q] <= target_bpp:
            return q
    return None


def test_identity_mock_round_trips(mock):
    decoded, nbytes = probe_external(mock("identity"), IMG, 50)
    np.testing.assert_allclose(decoded, IMG, atol=0.5 / 255 + 1e-12)
    assert nbytes == 12 + IMG.size


def test_identity_without_decode_template(tmp_path):
    py = shlex.quote(sys.executable)
    enc = f"{py} -c \"import shutil,sys; shutil.copy(sys.argv[1], sys.argv[2])\" {{in}} {{out}} # {{q}}"
    codec = codecs.external(enc, None, out_ext="png")
    decoded, _ = probe_external(codec, IMG, 1)
    np.testing.assert_allclose(decoded, IMG, atol=0.5 / 255 + 1e-12)


def test_fixed_size_mock_bytes(mock):
    _, nbytes = probe_external(mock("fixed"), IMG, 10)
    assert nbytes == 1000


def test_fixed_size_budget_infeasible(mock):
    with pytest.raises(BudgetInfeasible, match="budget infeasible") as err:
        compress_to_budget(mock("fixed"), IMG, Budget("bpp", 10.0))
    assert err.value.smallest_rate == pytest.approx(1000 * 8 / IMG.size)


@pytest.mark.parametrize("target", [2.3, 5.0, 7.1, 11.9, 12.0, 50.0])
def test_bisection_matches_exhaustive_scan(target):
    codec = _scan("monotone")[0]
    res = compress_to_budget(codec, IMG, Budget("bpp", target))
    assert res.codec_parameter == _scan_oracle("monotone", target)
    assert res.achieved_rate <= target


@pytest.mark.parametrize("target", [17.3, 20.0, 25.5, 27.0])
def test_bisection_lower_is_better(target):
    # rate is 2 + 0.25 * (101 - q) bpp, best quality at low q; 17.25 at q = 40
    codec = _scan("inverse", False)[0]
    res = compress_to_budget(codec, IMG, Budget("bpp", target))
    assert res.codec_parameter == _scan_oracle("inverse", target, False)


def test_bisection_probe_count(mock, monkeypatch):
    calls = []
    real = codecs.probe_external

    def counting(codec, img, q):
        calls.append(q)
        return real(codec, img, q)

    monkeypatch.setattr(codecs, "probe_external", counting)
    compress_to_budget(mock("monotone", q_min=1, q_max=1000), IMG, Budget("bpp", 100.0))
    assert len(calls) <= codecs.MAX_PROBES
    assert len(set(calls)) == len(calls)


def test_non_monotone_still_feasible_and_full_scan_optimal(mock):
    # at q = 37 the size dips to 64 + 8*37 - 40 = 320 bytes = 10.0 bpp
    codec = mock("bumpy", q_max=45)
    res = compress_to_budget(codec, IMG, Budget("bpp", 10.0))
    assert res.achieved_rate <= 10.0
    full = compress_to_budget(mock("bumpy", q_max=45, full_scan=True), IMG, Budget("bpp", 10.0))
    assert full.codec_parameter == 37


def test_ratio_budget_in_bpp(mock):
    b = Budget("ratio", 4.0)
    assert b.bpp_for(IMG) == 2.0
    assert b.bpp_for(np.zeros((4, 4, 3))) == 6.0
    # the monotone mock needs at least (64 + 8) bytes, i.e. 2.25 bpp
    with pytest.raises(BudgetInfeasible) as err:
        compress_to_budget(mock("monotone"), IMG, b)
    assert err.value.smallest_rate == 2.25
    res = compress_to_budget(mock("monotone"), IMG, Budget("ratio", 0.5))
    assert res.codec_parameter == 56 and res.achieved_rate <= 16.0  # 2 + 0.25 * 56 = 16


def test_quality_mode_passes_parameter(mock):
    res = compress_to_budget(mock("monotone"), IMG, Budget("quality", 7))
    assert res.codec_parameter == 7
    assert res.achieved_rate == (64 + 8 * 7) * 8 / IMG.size
    assert compress_at_quality(mock("monotone"), IMG, 7).achieved_rate == res.achieved_rate


def test_failure_carries_stderr(mock):
    with pytest.raises(CodecError, match="status 1.*simulated failure"):
        probe_external(mock("fail"), IMG, 5)


def test_missing_output(mock):
    with pytest.raises(CodecError, match="no output file"):
        probe_external(mock("silent"), IMG, 5)


def test_unreadable_output():
    py = shlex.quote(sys.executable)
    enc = f"{py} -c \"open(__import__('sys').argv[1], 'wb').write(b'junk')\" {{out}} # {{in}} {{q}}"
    with pytest.raises(CodecError, match="unreadable"):
        probe_external(codecs.external(enc, None, out_ext="png"), IMG, 5)


def test_timeout():
    py = shlex.quote(sys.executable)
    enc = f"{py} -c \"import time; time.sleep(5)\" # {{in}} {{out}} {{q}}"
    with pytest.raises(CodecError, match="timed out"):
        probe_external(codecs.external(enc, None, timeout=0.5), IMG, 5)


def test_template_validation():
    with pytest.raises(ValueError, match=r"\{q\}"):
        ExternalSpec("enc {in} {out}")
    with pytest.raises(ValueError, match=r"\{out\}"):
        ExternalSpec("enc {in} {out} {q}", "dec {in}")
    with pytest.raises(ValueError):
        CodecHandle("external")
    with pytest.raises(ValueError):
        CodecHandle("jpeg")
    assert ExternalSpec("e {in} {out} {q}").timeout == 60.0


def test_paths_with_spaces(mock, tmp_path):
    work = tmp_path / "dir with space"
    work.mkdir()
    decoded, _ = probe_external(mock("identity", workdir=str(work)), IMG, 1)
    assert decoded.shape == IMG.shape
    assert list(work.iterdir()) == []


def test_concurrent_calls_are_independent(mock):
    codec = mock("monotone", q_max=Q_MAX)
    imgs = [np.random.default_rng(s).random((16, 16)) for s in range(4)]
    with ThreadPoolExecutor(4) as pool:
        out = list(pool.map(lambda im: compress_to_budget(codec, im, Budget("bpp", 12.3)), imgs))
    for im, res in zip(imgs, out):
        solo = compress_to_budget(codec, im, Budget("bpp", 12.3))
        assert np.array_equal(res.decoded, solo.decoded)


@pytest.mark.parametrize("kind,fn", [("global", compress_global_threshold),
                                     ("subband", compress_subband_threshold)])
def test_builtin_dispatch_is_exact(kind, fn):
    img = np.random.default_rng(1).random((32, 32))
    res = compress_to_budget(builtin(kind), img, Budget("ratio", 10))
    assert np.array_equal(res.decoded, fn(img, ThresholdBudget.from_ratio(10), 4))
    assert res.achieved_rate <= 0.1 + 1 / img.size
    assert rate_ok(res, Budget("ratio", 10), img, builtin(kind))


def test_builtin_lossless():
    img = np.random.default_rng(2).random((16, 16))
    res = compress_to_budget(builtin("global"), img, Budget("ratio", 1))
    np.testing.assert_allclose(res.decoded, img, atol=1e-9, rtol=0)
    with pytest.raises(ValueError):
        compress_to_budget(builtin("global"), img, Budget("bpp", 1))


def test_budget_validation():
    with pytest.raises(ValueError):
        Budget("ratio", 0)
    with pytest.raises(ValueError):
        Budget("dB", 3)
