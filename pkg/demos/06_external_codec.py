"""Driving a command-line codec.

Any encoder that takes an input file, an output file and a quality value
can be plugged in through a shell template.  Here the encoder is a one-line
Python quantizer, so the demo needs nothing beyond this package.  Swap in
e.g. ``cjpeg -quality {q} -outfile {out} {in}`` with ``djpeg -outfile {out} {in}``
for a real codec.
"""
import shlex
import sys
import textwrap

import numpy as np

from dacomp import Budget, compress_to_budget, external, probe_external
from dacomp.fixtures import curved_strokes

# quantize to q levels and store with zlib; decoding inverts that
quant = textwrap.dedent("""
    import sys, zlib, cv2, numpy as np
    mode, src, dst = sys.argv[1:4]
    if mode == "enc":
        q = int(sys.argv[4]); img = cv2.imread(src, cv2.IMREAD_GRAYSCALE)
        lv = np.round(img / 255 * (q - 1)).astype(np.uint8)
        open(dst, "wb").write(bytes([q]) + img.shape[0].to_bytes(2, "little") + zlib.compress(lv.tobytes(), 9))
    else:
        raw = open(src, "rb").read(); q, h = raw[0], int.from_bytes(raw[1:3], "little")
        lv = np.frombuffer(zlib.decompress(raw[3:]), np.uint8).reshape(h, -1)
        cv2.imwrite(dst, np.round(lv / (q - 1) * 255).astype(np.uint8))
""")
py = shlex.quote(sys.executable)
codec = external(f"{py} -c {shlex.quote(quant)} enc {{in}} {{out}} {{q}}",
                 f"{py} -c {shlex.quote(quant)} dec {{in}} {{out}}", q_min=2, q_max=64)

y = curved_strokes()
for q in (2, 8, 64):
    dec, nbytes = probe_external(codec, y, q)
    print(f"q = {q:>2}: {nbytes * 8 / y.size:.3f} bpp, ssd {np.sum((dec - y) ** 2):.3f}")

res = compress_to_budget(codec, y, Budget("bpp", 1.0))
print(f"\nbest parameter under 1 bpp: q = {res.codec_parameter:g} at {res.achieved_rate:.3f} bpp")
