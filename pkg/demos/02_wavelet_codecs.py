"""The two built-in Haar codecs.

Both keep a fixed number of coefficients, so a ratio N:1 means one
coefficient in N survives.  The global codec keeps the largest magnitudes
anywhere.  The subband codec shares the budget out between subbands in
proportion to their energy and thresholds inside each one.
"""
import numpy as np

from dacomp import ThresholdBudget, compress_global_threshold, compress_subband_threshold, dwt_forward, dwt_inverse
from dacomp.fixtures import curved_strokes

y = curved_strokes()
pyr = dwt_forward(y, 4)
print(f"perfect reconstruction error: {np.abs(dwt_inverse(pyr) - y).max():.2e}")
print(f"energy preserved: {np.sum(pyr.to_vector() ** 2):.6f} vs {np.sum(y ** 2):.6f}")

print(f"\n{'ratio':>6}{'kept':>7}{'global ssd':>12}{'subband ssd':>13}")
for ratio in (5, 10, 20, 40, 80):
    b = ThresholdBudget.from_ratio(ratio)
    g = compress_global_threshold(y, b, 4)
    s = compress_subband_threshold(y, b, 4)
    print(f"{ratio:>6}{b.kept_count(y.size):>7}{np.sum((g - y) ** 2):>12.3f}{np.sum((s - y) ** 2):>13.3f}")

# the global codec is optimal for a fixed count, which Parseval makes easy to verify
b = ThresholdBudget.from_ratio(40)
mags = np.sort(np.abs(pyr.to_vector()))[::-1]
dropped = np.sum(mags[b.kept_count(y.size):] ** 2)
print(f"\nglobal 40:1 error {np.sum((compress_global_threshold(y, b, 4) - y) ** 2):.6f}, "
      f"energy of dropped coefficients {dropped:.6f}")
