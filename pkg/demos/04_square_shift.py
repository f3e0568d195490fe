"""A tiny shift can compress far better, and DASSD notices.

A square sits 2 px from the Haar block grid in one image and on it in the
other.  At 160:1 the aligned copy survives almost exactly, the other is
smeared.  Judged against the original, SSD prefers the smeared copy while
DASSD prefers the shifted but sharp one.
"""
from dacomp import Budget, build_weight_map, builtin, compress_to_budget, dassd, ssd
from dacomp.fixtures import SQUARE_RATIO, square_pair

y, ys = square_pair()
codec, budget = builtin("subband"), Budget("ratio", SQUARE_RATIO)
ca = compress_to_budget(codec, y, budget).decoded
cb = compress_to_budget(codec, ys, budget).decoded

print(f"error to own input: original {ssd(ca, y):.4f}, shifted {ssd(cb, ys):.2e}")

w = build_weight_map(y, 3.0)
print(f"\n{'compared to original':<24}{'ssd':>9}{'dassd':>11}")
for name, c in [("compressed original", ca), ("compressed shifted", cb)]:
    print(f"{name:<24}{ssd(c, y):>9.3f}{dassd(c, y, w).dassd:>11.2e}")
