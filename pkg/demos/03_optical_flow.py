"""Estimating the flow that warps one image onto another.

The solver minimizes a weighted data term plus a smoothness term,
coarse to fine, with Gauss-Newton steps that never increase the energy.
"""
import numpy as np
from scipy import ndimage

from dacomp import FlowParams, estimate_flow, flow_gradient_check, warp
from dacomp.warp import FlowField

rng = np.random.default_rng(1)
y = ndimage.gaussian_filter(rng.random((48, 48)), 2.5)
y = (y - y.min()) / (y.max() - y.min())

# a smooth rotation-like deformation applied to y
rows, cols = np.mgrid[:48, :48] - 23.5
true = FlowField(-0.04 * rows, 0.04 * cols)
x = warp(y, true)

history = []
flow = estimate_flow(y, x, None, FlowParams(), history=history)
finest = [e for level, _, e in history if level == 0]
print("finest-level energy:", " -> ".join(f"{e:.4f}" for e in finest))

inner = (slice(6, -6), slice(6, -6))
err = np.hypot(flow.u - true.u, flow.v - true.v)[inner]
print(f"endpoint error inside the border: mean {err.mean():.3f} px, max {err.max():.3f} px "
      f"(true flow up to {np.hypot(true.u, true.v).max():.2f} px)")
print(f"ssd(warp(y), x): {np.sum((warp(y, flow) - x) ** 2):.4f} vs {np.sum((x - y) ** 2):.4f} without the flow")

# the analytic gradient agrees with finite differences
crop = (slice(12, 36), slice(12, 36))
probe = FlowField(flow.u[crop], flow.v[crop])
print(f"gradient check, relative error: {flow_gradient_check(y[crop], x[crop], probe, None, 65.0):.2e}")
