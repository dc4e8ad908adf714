"""
A tour of the feature pyramid attention module
==============================================

Builds the 2D and 3D variants on the same feature map, prints the pyramid
extents each one walks through, and looks at the attention mask it produces.
Run with ``python demos/fpa_tour.py``.
"""
import warnings

import numpy as np

from fpa3d.fpa import FpaConfig, fpa_build, fpa_forward, level_extents

warnings.simplefilter("ignore")  # small maps trigger the coarse-level warning

# A batch of two feature maps: 4 channels, 12 frames, 16x16 pixels.
x = np.random.default_rng(0).standard_normal((2, 4, 12, 16, 16)).astype(np.float32)

# The 2D variant only halves space, so every level keeps all 12 frames.
# The 3D variant halves time as well (ceil division, so odd sizes are fine).
for variant in ("2d", "3d"):
    cfg = FpaConfig(variant)
    print(f"{cfg.variant:18s} kernel={cfg.kernel_size} stride={cfg.stride}")
    print("   levels:", level_extents(cfg, x.shape[2:]))

# Forward pass in eval mode. The output keeps the input shape and each element
# is scaled by a sigmoid gate, so |y| <= |x| everywhere.
m = fpa_build(FpaConfig("3d"), x.shape[1], init_seed=1)
y, cache = fpa_forward(m, x, "eval")
assert y.shape == x.shape and np.all(np.abs(y) <= np.abs(x))
print("\nmask range  :", float(cache.mask.min()), "..", float(cache.mask.max()))
print("mask mean   :", float(cache.mask.mean()))
print("fused levels:", cache.fused_extents)

# Per-frame mask energy shows the temporal structure the 3D pyramid adds.
per_frame = cache.mask[0].mean(axis=(0, 2, 3))
print("mask mean per frame:", np.round(per_frame, 3))

# With every weight zeroed the fusion path outputs 0, sigmoid(0) = 0.5, and
# the module halves its input exactly.
for _, p in m.named_parameters():
    p[...] = 0.0
for _, u in m.units():
    u.conv.bias[...] = 0.0
y0, _ = fpa_forward(m, x, "eval")
print("\nzero weights give 0.5 * x exactly:", np.array_equal(y0, np.float32(0.5) * x))
print("trainable parameters:", sum(p.size for _, p in m.named_parameters()))
