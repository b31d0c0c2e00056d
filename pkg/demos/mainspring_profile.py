"""Export a mainspring profile for fabrication.

The spring leaves the axle at radius R0 and winds outward to R1 over N
turns as an Archimedean spiral. The literal printed parametrisation starts
at (R1, R1) instead of on the axle; it is shown for comparison.

Run with ``python3 demos/mainspring_profile.py [output_dir]``.
"""

import sys
from pathlib import Path

import numpy as np

from rotaphantom import (SpiralSpec, archimedean_length, export_svg, polyline_length,
                         spiral_polyline)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

spec = SpiralSpec(R0=0.003, R1=0.020, N=5)
pts = spiral_polyline(spec)
r = np.hypot(pts[:, 0], pts[:, 1])
print(f"radius runs from {r[0] * 1000:.3f} mm to {r[-1] * 1000:.3f} mm over {spec.N} turns")

# %% Strip length: polyline against the closed form
print(f"polyline length {polyline_length(pts) * 1000:.3f} mm, "
      f"closed form {archimedean_length(spec) * 1000:.3f} mm")

literal = spiral_polyline(spec, corrected=False)
print(f"printed form starts at ({literal[0, 0] * 1000:.1f}, {literal[0, 1] * 1000:.1f}) mm")

(out / "mainspring.svg").write_text(export_svg(pts, stroke_mm=0.5))
print(f"profile written to {out / 'mainspring.svg'}")
