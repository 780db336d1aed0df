"""Why plain IoU is too harsh on ship-sized boxes, in two pictures.

A 10 px vessel missed by 3 px loses most of its IoU even though the
detection is clearly right. SIoU raises the overlap to a power below one
for small boxes, which flattens the penalty; for large boxes the exponent
tends to 1 and SIoU falls back to IoU.
"""

import math
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from rawsea.metrics import ConfusionMatrix, iou, mcc, siou
from rawsea.raster import BBox

OUT = pathlib.Path(__file__).parent / "out" / "compare_box_metrics"
OUT.mkdir(parents=True, exist_ok=True)

# ------------------------------------------------------------ offset sweep
offsets = np.linspace(0.0, 10.0, 81)
sizes = [6.0, 10.0, 30.0, 120.0]

fig, axs = plt.subplots(1, 2, figsize=(10, 4))
for s in sizes:
    a = BBox(0, 0, s, s)
    vals_iou = [iou(a, BBox(dx, 0, s, s)) for dx in offsets * s / 10.0]
    vals_siou = [siou(a, BBox(dx, 0, s, s)) for dx in offsets * s / 10.0]
    axs[0].plot(offsets / 10.0, vals_iou, label=f"{s:.0f} px")
    axs[1].plot(offsets / 10.0, vals_siou, label=f"{s:.0f} px")
axs[0].set_title("IoU (size independent)")
axs[1].set_title("SIoU (lenient for small boxes)")
for ax in axs:
    ax.set_xlabel("offset / box size")
    ax.axhline(0.4, color="gray", lw=0.6, linestyle=":")
    ax.legend()
fig.tight_layout()
fig.savefig(OUT / "siou_vs_iou.png", dpi=120)
print(f"wrote {OUT / 'siou_vs_iou.png'}")

# ------------------------------------------------------------ worked case
a = BBox(0, 0, 10, 10)
b = BBox(5, 0, 10, 10)
print(f"half-overlapped 10 px boxes: iou {iou(a, b):.4f}"
      f"  siou {siou(a, b):.4f}")
big_a = BBox(0, 0, 500, 500)
big_b = BBox(250, 0, 500, 500)
print(f"half-overlapped 500 px boxes: iou {iou(big_a, big_b):.4f}"
      f"  siou {siou(big_a, big_b):.4f}  (converged)")

# ------------------------------------------------------------ mcc
cm = ConfusionMatrix.binary(tp=4, fp=1, fn=2, tn=3)
print(f"mcc for tp=4 fp=1 fn=2 tn=3: {mcc(cm):.4f}"
      f"  (exact 10/sqrt(600) = {10 / math.sqrt(600):.4f})")
