"""Four thresholding methods vote on vessel pixels inside one window.

Each method splits the local histogram on its own criterion; pixels carried
by at least two of the four form the consensus mask, and the tight box
fitted to that mask replaces the loose hand annotation.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from rawsea.labeler import (consensus, fit_bbox, threshold_isodata,
                            threshold_li, threshold_mean, threshold_otsu)
from rawsea.synthetic import SceneSpec, make_scene

OUT = pathlib.Path(__file__).parent / "out" / "threshold_consensus"
OUT.mkdir(parents=True, exist_ok=True)

scene = make_scene(seed=3, spec=SceneSpec(width=256, height=256,
                                          n_vessels=(4, 5)))
band = scene.granule.band("B05")
truth = scene.boxes[0]

# a deliberately sloppy annotation: right vessel, wrong extent
coarse = truth.expand(6.0)
win = coarse.expand(4.0).clamp(band.data.shape[1], band.data.shape[0])
patch = band.data[int(win.y_min):int(win.y_max),
                  int(win.x_min):int(win.x_max)]

results = [threshold_otsu(patch), threshold_li(patch),
           threshold_isodata(patch), threshold_mean(patch)]
for r in results:
    fg = int(r.mask.sum())
    print(f"{r.method.value:8s} t = {r.t:7.1f} DN   foreground {fg:4d} px")

vote = consensus(results)
print(f"consensus (2 of 4):        foreground {int(vote.mask.sum()):4d} px")

refined = fit_bbox(coarse, band)
print(f"truth   {truth}")
print(f"coarse  {coarse}")
print(f"refined {refined}")

# ------------------------------------------------------------ picture
fig, axs = plt.subplots(2, 3, figsize=(9, 6))
axs[0, 0].imshow(patch, cmap="gray")
axs[0, 0].set_title("window")
for ax, r in zip(axs.flat[1:5], results):
    ax.imshow(r.mask, cmap="gray")
    ax.set_title(f"{r.method.value} (t={r.t:.0f})")
axs[1, 2].imshow(vote.votes, cmap="viridis", vmin=0, vmax=4)
axs[1, 2].set_title("votes")
for ax in axs.flat:
    ax.axis("off")
fig.tight_layout()
fig.savefig(OUT / "consensus.png", dpi=120)
print(f"wrote {OUT / 'consensus.png'}")
