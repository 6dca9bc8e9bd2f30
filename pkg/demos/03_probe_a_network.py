"""
Probing a CNN with tagged frames
================================

Drive a random-weight CIFAR-style residual network with one tagged image
sequence and look at what individual filters do in the frequency domain:
harmonics of one tag mean the filter follows that half of the image,
intermodulation products mean it combines both.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from freqtag import (TaggingConfig, collect_traces, default_half_mask,
                     enumerate_components, load_model, tag_image_sequence)
from freqtag.fixtures import gradient_image, resnet32_random
from freqtag.spectra import amplitude_spectra

out_dir = Path(__file__).parent / "_out" / "03"
out_dir.mkdir(parents=True, exist_ok=True)

# %%
# Build the 31-tapped-layer fixture (He-init weights, identity batchnorm).
doc, store = resnet32_random(seed=7)
model = load_model(doc, store)
print(f"model fingerprint: {model.fingerprint[:16]}..., "
      f"{len(model.filter_inventory())} filters across {len(model.taps)} layers")

# %%
# Tag one image and collect every filter's activation trace (the per-frame
# mean of its feature map, zeros excluded).
cfg = TaggingConfig()
seq = tag_image_sequence(gradient_image(), default_half_mask(32, 32), cfg)
traces = collect_traces(model, seq)
matrix = np.stack([t.values for t in traces])
amps = amplitude_spectra(matrix, cfg.fps)
print(f"traces: {matrix.shape}, spectra: {amps.shape}")

# %%
# Plot a handful of filters from layer 1 and a deeper layer. Even with random
# weights the rectifying nonlinearity locks filters to the tag structure:
# the spectral support stays on multiples of gcd(6, 7.5) = 1.5 Hz.
comps = enumerate_components(6.0, 7.5, 4, cfg.delta_f, cfg.fps / 2)
freqs = np.arange(amps.shape[1]) * cfg.delta_f
alive = amps[:, 1:].max(axis=1) > 1e-9
picks = ([i for i in range(len(traces)) if traces[i].layer == 1 and alive[i]][:2]
         + [i for i in range(len(traces)) if traces[i].layer == 10 and alive[i]][:2])
fig, axes = plt.subplots(len(picks), 1, figsize=(9, 2.2 * len(picks)),
                         sharex=True)
for ax, i in zip(axes, picks):
    ax.stem(freqs, amps[i], basefmt=" ", markerfmt=".")
    for c in comps:
        ax.axvline(c.frequency, color="0.9", lw=0.5, zorder=0)
    ax.set(ylabel="amplitude", xlim=(0.2, 31),
           title=f"layer {traces[i].layer}, channel {traces[i].channel}")
    ax.set_yscale("log")
axes[-1].set(xlabel="frequency [Hz]")
fig.tight_layout()
fig.savefig(out_dir / "filter_spectra.png", dpi=120)
print("wrote filter_spectra.png")

# %%
# Quantify the lattice claim across every live filter for this image.
ac = amps[:, 1:]
live = ac.max(axis=1) > 1e-9 * np.maximum(amps.max(axis=1), 1e-30)
peaks = ac.argmax(axis=1) + 1
on_lattice = (peaks % 3 == 0)[live]
print(f"live filters: {live.sum()}/{len(live)}; "
      f"peak on the 1.5 Hz lattice: {on_lattice.mean():.1%}")
