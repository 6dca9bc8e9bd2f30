"""Region-wise sinusoidal contrast tagging of images.

An image is split into labeled regions; each region flickers at its own
frequency by multiplying pixel values with a per-frame coefficient

    c_i = contrast_min + (contrast_max - contrast_min) * (sin(w_i) + 1) / 2
    w_i = 2*pi * f * i / fps + phase

so a 2-second run at 120 fps yields 240 frames whose left/right halves (by
default) pulse at 6.0 and 7.5 Hz. Coefficients stay within the configured
contrast range, untagged pixels pass through unchanged, and all tagged
frequencies are required to be coherent with the run length (f * duration
integral) so that each tag lands exactly on one spectral bin downstream.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNTAGGED = 0
REGION_LEFT = 1
REGION_RIGHT = 2

DEFAULT_REGION_FREQS = ((REGION_LEFT, 6.0), (REGION_RIGHT, 7.5))

_COHERENCE_TOL = 1e-9


@dataclass(frozen=True)
class TaggingConfig:
    """Timing, contrast range and region->frequency assignment for a run."""

    fps: float = 120.0
    duration: float = 2.0
    phase: float = 0.0
    contrast_min: float = 0.5
    contrast_max: float = 1.0
    region_freqs: tuple[tuple[int, float], ...] = DEFAULT_REGION_FREQS

    def __post_init__(self):
        object.__setattr__(self, "region_freqs",
                           tuple((int(r), float(f)) for r, f in self.region_freqs))
        if self.fps <= 0 or self.duration <= 0:
            raise ValueError("fps and duration must be positive")
        if self.frame_count < 1:
            raise ValueError("fps * duration must round to a positive frame count")
        if not 0.0 <= self.contrast_min < self.contrast_max <= 1.0:
            raise ValueError(
                f"need 0 <= contrast_min < contrast_max <= 1, got "
                f"[{self.contrast_min}, {self.contrast_max}]")
        if not self.region_freqs:
            raise ValueError("at least one (region, frequency) pair is required")
        regions = [r for r, _ in self.region_freqs]
        freqs = [f for _, f in self.region_freqs]
        if any(r <= UNTAGGED for r in regions):
            raise ValueError("region ids must be positive integers")
        if len(set(regions)) != len(regions):
            raise ValueError("region ids must be distinct")
        if len(set(freqs)) != len(freqs):
            raise ValueError("region frequencies must be pairwise distinct")
        for region, f in self.region_freqs:
            if f <= 0:
                raise ValueError(f"region {region}: frequency must be > 0, got {f}")
            if f >= self.fps / 2:
                raise ValueError(
                    f"region {region}: frequency {f} Hz violates Nyquist "
                    f"(fps/2 = {self.fps / 2} Hz)")
            cycles = f * self.duration
            if abs(cycles - round(cycles)) > _COHERENCE_TOL:
                raise ValueError(
                    f"region {region}: frequency {f} Hz is not coherent with "
                    f"duration {self.duration} s (f * duration = {cycles} is not "
                    f"an integer); it would leak across spectral bins")

    @property
    def frame_count(self) -> int:
        return int(round(self.fps * self.duration))

    @property
    def delta_f(self) -> float:
        """Spectral bin width of the resulting run, 1/duration in Hz."""
        return 1.0 / self.duration

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(f for _, f in self.region_freqs)

    def frequency_of(self, region: int) -> float:
        for r, f in self.region_freqs:
            if r == region:
                return f
        raise KeyError(f"no frequency configured for region {region}")

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "duration": self.duration,
            "phase": self.phase,
            "contrast_min": self.contrast_min,
            "contrast_max": self.contrast_max,
            "region_freqs": [[r, f] for r, f in self.region_freqs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaggingConfig":
        kwargs = dict(d)
        if "region_freqs" in kwargs:
            kwargs["region_freqs"] = tuple(
                (int(r), float(f)) for r, f in kwargs["region_freqs"])
        return cls(**kwargs)


@dataclass(frozen=True)
class RegionMask:
    """Per-pixel region labels; 0 (UNTAGGED) pixels are copied unmodified."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"mask labels must be 2-D (H, W), got {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("mask labels must be integers")
        if labels.min(initial=0) < 0:
            raise ValueError("mask labels must be >= 0")
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def regions(self) -> tuple[int, ...]:
        present = np.unique(self.labels)
        return tuple(int(r) for r in present if r != UNTAGGED)


def default_half_mask(width: int, height: int) -> RegionMask:
    """Left half (columns [0, width//2)) -> REGION_LEFT, the rest -> REGION_RIGHT."""
    if width < 2:
        raise ValueError(f"cannot split a {width}-pixel-wide image into halves")
    labels = np.full((height, width), REGION_RIGHT, dtype=np.int64)
    labels[:, : width // 2] = REGION_LEFT
    return RegionMask(labels)


def _coefficient_table(cfg: TaggingConfig) -> np.ndarray:
    """(n_regions, T) coefficients, row order matching cfg.region_freqs."""
    i = np.arange(cfg.frame_count, dtype=np.float64)
    freqs = np.array([f for _, f in cfg.region_freqs], dtype=np.float64)
    omega = 2.0 * np.pi * freqs[:, None] * i[None, :] / cfg.fps + cfg.phase
    span = cfg.contrast_max - cfg.contrast_min
    return cfg.contrast_min + span * (np.sin(omega) + 1.0) / 2.0


def contrast_coefficient(f: float, i: int, cfg: TaggingConfig) -> float:
    """Contrast coefficient for frequency f at frame index i."""
    if not 0 <= i < cfg.frame_count:
        raise ValueError(
            f"frame index {i} out of range [0, {cfg.frame_count})")
    omega = 2.0 * np.pi * f * i / cfg.fps + cfg.phase
    span = cfg.contrast_max - cfg.contrast_min
    return float(cfg.contrast_min + span * (np.sin(omega) + 1.0) / 2.0)


def coefficient_series(f: float, cfg: TaggingConfig) -> np.ndarray:
    """All frame_count coefficients for frequency f, as one vector."""
    i = np.arange(cfg.frame_count, dtype=np.float64)
    omega = 2.0 * np.pi * f * i / cfg.fps + cfg.phase
    span = cfg.contrast_max - cfg.contrast_min
    return cfg.contrast_min + span * (np.sin(omega) + 1.0) / 2.0


def _check_source_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"source image must be (H, W, 3), got {img.shape}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("source image values must lie in [0, 1]")
    return img


class FrameSequence:
    """The T tagged frames derived from one source image.

    Frames are computed on demand (seq[i], iteration) or all at once via
    materialize(); both paths read the same precomputed coefficient table, so
    lazy and eager access yield identical values.
    """

    def __init__(self, source: np.ndarray, mask: RegionMask, config: TaggingConfig):
        source = _check_source_image(source)
        if (mask.height, mask.width) != source.shape[:2]:
            raise ValueError(
                f"mask is {mask.height}x{mask.width} but image is "
                f"{source.shape[0]}x{source.shape[1]}")
        configured = {r for r, _ in config.region_freqs}
        unknown = set(mask.regions()) - configured
        if unknown:
            raise ValueError(
                f"mask labels {sorted(unknown)} have no configured frequency")
        source = source.copy()
        source.flags.writeable = False
        self.source = source
        self.mask = mask
        self.config = config
        # row 0 = untagged (coefficient 1 at every frame), row k = k-th region
        table = np.ones((len(config.region_freqs) + 1, config.frame_count))
        table[1:] = _coefficient_table(config)
        self._table = table
        index = np.zeros(mask.labels.shape, dtype=np.intp)
        for row, (region, _) in enumerate(config.region_freqs, start=1):
            index[mask.labels == region] = row
        self._region_row = index

    def __len__(self) -> int:
        return self.config.frame_count

    def __getitem__(self, i: int) -> np.ndarray:
        if not isinstance(i, (int, np.integer)):
            raise TypeError("frame index must be an integer")
        if not 0 <= i < len(self):
            raise IndexError(f"frame index {i} out of range [0, {len(self)})")
        coeff = self._table[self._region_row, i]
        return self.source * coeff[:, :, None]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def materialize(self) -> np.ndarray:
        """All frames as one (T, H, W, 3) array."""
        coeff = self._table[self._region_row]            # (H, W, T)
        return np.ascontiguousarray(
            self.source[None] * np.moveaxis(coeff, -1, 0)[:, :, :, None])


def tag_image_sequence(img: np.ndarray, mask: RegionMask,
                       cfg: TaggingConfig) -> FrameSequence:
    """Tag one source image: frame i scales each region r by c(f_r, i)."""
    return FrameSequence(img, mask, cfg)


# ---------------------------------------------------------------------------
# PNG dump (visual inspection only; the analysis path never round-trips PNGs)

def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(rgb: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as an 8-bit RGB PNG."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 array")
    h, w = rgb.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + rgb[y].tobytes() for y in range(h))
    return (b"\x89PNG\r\n\x1a\n"
            + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9))
            + _png_chunk(b"IEND", b""))


def quantize_frame(frame: np.ndarray) -> np.ndarray:
    """Map [0,1] floats to uint8 by value*255 rounded half away from zero."""
    return np.floor(np.asarray(frame) * 255.0 + 0.5).astype(np.uint8)


def write_frame_pngs(seq: FrameSequence, out_dir, prefix: str = "frame") -> list[Path]:
    """Dump every frame of a sequence as PNG files frame_0000.png, ..."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(seq):
        path = out_dir / f"{prefix}_{i:04d}.png"
        path.write_bytes(encode_png(quantize_frame(frame)))
        paths.append(path)
    return paths
