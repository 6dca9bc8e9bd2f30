"""One-sided amplitude spectra, harmonic/intermodulation targets, SNR and SNS.

Amplitude normalization is chosen so a coherently sampled unit sinusoid reads
1.0 at its bin: bin 0 = |X_0|/N, interior bins = 2|X_k|/N, bin N/2 = |X_{N/2}|/N.
No window is applied; coherent sampling is enforced upstream, so a rectangular
window is leakage-free by construction.

SNR at a bin is its amplitude divided by the mean amplitude of nearby
non-component bins (default offsets -2, -1, +1, +2); SNS is the amplitude minus
that baseline. Baseline candidates that are out of range or excluded (component
bins, DC) are replaced by the next farther bin on the same side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, BaselineError

DEFAULT_BASELINE_OFFSETS = (-2, -1, 1, 2)
BASELINE_EPSILON = 1e-12

HARMONIC_F1 = "harmonic_f1"
HARMONIC_F2 = "harmonic_f2"
INTERMODULATION = "intermodulation"

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum: N/2+1 bins, bin k at frequency k*delta_f."""

    amplitudes: np.ndarray
    delta_f: float
    sample_rate: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        if amps.ndim != 1 or amps.size < 2:
            raise ValueError("amplitudes must be a 1-D array of at least 2 bins")
        if np.any(amps < 0):
            raise ValueError("amplitudes must be non-negative")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def nbins(self) -> int:
        return self.amplitudes.size

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def frequency(self, bin_index: int) -> float:
        return bin_index * self.delta_f

    def frequencies(self) -> np.ndarray:
        return np.arange(self.nbins) * self.delta_f


def amplitude_spectrum(values, sample_rate: float) -> Spectrum:
    """One-sided amplitude spectrum of an even-length trace (N >= 4)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"trace must be 1-D, got shape {values.shape}")
    n = values.size
    if n < 4 or n % 2 != 0:
        raise ValueError(f"trace length must be even and >= 4, got {n}")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    amps = np.abs(np.fft.rfft(values)) / n
    amps[1:-1] *= 2.0
    return Spectrum(amplitudes=amps, delta_f=sample_rate / n,
                    sample_rate=float(sample_rate))


def amplitude_spectra(matrix, sample_rate: float) -> np.ndarray:
    """Row-wise one-sided amplitudes of a (traces, N) matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a (traces, N) matrix, got {matrix.shape}")
    n = matrix.shape[1]
    if n < 4 or n % 2 != 0:
        raise ValueError(f"trace length must be even and >= 4, got {n}")
    amps = np.abs(np.fft.rfft(matrix, axis=1)) / n
    amps[:, 1:-1] *= 2.0
    return amps


def bin_of_frequency(f: float, delta_f: float) -> int:
    """Bin index of a frequency; raises AlignmentError off the bin grid."""
    if delta_f <= 0:
        raise ValueError("delta_f must be positive")
    ratio = f / delta_f
    nearest = round(ratio)
    if abs(ratio - nearest) > _ALIGN_TOL:
        raise AlignmentError(
            f"{f} Hz does not fall on the {delta_f} Hz bin grid "
            f"(f/delta_f = {ratio})")
    return int(nearest)


@dataclass(frozen=True)
class Component:
    """A harmonic (n*f1 or m*f2) or intermodulation (|n*f1 +/- m*f2|) target."""

    frequency: float
    bin: int
    kind: str
    order: int
    n: int
    m: int


class ComponentSet:
    """Deduped target components, sorted by frequency."""

    def __init__(self, entries, f1, f2, max_order, delta_f, nyquist):
        self.entries = tuple(sorted(entries, key=lambda e: e.bin))
        self.f1 = f1
        self.f2 = f2
        self.max_order = max_order
        self.delta_f = delta_f
        self.nyquist = nyquist

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def bins(self) -> tuple[int, ...]:
        return tuple(e.bin for e in self.entries)

    def frequencies(self) -> tuple[float, ...]:
        return tuple(e.frequency for e in self.entries)

    def fundamentals(self) -> tuple[Component, ...]:
        return tuple(e for e in self.entries
                     if e.order == 1 and e.kind != INTERMODULATION)

    def of_kind(self, kind: str) -> tuple[Component, ...]:
        return tuple(e for e in self.entries if e.kind == kind)


_KIND_PRIORITY = {HARMONIC_F1: 0, HARMONIC_F2: 1, INTERMODULATION: 2}


def enumerate_components(f1: float, f2: float, max_order: int,
                         delta_f: float, nyquist: float) -> ComponentSet:
    """Harmonics n*f (n <= max_order) of both tags plus IMs |n*f1 +/- m*f2|
    with n, m >= 1 and n+m <= max_order; 0-Hz and >= Nyquist entries dropped;
    duplicates collapse to the lowest order (harmonics win order ties)."""
    if not isinstance(max_order, int) or max_order < 1:
        raise ValueError(f"max_order must be an integer >= 1, got {max_order}")
    f1, f2 = float(f1), float(f2)
    if f1 == f2:
        raise ValueError("the two tag frequencies must differ")
    for f in (f1, f2):
        if f <= 0:
            raise ValueError(f"tag frequency must be positive, got {f}")
        if f >= nyquist:
            raise ValueError(f"tag frequency {f} Hz is not below Nyquist {nyquist} Hz")
        bin_of_frequency(f, delta_f)  # alignment check

    candidates: list[Component] = []
    for n in range(1, max_order + 1):
        candidates.append(Component(n * f1, 0, HARMONIC_F1, n, n, 0))
    for m in range(1, max_order + 1):
        candidates.append(Component(m * f2, 0, HARMONIC_F2, m, 0, m))
    for n in range(1, max_order):
        for m in range(1, max_order - n + 1):
            candidates.append(Component(n * f1 + m * f2, 0, INTERMODULATION,
                                        n + m, n, m))
            diff = abs(n * f1 - m * f2)
            candidates.append(Component(diff, 0, INTERMODULATION, n + m, n, m))

    best: dict[int, Component] = {}
    for cand in candidates:
        if cand.frequency <= 0 or cand.frequency >= nyquist:
            continue
        b = bin_of_frequency(cand.frequency, delta_f)
        cand = Component(cand.frequency, b, cand.kind, cand.order, cand.n, cand.m)
        cur = best.get(b)
        if cur is None:
            best[b] = cand
            continue
        new_rank = (cand.order, _KIND_PRIORITY[cand.kind], cand.n, cand.m)
        cur_rank = (cur.order, _KIND_PRIORITY[cur.kind], cur.n, cur.m)
        if new_rank < cur_rank:
            best[b] = cand
    return ComponentSet(best.values(), f1=f1, f2=f2, max_order=max_order,
                        delta_f=delta_f, nyquist=nyquist)


def default_exclusion(components: ComponentSet) -> frozenset[int]:
    """Bins that must never serve as baseline: all component bins plus DC."""
    return frozenset(components.bins()) | {0}


def resolve_baseline_bins(nbins: int, bin_index: int, baseline_offsets,
                          exclusion) -> tuple[int, ...]:
    """Pick the baseline bins around a target.

    Each offset contributes the bin at bin_index+offset; candidates that are
    out of range, excluded, or already taken are replaced by the next farther
    bin on the same side (at most |offset|+2 extra steps). Fewer than two
    resolved bins raise BaselineError.
    """
    exclusion = frozenset(exclusion)
    chosen: list[int] = []
    for offset in sorted(baseline_offsets, key=lambda o: (abs(o), o)):
        if offset == 0:
            raise ValueError("baseline offsets must be nonzero")
        step = 1 if offset > 0 else -1
        for extra in range(abs(offset) + 3):
            cand = bin_index + offset + step * extra
            if 0 <= cand < nbins and cand not in exclusion and cand not in chosen:
                chosen.append(cand)
                break
    if len(chosen) < 2:
        raise BaselineError(
            f"only {len(chosen)} usable baseline bins around bin {bin_index}")
    return tuple(sorted(chosen))


def _baseline(spectrum: Spectrum, bin_index: int, baseline_offsets, exclusion) -> float:
    if not 0 <= bin_index < spectrum.nbins:
        raise ValueError(f"bin {bin_index} out of range [0, {spectrum.nbins})")
    if bin_index in exclusion:
        raise ValueError(
            f"bin {bin_index} is in the exclusion set; drop it from the "
            f"exclusion to target it")
    bins = resolve_baseline_bins(spectrum.nbins, bin_index, baseline_offsets,
                                 exclusion)
    return float(np.mean(spectrum.amplitudes[list(bins)]))


def snr_at_bin(spectrum: Spectrum, bin_index: int,
               baseline_offsets=DEFAULT_BASELINE_OFFSETS,
               exclusion=frozenset()) -> float:
    """Amplitude at the bin divided by its neighborhood baseline (>= 0)."""
    baseline = _baseline(spectrum, bin_index, baseline_offsets, exclusion)
    return float(spectrum.amplitudes[bin_index] / max(baseline, BASELINE_EPSILON))


def sns_at_bin(spectrum: Spectrum, bin_index: int,
               baseline_offsets=DEFAULT_BASELINE_OFFSETS,
               exclusion=frozenset()) -> float:
    """Amplitude at the bin minus its neighborhood baseline (may be negative)."""
    baseline = _baseline(spectrum, bin_index, baseline_offsets, exclusion)
    return float(spectrum.amplitudes[bin_index] - baseline)
