"""Stage 1: flag points that sit away from the dominant proximity cluster.

Eigenvectors of the proximity graph with near-zero eigenvalues are close
to indicator vectors of weakly coupled point groups.  A small group shows
up as a handful of protruding entries in such a vector, so flagging
reduces to repeated quantile-interval tests on each eligible eigenvector,
with flags united across eigenvectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NoEligibleVectors, TooFewPoints, ZeroVector
from .spectral import (Spectrum, generalized_eigs, graph_laplacian,
                       heat_kernel_weights, pairwise_distances,
                       select_bandwidth)

__all__ = [
    "EligibilityConfig",
    "DetectionLabels",
    "high_frequency_measure",
    "select_eligible",
    "detect_1d",
    "spike_ratio",
    "spectrum_of_points",
    "eigenvector_flag_report",
    "proximity_stage",
]

# spread below this (relative to the data magnitude) is considered flat
_FLAT_RTOL = 1e-9


@dataclass(frozen=True)
class EligibilityConfig:
    """Knobs for eigenvector eligibility and the 1-D interval detector.

    Beyond the low-eigenvalue / low-sign-mix eligibility filters, three
    knobs control which detections the stage trusts enough to unite:
    ``strong_eig_threshold`` keeps only eigenvectors of strongly separated
    groups (coupling several bandwidths wide, scale-free since the
    spectrum is degree-normalized); ``binary_ratio`` is the minimum
    peak-to-bulk ratio ptp/MAD that marks a vector as near-binary rather
    than a smooth mode; ``max_flag_fraction`` bounds how much of the data
    one eigenvector may flag, since a weakly coupled group is small by
    assumption.
    """

    eig_threshold: float = 0.1
    hf_threshold: float = 0.9
    gamma: float = 2.5
    max_iter: int = 100
    bandwidth_rank: int = 4
    repeats: int = 1
    max_flag_fraction: float = 0.4
    strong_eig_threshold: float = 1e-6
    binary_ratio: float = 30.0

    def __post_init__(self):
        if self.eig_threshold <= 0.0:
            raise ValueError("eig_threshold must be positive")
        if not 0.0 < self.hf_threshold <= 1.0:
            raise ValueError("hf_threshold must lie in (0, 1]")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.bandwidth_rank < 1:
            raise ValueError("bandwidth_rank must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.max_flag_fraction <= 1.0:
            raise ValueError("max_flag_fraction must lie in (0, 1]")
        if self.strong_eig_threshold <= 0.0:
            raise ValueError("strong_eig_threshold must be positive")
        if self.binary_ratio < 1.0:
            raise ValueError("binary_ratio must be >= 1")


@dataclass(frozen=True)
class DetectionLabels:
    """Per-point outlier flags plus the stage that decided each flag."""

    outlier: np.ndarray
    stage: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        flags = np.asarray(self.outlier, dtype=bool)
        stage = self.stage
        if stage is None:
            stage = np.full(flags.shape, "proximity", dtype=object)
        elif isinstance(stage, str):
            stage = np.full(flags.shape, stage, dtype=object)
        else:
            stage = np.asarray(stage, dtype=object)
            if stage.shape != flags.shape:
                raise ValueError("stage tags must align with flags")
        if flags.all():
            raise ValueError("labels must keep at least one inlier")
        object.__setattr__(self, "outlier", flags)
        object.__setattr__(self, "stage", stage)

    def __len__(self) -> int:
        return int(self.outlier.shape[0])

    @property
    def inlier(self) -> np.ndarray:
        return ~self.outlier

    @property
    def n_outliers(self) -> int:
        return int(np.count_nonzero(self.outlier))


def high_frequency_measure(vector: np.ndarray) -> float:
    """Fraction of absolute mass cancelled by sign mixing.

    (sum|v_j| - |sum v_j|) / sum|v_j|:  0 for a one-signed vector, 1 when
    positive and negative mass balance exactly.
    """
    v = np.asarray(vector, dtype=float)
    total = float(np.abs(v).sum())
    if total == 0.0:
        raise ZeroVector("high-frequency measure of the zero vector")
    return (total - abs(float(v.sum()))) / total


def select_eligible(spectrum: Spectrum, cfg: EligibilityConfig) -> list[int]:
    """Indices of low-eigenvalue, low-sign-mix eigenvectors, ascending.

    Raises NoEligibleVectors when nothing qualifies; callers fall back to
    "no proximity outliers" and continue with the model stage.
    """
    eligible = [
        i for i, lam in enumerate(spectrum.eigenvalues)
        if lam < cfg.eig_threshold
        and high_frequency_measure(spectrum.eigenvectors[:, i]) < cfg.hf_threshold
    ]
    if not eligible:
        raise NoEligibleVectors("no eigenvector passed the eligibility filters")
    return eligible


def _quantile_interval(selected: np.ndarray, gamma: float):
    q1, mu, q3 = np.quantile(selected, [0.25, 0.5, 0.75], method="linear")
    return mu - gamma * (mu - q1), mu + gamma * (q3 - mu)


def detect_1d(values: np.ndarray, gamma: float, rng_seed,
              max_iter: int = 100,
              initial_inliers: np.ndarray | None = None) -> np.ndarray:
    """Iterative quantile-interval outlier test on a 1-D sample.

    Starts from a random half of the elements (or ``initial_inliers`` when
    given), builds the interval
    [mu - gamma*(mu - q1), mu + gamma*(q3 - mu)] from the current inliers'
    quartiles, reclassifies everything against it, and repeats to a
    fixpoint (or ``max_iter``).  Returns the boolean outlier flags.

    The random half is drawn from the value-sorted order, so for a fixed
    seed the flags do not depend on how the input happens to be arranged.
    A sample whose total spread is negligible relative to its magnitude
    yields no flags, as does an interval that would exclude everything.
    """
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n < 4:
        raise TooFewPoints("need at least 4 values for quartiles")
    if np.ptp(v) <= _FLAT_RTOL * max(1.0, float(np.abs(v).max())):
        return np.zeros(n, dtype=bool)

    if initial_inliers is None:
        order = np.lexsort((np.arange(n), v))
        rng = np.random.default_rng(rng_seed)
        chosen = order[rng.permutation(n)[:n // 2]]
        inliers = np.zeros(n, dtype=bool)
        inliers[chosen] = True
    else:
        inliers = np.asarray(initial_inliers, dtype=bool).copy()
        if inliers.shape != v.shape or not inliers.any():
            raise ValueError("initial inlier mask must be nonempty over values")

    for _ in range(max_iter):
        lo, hi = _quantile_interval(v[inliers], gamma)
        # sub-noise variation around the interval must not protrude
        pad = _FLAT_RTOL * max(1.0, abs(lo), abs(hi))
        updated = (v >= lo - pad) & (v <= hi + pad)
        if not updated.any():
            warnings.warn("interval excluded every element; keeping all points",
                          RuntimeWarning, stacklevel=2)
            return np.zeros(n, dtype=bool)
        if np.array_equal(updated, inliers):
            break
        inliers = updated
    return ~inliers


def _intra_class_deviation(values: np.ndarray, flags: np.ndarray) -> float:
    dev = 0.0
    for mask in (flags, ~flags):
        if np.count_nonzero(mask) > 1:
            dev += float(np.var(values[mask]))
    return dev


def _detect_vector(values, cfg: EligibilityConfig, seed_seq) -> np.ndarray:
    """One eigenvector's flags; repeats>1 keeps the tightest classification."""
    seeds = seed_seq.spawn(cfg.repeats)
    best, best_dev = None, np.inf
    for seed in seeds:
        flags = detect_1d(values, cfg.gamma, seed, cfg.max_iter)
        if cfg.repeats == 1:
            return flags
        dev = _intra_class_deviation(values, flags)
        if dev < best_dev:
            best, best_dev = flags, dev
    return best


def spike_ratio(vector: np.ndarray) -> float:
    """Peak-to-bulk ratio ptp/MAD; large for near-binary vectors.

    An indicator-like vector keeps its bulk at one level (tiny MAD) with a
    few protruding entries (ptp of order 1); smooth modes and noise stay
    below ~10.
    """
    v = np.asarray(vector, dtype=float)
    mad = float(np.median(np.abs(v - np.median(v))))
    return float(np.ptp(v)) / (mad + 1e-300)


def spectrum_of_points(points: np.ndarray,
                       cfg: EligibilityConfig | None = None) -> Spectrum:
    """Heat-kernel graph spectrum of a point set (the stage's front half)."""
    cfg = cfg or EligibilityConfig()
    dist = pairwise_distances(np.asarray(points, dtype=float))
    t = select_bandwidth(dist, cfg.bandwidth_rank)
    lp = graph_laplacian(heat_kernel_weights(dist, t))
    return generalized_eigs(lp)


def eigenvector_flag_report(spectrum: Spectrum, cfg: EligibilityConfig,
                            rng_seed: int) -> list[tuple[int, float, float,
                                                         np.ndarray]]:
    """Per eligible eigenvector: (index, eigenvalue, hf measure, flags).

    Empty when nothing is eligible.  Seeds are derived per eigenvector
    index, so the report does not depend on how many vectors qualify.
    """
    try:
        eligible = select_eligible(spectrum, cfg)
    except NoEligibleVectors:
        return []
    report = []
    for idx in eligible:
        vec = spectrum.eigenvectors[:, idx]
        seed_seq = np.random.SeedSequence(entropy=rng_seed, spawn_key=(idx,))
        report.append((idx, float(spectrum.eigenvalues[idx]),
                       high_frequency_measure(vec),
                       _detect_vector(vec, cfg, seed_seq)))
    return report


def proximity_stage(points: np.ndarray, cfg: EligibilityConfig | None = None,
                    rng_seed: int = 0, spectrum: Spectrum | None = None,
                    ) -> DetectionLabels:
    """Run the full proximity stage on a point set.

    Builds the heat-kernel graph, takes the generalized spectrum, runs the
    1-D detector on every eligible eigenvector, then unites the flags of
    the trusted detections: near-binary vectors (spike ratio at least
    ``binary_ratio``) of strongly separated groups (eigenvalue below
    ``strong_eig_threshold``) flagging at most ``max_flag_fraction`` of
    the data.  The union grows from the most-separated groups up and stops
    before it would exceed half the data, since inliers are assumed to be
    the majority.  With nothing eligible or trusted the stage flags
    nothing; the subtle outliers it cannot see are the model stage's job.
    """
    cfg = cfg or EligibilityConfig()
    pts = np.asarray(points, dtype=float)
    k = pts.shape[0]
    if k < 12:
        raise TooFewPoints("proximity stage needs at least 12 points")
    if spectrum is None:
        spectrum = spectrum_of_points(pts, cfg)
    report = eigenvector_flag_report(spectrum, cfg, rng_seed)
    if not report:
        warnings.warn("no eligible eigenvectors; skipping proximity flags",
                      RuntimeWarning, stacklevel=2)
        return DetectionLabels(np.zeros(k, dtype=bool), "proximity")
    trusted = []
    for idx, lam, _hf, flags in report:
        n_flags = int(np.count_nonzero(flags))
        if (lam < cfg.strong_eig_threshold
                and spike_ratio(spectrum.eigenvectors[:, idx]) >= cfg.binary_ratio
                and 0 < n_flags <= cfg.max_flag_fraction * k):
            trusted.append((lam, idx, flags))
    trusted.sort(key=lambda t: (t[0], t[1]))
    flagged = np.zeros(k, dtype=bool)
    for _lam, _idx, flags in trusted:
        union = flagged | flags
        if np.count_nonzero(union) > k // 2:
            warnings.warn("flag budget reached; dropping weaker groups",
                          RuntimeWarning, stacklevel=2)
            break
        flagged = union
    return DetectionLabels(flagged, "proximity")
