"""Stage 2: direct least-squares fitting plus model-consistency refinement.

The refinement starts from the proximity stage's inlier set, fits an
algebraic model, reclassifies every point by its gradient-normalized
residual against a robust threshold, refits, and repeats to a fixpoint.
A consensus-sampling baseline and the classic success-probability formula
round out the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateConfiguration, NoValidModel, NotAnEllipse,
                     NotAnEllipsoid, TooFewPoints)
from .geometry import ConicCoeffs, QuadricCoeffs, signed_residuals
from .proximity import DetectionLabels

__all__ = [
    "RefineConfig",
    "FitResult",
    "fit_ellipse_direct",
    "fit_ellipsoid_direct",
    "refine",
    "vanilla_ransac",
    "ransac_success_prob",
    "MIN_POINTS_ELLIPSE",
    "MIN_POINTS_ELLIPSOID",
]

MIN_POINTS_ELLIPSE = 5
MIN_POINTS_ELLIPSOID = 9

MAD_TO_SIGMA = 1.4826  # consistency factor for Gaussian residuals
_TAU_FLOOR = 1e-12
_CYCLE_WINDOW = 16


@dataclass(frozen=True)
class RefineConfig:
    """Knobs for the iterative reclassification."""

    tau_scale: float = 3.0
    max_iter: int = 50
    min_points: int | None = None  # None: 5 for ellipses, 9 for ellipsoids

    def __post_init__(self):
        if self.tau_scale <= 0.0:
            raise ValueError("tau_scale must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class FitResult:
    model: ConicCoeffs | QuadricCoeffs
    labels: DetectionLabels
    iterations: int
    converged: bool


def _normalize_points(pts: np.ndarray):
    """Shift to the centroid and scale to unit RMS coordinate."""
    mean = pts.mean(axis=0)
    shifted = pts - mean
    scale = math.sqrt(float(np.mean(shifted ** 2)))
    if scale == 0.0:
        raise DegenerateConfiguration("all points coincide")
    return shifted / scale, mean, scale


def _denormalize_quadratic(coeff_mat: np.ndarray, mean: np.ndarray,
                           scale: float) -> np.ndarray:
    """Map a homogeneous quadratic-form matrix back to world coordinates."""
    dim = coeff_mat.shape[0] - 1
    t = np.eye(dim + 1) / scale
    t[dim, dim] = 1.0
    t[:dim, dim] = -mean / scale
    return t.T @ coeff_mat @ t


def fit_ellipse_direct(points: np.ndarray) -> ConicCoeffs:
    """Direct least-squares ellipse fit.

    Minimizes the algebraic residual subject to the ellipse-specific
    constraint 4AC - B^2 = 1 via the numerically stable split of the
    scatter matrix of (x^2, xy, y^2, x, y, 1); always returns a true
    ellipse when it returns at all.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (n, 2) point array")
    if pts.shape[0] < MIN_POINTS_ELLIPSE:
        raise TooFewPoints("ellipse fitting needs at least 5 points")
    u, mean, scale = _normalize_points(pts)
    x, y = u[:, 0], u[:, 1]
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t_mat = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        raise DegenerateConfiguration("linear scatter block is singular") from None
    m = s1 + s2 @ t_mat
    m_reduced = np.vstack([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m_reduced)
    best = None
    for i in range(3):
        if abs(evals[i].imag) > 1e-8 * (1.0 + abs(evals[i].real)):
            continue
        vec = np.real(evecs[:, i])
        cond = 4.0 * vec[0] * vec[2] - vec[1] ** 2
        if cond > 0.0 and (best is None or cond > best[0]):
            best = (cond, vec)
    if best is None:
        raise DegenerateConfiguration("no admissible ellipse solution")
    a1 = best[1]
    a2 = t_mat @ a1
    qa, qb, qc = a1
    qd, qe, qf = a2
    mat = np.array([[qa, qb / 2.0, qd / 2.0],
                    [qb / 2.0, qc, qe / 2.0],
                    [qd / 2.0, qe / 2.0, qf]])
    w = _denormalize_quadratic(mat, mean, scale)
    coeffs = ConicCoeffs(np.array([w[0, 0], 2.0 * w[0, 1], w[1, 1],
                                   2.0 * w[0, 2], 2.0 * w[1, 2], w[2, 2]]))
    if not coeffs.is_ellipse:
        raise DegenerateConfiguration("fit degenerated to a non-ellipse")
    return coeffs


def fit_ellipsoid_direct(points: np.ndarray) -> QuadricCoeffs:
    """Least-squares quadric under a unit-norm coefficient constraint.

    The smallest right singular vector of the design matrix of
    (x^2, y^2, z^2, xy, xz, yz, x, y, z, 1) gives the quadric; it is then
    validated as an ellipsoid.  Raises DegenerateConfiguration when the
    solution is not unique (rank-deficient configurations such as coplanar
    points) and NotAnEllipsoid when the best quadric is another surface.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected an (n, 3) point array")
    if pts.shape[0] < MIN_POINTS_ELLIPSOID:
        raise TooFewPoints("ellipsoid fitting needs at least 9 points")
    u, mean, scale = _normalize_points(pts)
    x, y, z = u[:, 0], u[:, 1], u[:, 2]
    design = np.column_stack([
        x * x, y * y, z * z, x * y, x * z, y * z,
        x, y, z, np.ones_like(x),
    ])
    _, svals, vt = np.linalg.svd(design, full_matrices=True)
    # a unique quadric needs rank 9 (one-dimensional null space)
    if svals[0] == 0.0 or svals[8] < 1e-10 * svals[0]:
        raise DegenerateConfiguration("quadric solution is not unique")
    q = vt[-1]
    mat = np.array([
        [q[0], q[3] / 2.0, q[4] / 2.0, q[6] / 2.0],
        [q[3] / 2.0, q[1], q[5] / 2.0, q[7] / 2.0],
        [q[4] / 2.0, q[5] / 2.0, q[2], q[8] / 2.0],
        [q[6] / 2.0, q[7] / 2.0, q[8] / 2.0, q[9]],
    ])
    w = _denormalize_quadratic(mat, mean, scale)
    coeffs = QuadricCoeffs(np.array([
        w[0, 0], w[1, 1], w[2, 2],
        2.0 * w[0, 1], 2.0 * w[0, 2], 2.0 * w[1, 2],
        2.0 * w[0, 3], 2.0 * w[1, 3], 2.0 * w[2, 3], w[3, 3],
    ]))
    if not coeffs.is_ellipsoid:
        raise NotAnEllipsoid("best quadric is not an ellipsoid")
    return coeffs


def _dim_tools(pts: np.ndarray, min_points: int | None):
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError("points must be (n, 2) or (n, 3)")
    if pts.shape[1] == 2:
        return fit_ellipse_direct, (min_points or MIN_POINTS_ELLIPSE)
    return fit_ellipsoid_direct, (min_points or MIN_POINTS_ELLIPSOID)


def _robust_inlier_mask(signed: np.ndarray, reference: np.ndarray,
                        tau_scale: float) -> tuple[np.ndarray, float]:
    """Threshold |residual - center| at tau_scale robust standard deviations.

    Center and scale come from the reference residuals (the current
    inliers), using the median and the scaled median absolute deviation.
    """
    center = float(np.median(reference))
    scale = float(np.median(np.abs(reference - center)))
    tau = max(tau_scale * MAD_TO_SIGMA * scale, _TAU_FLOOR)
    return np.abs(signed - center) <= tau, tau


def _median_distance(pts, model, mask) -> float:
    return float(np.median(np.abs(signed_residuals(pts, model))[mask]))


def _concentrate(pts: np.ndarray, model, fitter, min_points: int):
    """Refit on the tightest half of the data until that set stabilizes.

    Standard least-trimmed-squares concentration: each refit on the
    smallest-residual half cannot be worse on that half, so the model
    walks toward the dominant structure even when the starting fit is
    inflated by heavy symmetric contamination.  Inliers are the majority
    by assumption, so the half-set at the fixpoint is essentially clean.
    """
    k = pts.shape[0]
    half = max(min_points, (k + 1) // 2)
    core = None
    for _ in range(30):
        dist = np.abs(signed_residuals(pts, model))
        tight = np.zeros(k, dtype=bool)
        tight[np.argsort(dist, kind="stable")[:half]] = True
        if core is not None and np.array_equal(tight, core):
            break
        try:
            model = fitter(pts[tight])
        except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid):
            break
        core = tight
    return model, core


def _classification_loop(pts, model, inliers, reference, fitter,
                         min_points, cfg):
    """Spec loop: classify all points against the threshold, refit, repeat.

    ``reference`` seeds the first threshold estimate; successive
    classifications are compared to each other, with ``inliers`` (the
    initial labeling) counting as the zeroth.  Cycles resolve to the
    iterate with the smallest median inlier residual.
    """
    seen = {inliers.tobytes()}
    history = [(inliers, model)]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        signed = signed_residuals(pts, model)
        updated, _tau = _robust_inlier_mask(signed, signed[reference],
                                            cfg.tau_scale)
        if np.array_equal(updated, inliers):
            converged = True
            break
        if np.count_nonzero(updated) < min_points:
            break
        key = updated.tobytes()
        if key in seen:
            inliers, model = min(
                history, key=lambda it: _median_distance(pts, it[1], it[0]))
            break
        try:
            model_next = fitter(pts[updated])
        except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid):
            break
        inliers, model = updated, model_next
        reference = updated
        seen.add(key)
        history.append((inliers, model))
        if len(history) > _CYCLE_WINDOW:
            seen.discard(history[0][0].tobytes())
            history.pop(0)
    return model, inliers, iterations, converged


def _trimmed_objective(pts, model, half: int) -> float:
    dist = np.abs(signed_residuals(pts, model))
    return float(np.sum(np.sort(dist)[:half]))


_MULTISTART_SEED = 0x5EED
_MULTISTART_SAMPLES = 60


def _multistart_concentrate(pts, fitter, min_points):
    """Best trimmed fit over seeded random minimal samples.

    Two concentration steps per sample, then full concentration from the
    best one: the classic way to reach the global trimmed optimum when
    every available starting fit is captured by structured contamination.
    Fully deterministic for a given point order.
    """
    k = pts.shape[0]
    half = max(min_points, (k + 1) // 2)
    best_model, best_obj = None, np.inf
    for child in np.random.SeedSequence(_MULTISTART_SEED).spawn(
            _MULTISTART_SAMPLES):
        rng = np.random.default_rng(child)
        sample = rng.choice(k, size=min_points, replace=False)
        try:
            model = fitter(pts[sample])
        except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid):
            continue
        for _ in range(2):
            dist = np.abs(signed_residuals(pts, model))
            tight = np.argsort(dist, kind="stable")[:half]
            try:
                model = fitter(pts[tight])
            except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid):
                break
        obj = _trimmed_objective(pts, model, half)
        if obj < best_obj:
            best_model, best_obj = model, obj
    if best_model is None:
        return None, None
    return _concentrate(pts, best_model, fitter, min_points)


def refine(points: np.ndarray, initial: DetectionLabels,
           cfg: RefineConfig | None = None) -> FitResult:
    """Iterative model-consistency reclassification from an initial labeling.

    Fits on the initial inliers and iterates the classify/refit loop to a
    fixpoint.  A second trajectory guards against fits captured by
    structured contamination by concentrating seeded random minimal-sample
    fits on the tightest half of the data.  The result whose model has the
    smallest trimmed residual sum wins, the plain trajectory breaking
    ties, which keeps re-running refine on its own output a no-op.
    """
    cfg = cfg or RefineConfig()
    pts = np.asarray(points, dtype=float)
    fitter, min_points = _dim_tools(pts, cfg.min_points)
    first = initial.inlier.copy()
    if np.count_nonzero(first) < min_points:
        raise TooFewPoints(
            f"refinement needs at least {min_points} initial inliers")
    model = fitter(pts[first])
    half = max(min_points, (pts.shape[0] + 1) // 2)

    # the rescue route must not depend on the starting labels, otherwise
    # re-running refine on its own output could surface new candidates
    outcomes = [_classification_loop(pts, model, first.copy(), first, fitter,
                                     min_points, cfg)]
    multi_model, multi_core = _multistart_concentrate(pts, fitter, min_points)
    if multi_core is not None:
        outcomes.append(_classification_loop(pts, multi_model,
                                             multi_core.copy(), multi_core,
                                             fitter, min_points, cfg))
    model, inliers, iterations, converged = min(
        outcomes, key=lambda out: _trimmed_objective(pts, out[0], half))
    stage = np.where(inliers == initial.inlier, initial.stage, "model")
    return FitResult(model, DetectionLabels(~inliers, stage),
                     iterations, converged)


def vanilla_ransac(points: np.ndarray, iterations: int = 1000,
                   inlier_threshold: float | None = None, rng_seed: int = 0,
                   tau_scale: float = 3.0) -> FitResult:
    """Classic consensus baseline: best of ``iterations`` minimal samples.

    Every trial fits a random minimal sample; the model with the largest
    consensus set wins (earliest trial breaking ties) and is refit on that
    set.  Consensus needs one threshold shared by all trials for counts to
    be comparable: when none is given it is tau_scale robust standard
    deviations, with the scale calibrated from the best (smallest) median
    absolute residual any trial achieved.
    """
    pts = np.asarray(points, dtype=float)
    fitter, min_points = _dim_tools(pts, None)
    n = pts.shape[0]
    if n < min_points:
        raise TooFewPoints(f"need at least {min_points} points")
    children = np.random.SeedSequence(rng_seed).spawn(iterations)
    models = []
    best_med = np.inf
    for child in children:
        rng = np.random.default_rng(child)
        sample = rng.choice(n, size=min_points, replace=False)
        try:
            model = fitter(pts[sample])
        except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid,
                TooFewPoints):
            continue
        distances = np.abs(signed_residuals(pts, model))
        models.append((model, distances))
        best_med = min(best_med, float(np.median(distances)))
    if not models:
        raise NoValidModel("every minimal sample was degenerate")
    if inlier_threshold is not None:
        tau = inlier_threshold
    else:
        tau = max(tau_scale * MAD_TO_SIGMA * best_med, _TAU_FLOOR)
    best_count = -1
    for model, distances in models:
        mask = distances <= tau
        count = int(np.count_nonzero(mask))
        if count > best_count:
            best_count, best_mask, best_model = count, mask, model
    if best_count >= min_points:
        try:
            best_model = fitter(pts[best_mask])
        except (DegenerateConfiguration, NotAnEllipse, NotAnEllipsoid,
                TooFewPoints):
            pass  # keep the minimal-sample model
    labels = DetectionLabels(~best_mask, "model")
    return FitResult(best_model, labels, iterations, True)


def ransac_success_prob(w: float, n: int, k: int) -> float:
    """Probability that k minimal samples contain at least one all-inlier one.

    w is the inlier fraction, n the minimal sample size:
    1 - (1 - w^n)^k.
    """
    if not 0.0 < w <= 1.0:
        raise ValueError("w must lie in (0, 1]")
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    return 1.0 - (1.0 - w ** n) ** k
