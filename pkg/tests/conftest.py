import numpy as np
import pytest

from conic_purge import EllipseParams, EllipsoidParams


def random_ellipse(rng) -> EllipseParams:
    a = rng.uniform(1.0, 10.0)
    b = a * rng.uniform(0.2, 1.0)
    theta = rng.uniform(-np.pi / 2, np.pi / 2 - 1e-9)
    cx, cy = rng.uniform(-10.0, 10.0, 2)
    return EllipseParams(cx, cy, a, min(b, a), theta)


def random_rotation(rng) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def random_ellipsoid(rng) -> EllipsoidParams:
    axes = np.sort(rng.uniform(1.0, 8.0, 3))[::-1]
    axes[0] *= 1.2  # keep the axes distinct so orientation is well defined
    axes[2] *= 0.8
    center = rng.uniform(-5.0, 5.0, 3)
    return EllipsoidParams(center, axes, random_rotation(rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, ok in sorted(RESULTS, key=lambda r: r[0]):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {description}")
