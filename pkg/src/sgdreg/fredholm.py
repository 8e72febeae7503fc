"""Discretized first-kind Fredholm test problems (phillips, gravity, shaw).

Each builder returns ``(A, x, metadata)`` with ``A`` square of the requested
size. The kernels and exact solutions follow the classical Regularization
Tools definitions; phillips uses a Galerkin discretization with orthonormal
box functions, gravity and shaw use the midpoint quadrature rule.
"""

import numpy as np
from scipy.linalg import toeplitz

_PHILLIPS_HALF_WIDTH = 3.0


def _phillips_g1(x):
    # antiderivative of phi(x) = 1 + cos(pi x / 3) on |x| < 3, zero outside
    ax = np.minimum(np.abs(x), _PHILLIPS_HALF_WIDTH)
    return np.sign(x) * (ax + 3.0 / np.pi * np.sin(np.pi * ax / 3.0))


def _phillips_g2(x):
    # second antiderivative (even), linear continuation outside the support
    ax = np.abs(x)
    inner = np.minimum(ax, _PHILLIPS_HALF_WIDTH)
    val = inner**2 / 2.0 + 9.0 / np.pi**2 * (1.0 - np.cos(np.pi * inner / 3.0))
    return val + _PHILLIPS_HALF_WIDTH * np.maximum(ax - _PHILLIPS_HALF_WIDTH, 0.0)


def phillips(size: int):
    """Phillips' test problem on [-6, 6]; kernel and solution are phi(s - t), phi(t)."""
    if size < 4:
        raise ValueError("phillips needs size >= 4")
    h = 12.0 / size
    d = np.arange(size) * h
    col = (_phillips_g2(d + h) - 2.0 * _phillips_g2(d) + _phillips_g2(d - h)) / h
    col[d >= _PHILLIPS_HALF_WIDTH + h] = 0.0  # beyond the kernel support
    a = toeplitz(col)
    edges = -6.0 + h * np.arange(size + 1)
    x = np.diff(_phillips_g1(edges)) / np.sqrt(h)
    return a, x, {"interval": [-6.0, 6.0], "discretization": "galerkin"}


def gravity(size: int, depth: float = 0.25):
    """1-D gravity surveying, example 1 (x(t) = sin(pi t) + 0.5 sin(2 pi t)) on [0, 1]."""
    if size < 4:
        raise ValueError("gravity needs size >= 4")
    h = 1.0 / size
    t = h * (np.arange(1, size + 1) - 0.5)
    diff = t[:, None] - t[None, :]
    a = h * depth / (depth**2 + diff**2) ** 1.5
    x = np.sin(np.pi * t) + 0.5 * np.sin(2.0 * np.pi * t)
    return a, x, {"example": 1, "depth": depth, "interval": [0.0, 1.0], "discretization": "midpoint"}


def shaw(size: int):
    """Shaw's one-dimensional image restoration model on [-pi/2, pi/2]."""
    if size < 4 or size % 2:
        raise ValueError("shaw needs an even size >= 4")
    h = np.pi / size
    t = -np.pi / 2 + (np.arange(size) + 0.5) * h
    co = np.cos(t)
    psi = np.pi * np.sin(t)
    ss = psi[:, None] + psi[None, :]
    sinc = np.ones_like(ss)
    nz = np.abs(ss) > 1e-300
    sinc[nz] = np.sin(ss[nz]) / ss[nz]
    a = h * ((co[:, None] + co[None, :]) * sinc) ** 2
    a = 0.5 * (a + a.T)
    x = 2.0 * np.exp(-6.0 * (t - 0.8) ** 2) + np.exp(-2.0 * (t + 0.5) ** 2)
    return a, x, {"interval": [-np.pi / 2, np.pi / 2], "discretization": "midpoint"}


TEST_PROBLEMS = {"phillips": phillips, "gravity": gravity, "shaw": shaw}
