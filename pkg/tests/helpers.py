"""Frame builders shared by the field, transport and acceptance tests."""

import numpy as np

from localpauli import algebra as ga
from localpauli.algebra import Signature
from localpauli.fields import FrameField, FrameMatrixField, Grid, frame_from_matrix

from oracles import boost2, euler_zyz, rotation2

TWO_PI = 2 * np.pi


def square_grid(N, length=TWO_PI, r=2):
    return Grid((N,) * r, (0.0,) * r, (length / (N - 1),) * r)


def matrix_frame(sig, grid, Y):
    return frame_from_matrix(FrameMatrixField(sig, grid, Y))


def grade1_derivatives(sig, dY):
    """``d_mu h^a`` for a grade-1 frame given ``dY[..., mu, a, b]``."""
    out = np.zeros(dY.shape[:-1] + (sig.dim,))
    for b in range(sig.n):
        out[..., 1 << b] = dY[..., b]
    return out


def phi_example(N, length=TWO_PI):
    grid = square_grid(N, length)
    x1, x2 = grid.coords()
    phi = np.sin(x1) * np.cos(x2)
    dphi = np.stack([np.cos(x1) * np.cos(x2), -np.sin(x1) * np.sin(x2)], axis=-1)
    return grid, phi, dphi


def rotation_frame(N, sig=None, length=TWO_PI):
    """Rotation frame in Cl(2,0) (or Cl(0,2)) with its exact derivatives."""
    sig = sig or Signature(2, 0)
    grid, phi, dphi = phi_example(N, length)
    Y = rotation2(phi)
    dR = np.stack([-np.sin(phi), np.cos(phi), -np.cos(phi), -np.sin(phi)], -1).reshape(phi.shape + (2, 2))
    dY = dphi[..., :, None, None] * dR[..., None, :, :]
    return matrix_frame(sig, grid, Y), grade1_derivatives(sig, dY), phi, dphi


def boost_frame(N, length=TWO_PI):
    sig = Signature(1, 1)
    grid, phi, dphi = phi_example(N, length)
    Y = boost2(phi)
    dB = np.stack([np.sinh(phi), np.cosh(phi), np.cosh(phi), np.sinh(phi)], -1).reshape(phi.shape + (2, 2))
    dY = dphi[..., :, None, None] * dB[..., None, :, :]
    return matrix_frame(sig, grid, Y), grade1_derivatives(sig, dY), phi, dphi


def euler_angles(grid):
    x1, x2 = grid.coords()
    phi = np.sin(x1) * np.cos(x2)
    psi = np.cos(x1) + 0.5 * np.sin(x2)
    theta = 1 + 0.5 * np.sin(x1 + x2)
    d = {
        "phi": (np.cos(x1) * np.cos(x2), -np.sin(x1) * np.sin(x2)),
        "psi": (-np.sin(x1), 0.5 * np.cos(x2)),
        "theta": (0.5 * np.cos(x1 + x2), 0.5 * np.cos(x1 + x2)),
    }
    return phi, psi, theta, d


def euler_frame(N, length=2.0):
    """Cl(3,0) frame whose rows are the orthogonal Euler rotation matrix."""
    sig = Signature(3, 0)
    grid = square_grid(N, length)
    phi, psi, theta, d = euler_angles(grid)
    R = euler_zyz(phi, psi, theta)
    return matrix_frame(sig, grid, R), (phi, psi, theta, d)


def rotor_frame(sig, grid, rng, amplitude=0.6):
    """``h^a = S^{-1} e^a S`` with ``S = exp(B(x))`` for a smooth random bivector field ``B``."""
    coords = grid.coords()
    B = np.zeros(grid.shape + (sig.dim,))
    for mask in np.flatnonzero(ga.grade_mask(sig, 2)):
        k = rng.normal(size=grid.r)
        B[..., mask] = amplitude * rng.normal() * np.sin(sum(ki * c for ki, c in zip(k, coords)) + rng.uniform(0, 6))
    S = ga.exp_array(B, sig)
    S_inv = ga.inverse_array(S, sig)
    E = np.eye(sig.dim)[[1 << a for a in range(sig.n)]]
    data = ga.gp_array(ga.gp_array(S_inv[..., None, :], E, sig), S[..., None, :], sig)
    return FrameField(sig, grid, data), S
