"""Built-in frame fields and helpers to build frames with exact derivatives."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import sympy as sp

from .tetrad import FrameField


def symbolic_frame(coframe_exprs, symbols: Sequence, name: str = "") -> FrameField:
    """Frame from a sympy coframe matrix ``e[A, mu]`` with exact derivatives."""
    e = sp.Matrix(coframe_exprs)
    arr = sp.Array(e.tolist())
    d1 = sp.derive_by_array(arr, symbols)          # [nu, A, mu]
    d2 = sp.derive_by_array(d1, symbols)           # [sigma, nu, A, mu]
    n = len(symbols)
    f0 = sp.lambdify([symbols], arr.tolist(), "numpy")
    f1 = sp.lambdify([symbols], d1.tolist(), "numpy")
    f2 = sp.lambdify([symbols], d2.tolist(), "numpy")

    def full(f, shape):
        return lambda x: np.broadcast_to(np.array(f(x), dtype=float), shape)

    c0 = full(f0, (n, n))
    c1 = full(f1, (n, n, n))
    c2 = full(f2, (n, n, n, n))
    return FrameField(
        n=n,
        coframe=lambda x: np.array(c0(x)),
        dcoframe=lambda x: np.transpose(c1(x), (1, 2, 0)),
        d2coframe=lambda x: np.transpose(c2(x), (2, 3, 1, 0)),
        name=name,
    )


def coordinate_frame(dim: int = 4) -> FrameField:
    """``e^A = dx^A``."""
    eye = np.eye(dim)
    return FrameField(
        n=dim,
        coframe=lambda x: eye.copy(),
        dcoframe=lambda x: np.zeros((dim,) * 3),
        d2coframe=lambda x: np.zeros((dim,) * 4),
        name="coordinate",
    )


def exponential_frame(rate: float = 1.0) -> FrameField:
    """Coframe ``e^1 = dx``, ``e^2 = exp(rate x) dy``."""
    x, y = sp.symbols("x y")
    e = [[1, 0], [0, sp.exp(sp.Float(rate) * x)]]
    return symbolic_frame(e, (x, y), "exponential-2d")


def affine_line_frame(rate: float = 1.0) -> FrameField:
    """Vectors ``e_1 = d_x``, ``e_2 = exp(rate x) d_y``: ``[e_1, e_2] = rate e_2``."""
    x, y = sp.symbols("x y")
    e = [[1, 0], [0, sp.exp(-sp.Float(rate) * x)]]
    return symbolic_frame(e, (x, y), "affine-line")


def so3_frame(scale: float = 1.0) -> FrameField:
    """Left-invariant coframe of SO(3) in Euler angles ``(theta, phi, psi)``.

    Its nonholonomy object is ``scale``-independent up to ``1/scale``: the
    brackets are ``[e_A, e_B] = eps_ABC e_C / scale``.
    """
    th, ph, ps = sp.symbols("theta phi psi")
    s = sp.Float(scale)
    e = [
        [s * sp.sin(ps), -s * sp.cos(ps) * sp.sin(th), 0],
        [s * sp.cos(ps), s * sp.sin(ps) * sp.sin(th), 0],
        [0, s * sp.cos(th), s],
    ]
    return symbolic_frame(e, (th, ph, ps), "so3-leftinvariant")


BUILTIN_FRAMES = {
    "coordinate": coordinate_frame,
    "exponential-2d": exponential_frame,
    "affine-line": affine_line_frame,
    "so3-leftinvariant": so3_frame,
}


def builtin_frame(name: str, **params) -> FrameField:
    try:
        factory = BUILTIN_FRAMES[name]
    except KeyError:
        raise ValueError(f"unknown frame {name!r}; choose from {sorted(BUILTIN_FRAMES)}") from None
    return factory(**params)


def polynomial_frame(n: int, rng: np.random.Generator, amplitude: float = 0.3) -> FrameField:
    """Random coframe ``e = e0 + a_k x^k + b_kl x^k x^l`` with exact derivatives.

    ``e0`` is the identity plus a small perturbation, so the frame is
    nonsingular near the origin.
    """
    e0 = np.eye(n) + amplitude * rng.standard_normal((n, n))
    a = amplitude * rng.standard_normal((n, n, n))
    b = amplitude * rng.standard_normal((n, n, n, n))
    b = 0.5 * (b + b.transpose(0, 1, 3, 2))

    def coframe(x):
        return e0 + a @ x + np.einsum("Amkl,k,l->Am", b, x, x)

    def dcoframe(x):
        return a + 2.0 * np.einsum("Amkl,l->Amk", b, x)

    def d2coframe(x):
        return 2.0 * b

    return FrameField(n, coframe, dcoframe, d2coframe, name="polynomial")
