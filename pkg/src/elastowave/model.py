"""Model parameters, pointwise nonlinearities and the built-in initial data."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

F_KINDS = ("zero", "cubic", "custom")
G_KINDS = ("zero", "linear", "cubic_plus", "custom")
INITIAL_KINDS = ("test1", "test2", "zero", "custom")


class StructuralConditionWarning(UserWarning):
    """The global Lipschitz/growth conditions cannot hold for this model."""


@dataclass(frozen=True)
class ModelSpec:
    """Physical and stochastic parameters of one problem.

    ``initial_kind="custom"`` takes nodal dof vectors ``custom_u0`` and
    ``custom_v0`` (for a specific mesh).  ``F_kind``/``G_kind`` ``"custom"``
    take vectorised callables ``u -> value`` over arrays of shape (..., 2).
    """

    lam: float = 1.0
    mu: float = 1.0
    delta: float = 0.1
    F_kind: str = "cubic"
    G_kind: str = "linear"
    initial_kind: str = "test1"
    T: float = 0.5
    custom_u0: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    custom_v0: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    custom_F: Optional[Callable] = field(default=None, repr=False, compare=False)
    custom_G: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        for name, kinds in (("F_kind", F_KINDS), ("G_kind", G_KINDS),
                            ("initial_kind", INITIAL_KINDS)):
            if getattr(self, name) not in kinds:
                raise ValueError(f"{name} must be one of {kinds}, got {getattr(self, name)!r}")
        if self.F_kind == "custom" and self.custom_F is None:
            raise ValueError("F_kind='custom' needs custom_F")
        if self.G_kind == "custom" and self.custom_G is None:
            raise ValueError("G_kind='custom' needs custom_G")
        if self.initial_kind == "custom" and self.custom_u0 is None:
            raise ValueError("initial_kind='custom' needs custom_u0")

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    @property
    def is_deterministic(self) -> bool:
        return self.delta == 0 or self.G_kind == "zero"


def preset(name: str, **overrides) -> ModelSpec:
    """The two numerical tests: ``test1`` (linear noise) and ``test2``."""
    if name == "test1":
        base = dict(F_kind="cubic", G_kind="linear", initial_kind="test1")
    elif name == "test2":
        base = dict(F_kind="cubic", G_kind="cubic_plus", initial_kind="test2")
    else:
        raise ValueError(f"unknown preset {name!r}")
    base.update(lam=1.0, mu=1.0, delta=0.1, T=0.5)
    base.update(overrides)
    return ModelSpec(**base)


def _sq(u):
    return u[..., 0:1] ** 2 + u[..., 1:2] ** 2


def eval_F(spec: ModelSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if spec.F_kind == "zero":
        return np.zeros_like(u)
    if spec.F_kind == "cubic":
        return _sq(u) * u
    return np.asarray(spec.custom_F(u), dtype=float)


def eval_G(spec: ModelSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if spec.G_kind == "zero":
        return np.zeros_like(u)
    if spec.G_kind == "linear":
        return spec.delta * u
    if spec.G_kind == "cubic_plus":
        return spec.delta * (_sq(u) + 1.0) * u
    return np.asarray(spec.custom_G(u), dtype=float)


def eval_initial(spec: ModelSpec, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic ``(u0, grad u0, v0)`` at points ``x`` of shape (..., 2).

    ``grad[..., i, j]`` is the derivative of component ``i`` along ``x_j``.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    pi = np.pi
    u = np.zeros(x.shape)
    g = np.zeros(x.shape + (2,))
    if spec.initial_kind == "test1":
        s1, s2 = np.sin(pi * x1), np.sin(pi * x2)
        s21, s22 = np.sin(2 * pi * x1), np.sin(2 * pi * x2)
        c21, c22 = np.cos(2 * pi * x1), np.cos(2 * pi * x2)
        u[..., 0] = s1 ** 2 * s22
        u[..., 1] = s21 * s2 ** 2
        g[..., 0, 0] = pi * s21 * s22
        g[..., 0, 1] = 2 * pi * s1 ** 2 * c22
        g[..., 1, 0] = 2 * pi * c21 * s2 ** 2
        g[..., 1, 1] = pi * s21 * s22
        v = -0.3 * u
    elif spec.initial_kind == "test2":
        s31, s32 = np.sin(3 * pi * x1), np.sin(3 * pi * x2)
        s21, s22 = np.sin(2 * pi * x1), np.sin(2 * pi * x2)
        u[..., 0] = s31 * s22
        u[..., 1] = s21 * s32
        g[..., 0, 0] = 3 * pi * np.cos(3 * pi * x1) * s22
        g[..., 0, 1] = 2 * pi * s31 * np.cos(2 * pi * x2)
        g[..., 1, 0] = 2 * pi * np.cos(2 * pi * x1) * s32
        g[..., 1, 1] = 3 * pi * s21 * np.cos(3 * pi * x2)
        v = np.zeros(x.shape)
    elif spec.initial_kind == "zero":
        v = np.zeros(x.shape)
    else:
        raise ValueError("custom initial data is nodal; it has no analytic evaluation")
    return u, g, v


@dataclass(frozen=True)
class LipschitzReport:
    radius: float
    lipschitz_F: float
    lipschitz_G: float
    globally_lipschitz: bool


def check_structural_conditions(spec: ModelSpec, radius: float = 1.0, samples: int = 2000,
                                seed: int = 0) -> LipschitzReport:
    """Estimate local Lipschitz constants of F and G on ``|u|_inf <= radius``.

    Warns with :class:`StructuralConditionWarning` when a cubic nonlinearity
    is in use, since no global Lipschitz bound exists then.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(-radius, radius, size=(samples, 2))
    b = rng.uniform(-radius, radius, size=(samples, 2))
    dist = np.linalg.norm(a - b, axis=1)
    ok = dist > 1e-12

    def lip(fun):
        diff = np.linalg.norm(fun(spec, a) - fun(spec, b), axis=1)
        return float(np.max(diff[ok] / dist[ok]))

    lf, lg = lip(eval_F), lip(eval_G)
    global_ok = spec.F_kind != "cubic" and spec.G_kind != "cubic_plus"
    if not global_ok:
        warnings.warn(
            f"nonlinearity F={spec.F_kind}, G={spec.G_kind} is only locally Lipschitz "
            f"(estimated L_F={lf:.3g}, L_G={lg:.3g} on |u|<={radius}); "
            "global growth conditions do not hold",
            StructuralConditionWarning, stacklevel=2,
        )
    return LipschitzReport(radius, lf, lg, global_ok)
