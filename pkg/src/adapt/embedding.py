"""Pooled-embedding and latent-guidance vector math.

Storage is 32-bit float throughout; dot products and norms accumulate in
64-bit to keep projection residuals small at realistic dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, RangeViolation, ZeroNorm, ZeroNormBase

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class PemParams:
    """Pooled-embedding combination weights.

    lambda_pool scales the rare direction's contribution; s, p, epsilon are
    the sigmoid shift factor's range, sharpness, and similarity threshold.
    """

    lambda_pool: float = 0.3
    s: float = 2.0
    p: float = 100.0
    epsilon: float = 0.93

    def __post_init__(self):
        if not 0.0 <= self.lambda_pool <= 1.0:
            raise RangeViolation(f"lambda_pool must be in [0,1]: {self.lambda_pool}")
        if self.s <= 0:
            raise RangeViolation(f"s must be > 0: {self.s}")
        if self.p <= 0:
            raise RangeViolation(f"p must be > 0: {self.p}")
        if not 0.0 < self.epsilon < 1.0:
            raise RangeViolation(f"epsilon must be in (0,1): {self.epsilon}")


@dataclass(frozen=True)
class LsmParams:
    """Latent attribute-guidance strength."""

    lambda_attr: float = 0.15

    def __post_init__(self):
        if not 0.0 <= self.lambda_attr <= 1.0:
            raise RangeViolation(f"lambda_attr must be in [0,1]: {self.lambda_attr}")


def as_vector(values) -> np.ndarray:
    """Coerce to a 1-D float32 vector, rejecting NaN/Inf and empty input."""
    v = np.asarray(values, dtype=np.float32).reshape(-1)
    if v.size < 1:
        raise DimMismatch("vector must have dim >= 1")
    if not np.all(np.isfinite(v)):
        raise RangeViolation("vector has non-finite entries")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimMismatch(f"dims differ: {a.shape[0]} vs {b.shape[0]}")


def _dot64(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


def norm(a) -> float:
    a = as_vector(a)
    return math.sqrt(_dot64(a, a))


def project_out(a, b) -> np.ndarray:
    """Component of a orthogonal to b: a - (b.a / |b|^2) b."""
    a, b = as_vector(a), as_vector(b)
    _check_same_dim(a, b)
    nb2 = _dot64(b, b)
    if math.sqrt(nb2) < NORM_FLOOR:
        raise ZeroNormBase("projection base has near-zero norm")
    coef = _dot64(b, a) / nb2
    return a - np.float32(coef) * b


def projection_coefficient(a, b) -> float:
    """Scalar c with a = project_out(a, b) + c*b (in exact arithmetic)."""
    a, b = as_vector(a), as_vector(b)
    _check_same_dim(a, b)
    nb2 = _dot64(b, b)
    if math.sqrt(nb2) < NORM_FLOOR:
        raise ZeroNormBase("projection base has near-zero norm")
    return _dot64(b, a) / nb2


def cosine_similarity(a, b) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_same_dim(a, b)
    na, nb = math.sqrt(_dot64(a, a)), math.sqrt(_dot64(b, b))
    if na < NORM_FLOOR or nb < NORM_FLOOR:
        raise ZeroNorm("cosine of a near-zero vector")
    return max(-1.0, min(1.0, _dot64(a, b) / (na * nb)))


def shift_factor(gamma: float, params: PemParams) -> float:
    """Sigmoid gate in (0, s): s / (1 + exp(-p*(gamma - epsilon)))."""
    if not -1.0 <= gamma <= 1.0:
        raise RangeViolation(f"gamma must be in [-1,1]: {gamma}")
    x = -params.p * (gamma - params.epsilon)
    if x > 709.0:  # exp(x) would overflow a double; use the asymptotic tail
        return params.s * math.exp(-x)
    return params.s / (1.0 + math.exp(x))


def pem_combine(c_f, c_r, params: PemParams) -> np.ndarray:
    """Blend the frequent embedding with the gated rare-only direction.

    Returns (1 - lambda) * c_f + lambda * shift * (c_r with its c_f component
    removed). With lambda_pool = 0 the frequent embedding is returned bitwise.
    """
    c_f, c_r = as_vector(c_f), as_vector(c_r)
    _check_same_dim(c_f, c_r)
    if math.sqrt(_dot64(c_f, c_f)) < NORM_FLOOR:
        raise ZeroNormBase("frequent embedding has near-zero norm")
    if params.lambda_pool == 0.0:
        return c_f.copy()
    gamma = cosine_similarity(c_r, c_f)
    delta = shift_factor(gamma, params)
    rare_dir = project_out(c_r, c_f)
    lam = np.float32(params.lambda_pool)
    return (np.float32(1.0) - lam) * c_f + lam * np.float32(delta) * rare_dir


def pem_gate(c_f, c_r, params: PemParams) -> tuple:
    """(gamma, delta) diagnostics for the pooled combination."""
    gamma = cosine_similarity(as_vector(c_r), as_vector(c_f))
    return gamma, shift_factor(gamma, params)


def lsm_orthogonalize(l_attr, l_null) -> np.ndarray:
    """Attribute direction with its unconditional component removed."""
    return project_out(l_attr, l_null)


def lsm_orthogonalize_rows(l_attr, l_null) -> np.ndarray:
    """Row-wise variant for [tokens x channels] layouts: each row of l_attr
    is orthogonalized against the matching row of l_null."""
    a = np.asarray(l_attr, dtype=np.float32)
    b = np.asarray(l_null, dtype=np.float32)
    if a.shape != b.shape or a.ndim != 2:
        raise DimMismatch(f"row mode needs equal 2-D shapes: {a.shape} vs {b.shape}")
    return np.stack([project_out(a[i], b[i]) for i in range(a.shape[0])])


def lsm_combine(l_base, l_prime, params: LsmParams) -> np.ndarray:
    """Add the scaled guidance direction: l_base + lambda_attr * l_prime.

    Identity laws: lambda_attr = 0 or an all-zero direction returns l_base
    bitwise.
    """
    l_base, l_prime = as_vector(l_base), as_vector(l_prime)
    _check_same_dim(l_base, l_prime)
    if params.lambda_attr == 0.0 or not np.any(l_prime):
        return l_base.copy()
    return l_base + np.float32(params.lambda_attr) * l_prime


def select_attribute_index(p_trans: int, m: int) -> int:
    """1-based attribute slot for the current transition counter: min(p+1, m)."""
    if m < 1:
        raise RangeViolation(f"m must be >= 1: {m}")
    if not 0 <= p_trans <= m:
        raise RangeViolation(f"p_trans must be in [0, {m}]: {p_trans}")
    return min(p_trans + 1, m)


def gram_schmidt_combine(c_tar, c_prog, lam: float) -> np.ndarray:
    """Single-embedding ablation: (1-lam)*c_prog + lam*project_out(c_tar, c_prog)."""
    if not 0.0 <= lam <= 1.0:
        raise RangeViolation(f"lambda must be in [0,1]: {lam}")
    c_tar, c_prog = as_vector(c_tar), as_vector(c_prog)
    _check_same_dim(c_tar, c_prog)
    if math.sqrt(_dot64(c_prog, c_prog)) < NORM_FLOOR:
        raise ZeroNormBase("progressive embedding has near-zero norm")
    if lam == 0.0:
        return c_prog.copy()
    ortho = project_out(c_tar, c_prog)
    lamf = np.float32(lam)
    return (np.float32(1.0) - lamf) * c_prog + lamf * ortho
