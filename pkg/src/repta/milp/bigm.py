"""Exact linearization of binary x bounded-continuous products."""

import math

from .model import Domain, Model, ValidationError, Var


def big_m_product(model: Model, b: Var, w: Var, name: str | None = None) -> Var:
    """Return ``z`` with ``z == b * w`` at every integer-feasible point.

    ``w`` must have bounds ``[0, W]`` with finite ``W``; ``W`` doubles as
    the (tight) big-M constant.
    """
    if b.domain is not Domain.BINARY:
        raise ValidationError(f"{b.name} is not binary")
    w_lo, W = w.bounds
    if not math.isfinite(W):
        raise ValidationError(f"{w.name} has no finite upper bound; big-M would be unbounded")
    if w_lo < 0:
        raise ValidationError(f"{w.name} must be non-negative, got lower bound {w_lo}")
    name = name or f"{b.name}*{w.name}"
    z = model.add_var(name, 0.0, W)
    model.add_constraint(z - W * b, "<=", 0.0, name=f"{name}:ub_b")
    model.add_constraint(z - w, "<=", 0.0, name=f"{name}:ub_w")
    model.add_constraint(z - w - W * b, ">=", -W, name=f"{name}:lb")
    return z
