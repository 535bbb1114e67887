"""Linear model construction: variables, expressions, constraint blocks.

Hourly energy models have tens of thousands of structurally identical rows,
so besides scalar constraints built from :class:`LinExpr`, rows can be added
in vectorized blocks through :meth:`Model.add_rows`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from numbers import Real

import numpy as np
import scipy.sparse as sp

_model_ids = itertools.count()


class ModelError(Exception):
    """Base error for model construction problems."""


class ModelMismatchError(ModelError):
    """A variable from another model was used."""


class ValidationError(ModelError, ValueError):
    """Non-finite coefficient, bad bounds, or incomplete assignment."""


class FrozenModelError(ModelError):
    """The model was modified after being handed to a backend."""


class Domain(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Sense(str, enum.Enum):
    MIN = "min"
    MAX = "max"


def _check_finite(value, what="coefficient"):
    if not math.isfinite(value):
        raise ValidationError(f"non-finite {what}: {value!r}")


class Var:
    """Handle to a single model variable."""

    __slots__ = ("model", "index")

    def __init__(self, model: "Model", index: int):
        self.model = model
        self.index = index

    @property
    def name(self) -> str:
        return self.model.var_name(self.index)

    @property
    def domain(self) -> Domain:
        return self.model._domain[self.index]

    @property
    def bounds(self) -> tuple[float, float]:
        return self.model._lb[self.index], self.model._ub[self.index]

    def set_bounds(self, lo=None, hi=None):
        self.model.set_bounds(self, lo, hi)

    def to_expr(self) -> "LinExpr":
        return LinExpr(self.model, {self.index: 1.0})

    def __hash__(self):
        return hash((id(self.model), self.index))

    def __eq__(self, other):
        return isinstance(other, Var) and other.model is self.model and other.index == self.index

    def __repr__(self):
        return f"Var({self.name})"

    def __add__(self, other):
        return self.to_expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.to_expr() - other

    def __rsub__(self, other):
        return (-self.to_expr()) + other

    def __mul__(self, k):
        return self.to_expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self.to_expr() * -1.0


class LinExpr:
    """Sparse linear expression ``sum(coef * var) + constant``."""

    __slots__ = ("model", "terms", "constant")

    def __init__(self, model: "Model | None" = None, terms=None, constant=0.0):
        self.model = model
        self.terms: dict[int, float] = {}
        self.constant = float(constant)
        _check_finite(self.constant, "constant")
        for idx, coef in (terms or {}).items():
            self._add_term(idx, coef)

    def _add_term(self, idx, coef):
        coef = float(coef)
        _check_finite(coef)
        new = self.terms.get(idx, 0.0) + coef
        if new == 0.0:
            self.terms.pop(idx, None)
        else:
            self.terms[idx] = new

    def _bind(self, model):
        if model is None:
            return
        if self.model is None:
            self.model = model
        elif self.model is not model:
            raise ModelMismatchError("expression mixes variables from different models")

    def copy(self) -> "LinExpr":
        out = LinExpr(self.model, constant=self.constant)
        out.terms = dict(self.terms)
        return out

    @staticmethod
    def lift(obj) -> "LinExpr":
        if isinstance(obj, LinExpr):
            return obj
        if isinstance(obj, Var):
            return obj.to_expr()
        if isinstance(obj, (Real, np.floating, np.integer)):
            return LinExpr(None, constant=float(obj))
        raise TypeError(f"cannot build a linear expression from {type(obj).__name__}")

    def __iadd__(self, other):
        other = LinExpr.lift(other)
        self._bind(other.model)
        for idx, coef in other.terms.items():
            self._add_term(idx, coef)
        self.constant += other.constant
        _check_finite(self.constant, "constant")
        return self

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-LinExpr.lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if not isinstance(k, (Real, np.floating, np.integer)):
            raise TypeError("only scalar multiplication keeps an expression linear")
        k = float(k)
        _check_finite(k)
        out = LinExpr(self.model, constant=self.constant * k)
        if k != 0.0:
            out.terms = {i: c * k for i, c in self.terms.items()}
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x) -> float:
        return self.constant + sum(c * float(x[i]) for i, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g} {self.model.var_name(i)}" for i, c in self.terms.items()] if self.model else []
        return f"LinExpr({' '.join(parts)} {self.constant:+g})"


def quicksum(items) -> LinExpr:
    out = LinExpr()
    for item in items:
        out += item
    return out


class VarArray:
    """A group of variables addressed by position (e.g. one per hour)."""

    def __init__(self, model: "Model", idx: np.ndarray, name: str):
        self.model = model
        self.idx = np.asarray(idx, dtype=np.int64)
        self.name = name

    def __len__(self):
        return len(self.idx)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return Var(self.model, int(self.idx[key]))
        return VarArray(self.model, self.idx[key], self.name)

    def __iter__(self):
        for i in self.idx:
            yield Var(self.model, int(i))

    def sum(self, coef=1.0) -> LinExpr:
        coef = np.broadcast_to(np.asarray(coef, dtype=float), self.idx.shape)
        if not np.all(np.isfinite(coef)):
            raise ValidationError("non-finite coefficient in sum")
        expr = LinExpr(self.model)
        for i, c in zip(self.idx.tolist(), coef.tolist()):
            expr._add_term(i, c)
        return expr

    def __repr__(self):
        return f"VarArray({self.name}, n={len(self)})"


@dataclass
class ConstraintBlock:
    name: str
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    row_offset: int = 0

    @property
    def n_rows(self) -> int:
        return len(self.lo)


@dataclass
class _VarBlock:
    name: str
    start: int
    size: int
    scalar: bool


_SENSES = {"<=", ">=", "=="}


class Model:
    """Mutable MILP container; frozen once handed to a solver backend."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.id = next(_model_ids)
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._domain: list[Domain] = []
        self._var_blocks: list[_VarBlock] = []
        self._blocks: list[ConstraintBlock] = []
        self._n_rows = 0
        self.objective = LinExpr(self)
        self.sense = Sense.MAX
        self.frozen = False
        self.annotations: dict = {}
        self._cache = None

    # -- variables -------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self._lb)

    @property
    def n_rows(self) -> int:
        return self._n_rows

    def _guard(self):
        if self.frozen:
            raise FrozenModelError(f"model {self.name!r} is frozen")

    def _register(self, name, n, lb, ub, domain, scalar):
        self._guard()
        domain = Domain(domain)
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        if domain is Domain.BINARY:
            lb = np.maximum(lb, 0.0)
            ub = np.minimum(ub, 1.0)
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)):
            raise ValidationError(f"NaN bound on {name}")
        if np.any(lb > ub):
            raise ValidationError(f"lower bound exceeds upper bound on {name}")
        start = self.n_vars
        self._lb.extend(lb.tolist())
        self._ub.extend(ub.tolist())
        self._domain.extend([domain] * n)
        self._var_blocks.append(_VarBlock(name, start, n, scalar))
        return start

    def add_var(self, name: str, lb=0.0, ub=math.inf, domain=Domain.CONTINUOUS) -> Var:
        return Var(self, self._register(name, 1, lb, ub, domain, True))

    def add_vars(self, name: str, n: int, lb=0.0, ub=math.inf, domain=Domain.CONTINUOUS) -> VarArray:
        start = self._register(name, n, lb, ub, domain, False)
        return VarArray(self, np.arange(start, start + n), name)

    def set_bounds(self, var, lo=None, hi=None):
        self._guard()
        self._own(var)
        idx = var.idx if isinstance(var, VarArray) else [var.index]
        for i in idx:
            new_lo = self._lb[i] if lo is None else float(lo)
            new_hi = self._ub[i] if hi is None else float(hi)
            if math.isnan(new_lo) or math.isnan(new_hi) or new_lo > new_hi:
                raise ValidationError(f"invalid bounds [{new_lo}, {new_hi}] for {self.var_name(i)}")
            self._lb[i], self._ub[i] = new_lo, new_hi

    def fix(self, var, value):
        self.set_bounds(var, value, value)

    def var_name(self, index: int) -> str:
        for blk in self._var_blocks:
            if blk.start <= index < blk.start + blk.size:
                return blk.name if blk.scalar else f"{blk.name}[{index - blk.start}]"
        return f"x{index}"

    def var_block_names(self) -> list[str]:
        return [b.name for b in self._var_blocks]

    def _own(self, obj):
        model = getattr(obj, "model", None)
        if model is not None and model is not self:
            raise ModelMismatchError(f"{obj!r} does not belong to model {self.name!r}")

    # -- constraints -----------------------------------------------------
    def add_constraint(self, lhs, sense: str, rhs=0.0, name: str | None = None) -> ConstraintBlock:
        """Add ``lhs <sense> rhs`` where both sides are linear expressions."""
        self._guard()
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {sorted(_SENSES)}")
        lhs, rhs = LinExpr.lift(lhs), LinExpr.lift(rhs)
        for side in (lhs, rhs):
            self._own(side)
        expr = lhs - rhs
        bound = 0.0 - expr.constant  # never -0.0
        cols = np.fromiter(expr.terms.keys(), dtype=np.int64, count=len(expr.terms))
        vals = np.fromiter(expr.terms.values(), dtype=float, count=len(expr.terms))
        lo = bound if sense in (">=", "==") else -math.inf
        hi = bound if sense in ("<=", "==") else math.inf
        return self._append_block(
            name or f"c{self._n_rows}", np.zeros(len(cols), dtype=np.int64), cols, vals, [lo], [hi]
        )

    def add_rows(self, name: str, terms, sense: str, rhs=0.0, n: int | None = None) -> ConstraintBlock:
        """Add ``n`` rows: row ``i`` is ``sum_k coef_k[i] * var_k[i] <sense> rhs[i]``.

        ``terms`` is a list of ``(VarArray | Var, coef)`` pairs. A scalar
        ``Var`` appears in every row; coefficients broadcast to ``n``.
        """
        self._guard()
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {sorted(_SENSES)}")
        if n is None:
            lengths = [len(v) for v, _ in terms if isinstance(v, VarArray)]
            if not lengths:
                raise ValueError("row count cannot be inferred without a VarArray term")
            n = lengths[0]
        rows, cols, vals = [], [], []
        base = np.arange(n, dtype=np.int64)
        for var, coef in terms:
            self._own(var)
            coef = np.broadcast_to(np.asarray(coef, dtype=float), (n,))
            if not np.all(np.isfinite(coef)):
                raise ValidationError(f"non-finite coefficient in block {name!r}")
            if isinstance(var, VarArray):
                if len(var) != n:
                    raise ValueError(f"block {name!r}: {var.name} has length {len(var)}, expected {n}")
                idx = var.idx
            else:
                idx = np.full(n, var.index, dtype=np.int64)
            keep = coef != 0.0
            rows.append(base[keep])
            cols.append(idx[keep])
            vals.append(coef[keep])
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (n,)).copy()
        if not np.all(np.isfinite(rhs)):
            raise ValidationError(f"non-finite right-hand side in block {name!r}")
        lo = rhs if sense in (">=", "==") else np.full(n, -math.inf)
        hi = rhs if sense in ("<=", "==") else np.full(n, math.inf)
        cat = (lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt))
        return self._append_block(name, cat(rows, np.int64), cat(cols, np.int64), cat(vals, float), lo, hi)

    def _append_block(self, name, rows, cols, vals, lo, hi):
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ModelMismatchError(f"constraint {name!r} references unknown variables")
        block = ConstraintBlock(
            name, rows, cols, vals, np.asarray(lo, float), np.asarray(hi, float), self._n_rows
        )
        self._blocks.append(block)
        self._n_rows += block.n_rows
        return block

    @property
    def blocks(self) -> list[ConstraintBlock]:
        return list(self._blocks)

    def row_name(self, row: int) -> str:
        for blk in self._blocks:
            if blk.row_offset <= row < blk.row_offset + blk.n_rows:
                return blk.name if blk.n_rows == 1 else f"{blk.name}[{row - blk.row_offset}]"
        raise IndexError(row)

    # -- objective -------------------------------------------------------
    def set_objective(self, expr, sense=Sense.MAX):
        self._guard()
        expr = LinExpr.lift(expr)
        self._own(expr)
        self.objective = expr.copy()
        self.objective.model = self
        self.sense = Sense(sense)

    # -- assembly --------------------------------------------------------
    def freeze(self):
        self.frozen = True
        return self

    def arrays(self):
        """Return ``(c, const, A, lo, hi, lb, ub, integrality)`` in CSR form."""
        if self._cache is not None and self.frozen:
            return self._cache
        n = self.n_vars
        c = np.zeros(n)
        for i, coef in self.objective.terms.items():
            c[i] = coef
        if self._blocks:
            rows = np.concatenate([b.rows + b.row_offset for b in self._blocks])
            cols = np.concatenate([b.cols for b in self._blocks])
            vals = np.concatenate([b.vals for b in self._blocks])
            lo = np.concatenate([b.lo for b in self._blocks])
            hi = np.concatenate([b.hi for b in self._blocks])
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = lo = hi = np.zeros(0)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(self._n_rows, n))
        integrality = np.array([d is not Domain.CONTINUOUS for d in self._domain], dtype=np.int8)
        out = (c, self.objective.constant, A, lo, hi, np.array(self._lb), np.array(self._ub), integrality)
        if self.frozen:
            self._cache = out
        return out

    def stats(self) -> dict:
        counts = {d.value: 0 for d in Domain}
        for d in self._domain:
            counts[d.value] += 1
        return {"variables": self.n_vars, "constraints": self._n_rows, **counts}

    def to_lp_text(self) -> str:
        """Human-readable listing, one named constraint per line."""
        c, const, A, lo, hi, lb, ub, integ = self.arrays()
        fmt = lambda coefs, idx: " ".join(f"{v:+.12g} {self.var_name(j)}" for j, v in zip(idx, coefs)) or "0"
        lines = [f"\\ model {self.name}", "Maximize" if self.sense is Sense.MAX else "Minimize"]
        nz = np.flatnonzero(c)
        lines.append(f" obj: {fmt(c[nz], nz)} {const:+.12g}")
        lines.append("Subject To")
        A = A.tocsr()
        for r in range(A.shape[0]):
            seg = slice(A.indptr[r], A.indptr[r + 1])
            body = fmt(A.data[seg], A.indices[seg])
            name = self.row_name(r)
            if lo[r] == hi[r]:
                lines.append(f" {name}: {body} = {hi[r]:.12g}")
            else:
                if math.isfinite(lo[r]):
                    lines.append(f" {name}: {body} >= {lo[r]:.12g}")
                if math.isfinite(hi[r]):
                    lines.append(f" {name}: {body} <= {hi[r]:.12g}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lines.append(f" {lb[j]:.12g} <= {self.var_name(j)} <= {ub[j]:.12g}")
        ints = [self.var_name(j) for j in np.flatnonzero(integ)]
        if ints:
            lines.append("General")
            lines.extend(f" {v}" for v in ints)
        lines.append("End")
        return "\n".join(lines) + "\n"
