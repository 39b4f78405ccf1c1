"""Problem representation, validation and JSON problem files.

Objectives are convex quadratics ``x -> 0.5 x'Qx + c'x + d``; constraints are
linear equalities/inequalities, convex quadratic inequalities and
second-order-cone constraints ``||Ax + b|| <= c'x + d``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cone import ConeError, DimensionMismatch, OrderingCone, cone_from_halfspaces, cone_from_rays, natural_cone

TAU_PSD = 1e-8

LINEAR_EQ = "linear_eq"
LINEAR_INEQ = "linear_ineq"
QUADRATIC_INEQ = "quadratic_ineq"
SOC = "soc"
KINDS = (LINEAR_EQ, LINEAR_INEQ, QUADRATIC_INEQ, SOC)


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class NotCConvex(ValidationError):
    def __init__(self, ray, min_eig):
        self.ray = np.asarray(ray)
        self.min_eig = float(min_eig)
        super().__init__(
            f"objectives are not C-convex: weighted Hessian for dual ray {self.ray.tolist()} "
            f"has eigenvalue {self.min_eig:.3g}"
        )


def _vec(x, n=None, what="vector"):
    v = np.asarray(x, dtype=float).ravel()
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} contains non-finite entries")
    return v


def _mat(x, shape=None, what="matrix"):
    m = np.atleast_2d(np.asarray(x, dtype=float))
    if shape is not None and m.shape != shape:
        raise DimensionMismatch(f"{what} has shape {m.shape}, expected {shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{what} contains non-finite entries")
    return m


def min_eigenvalue(Q):
    if Q.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0])


@dataclass(frozen=True, eq=False)
class QuadraticFunction:
    """``x -> 0.5 x'Qx + c'x + d``; ``Q`` is None for affine functions."""

    c: np.ndarray
    Q: np.ndarray | None = None
    d: float = 0.0

    def __post_init__(self):
        c = _vec(self.c, what="linear coefficient")
        object.__setattr__(self, "c", c)
        if self.Q is not None:
            Q = _mat(self.Q, (c.size, c.size), "quadratic coefficient")
            if not np.allclose(Q, Q.T, atol=1e-12, rtol=1e-10):
                raise ValidationError("quadratic coefficient must be symmetric")
            Q = 0.5 * (Q + Q.T)
            object.__setattr__(self, "Q", None if not np.any(Q) else Q)
        if not np.isfinite(self.d):
            raise ValidationError("constant term must be finite")
        object.__setattr__(self, "d", float(self.d))

    @property
    def n(self):
        return self.c.size

    @property
    def hessian(self):
        return np.zeros((self.n, self.n)) if self.Q is None else self.Q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = self.c @ x + self.d
        if self.Q is not None:
            val += 0.5 * x @ self.Q @ x
        return float(val)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.c.copy() if self.Q is None else self.Q @ x + self.c

    def to_dict(self):
        out = {"c": self.c.tolist(), "d": self.d}
        if self.Q is not None:
            out["Q"] = self.Q.tolist()
        return out

    @classmethod
    def from_dict(cls, obj, n):
        c = obj.get("c", np.zeros(n))
        return cls(_vec(c, n, "objective c"), obj.get("Q"), obj.get("d", 0.0))


@dataclass(frozen=True, eq=False)
class Constraint:
    """One constraint of the feasible set.

    ``linear_eq``: ``a'x = b``; ``linear_ineq``: ``a'x <= b``;
    ``quadratic_ineq``: ``fn(x) <= 0``; ``soc``: ``||A x + b|| <= c'x + d``.
    Use the classmethod constructors.
    """

    kind: str
    a: np.ndarray | None = None
    b: float | np.ndarray | None = None
    fn: QuadraticFunction | None = None
    A: np.ndarray | None = None
    c: np.ndarray | None = None
    d: float | None = None

    @classmethod
    def linear_eq(cls, a, b):
        return cls(LINEAR_EQ, a=_vec(a, what="a"), b=float(b))

    @classmethod
    def linear_ineq(cls, a, b):
        return cls(LINEAR_INEQ, a=_vec(a, what="a"), b=float(b))

    @classmethod
    def quadratic_ineq(cls, fn):
        if fn.Q is not None and min_eigenvalue(fn.Q) < -TAU_PSD:
            raise ValidationError("quadratic constraint is not convex (Q not PSD)")
        return cls(QUADRATIC_INEQ, fn=fn)

    @classmethod
    def soc(cls, A, b, c, d):
        A = _mat(A, what="soc A")
        return cls(SOC, A=A, b=_vec(b, A.shape[0], "soc b"), c=_vec(c, A.shape[1], "soc c"), d=float(d))

    @property
    def n(self):
        if self.kind in (LINEAR_EQ, LINEAR_INEQ):
            return self.a.size
        if self.kind == QUADRATIC_INEQ:
            return self.fn.n
        return self.A.shape[1]

    def violation(self, x):
        """Amount by which ``x`` violates the constraint (0 when satisfied)."""
        x = np.asarray(x, dtype=float)
        if self.kind == LINEAR_EQ:
            return abs(float(self.a @ x) - self.b)
        if self.kind == LINEAR_INEQ:
            return max(0.0, float(self.a @ x) - self.b)
        if self.kind == QUADRATIC_INEQ:
            return max(0.0, self.fn(x))
        return max(0.0, float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d)))

    def to_dict(self):
        if self.kind in (LINEAR_EQ, LINEAR_INEQ):
            return {"type": self.kind, "a": self.a.tolist(), "b": self.b}
        if self.kind == QUADRATIC_INEQ:
            out = {"type": self.kind, "c": self.fn.c.tolist(), "d": self.fn.d}
            out["Q"] = self.fn.hessian.tolist()
            return out
        return {"type": SOC, "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c.tolist(), "d": self.d}

    @classmethod
    def from_dict(cls, obj, n):
        kind = obj.get("type")
        if kind in (LINEAR_EQ, LINEAR_INEQ):
            a = _vec(obj["a"], n, "constraint a")
            return cls.linear_eq(a, obj["b"]) if kind == LINEAR_EQ else cls.linear_ineq(a, obj["b"])
        if kind == QUADRATIC_INEQ:
            fn = QuadraticFunction(_vec(obj.get("c", np.zeros(n)), n, "constraint c"), obj.get("Q"), obj.get("d", 0.0))
            return cls.quadratic_ineq(fn)
        if kind in (SOC, "second_order_cone"):
            A = _mat(obj["A"], what="soc A")
            if A.shape[1] != n:
                raise DimensionMismatch(f"soc A has {A.shape[1]} columns, expected {n}")
            return cls.soc(A, obj["b"], obj["c"], obj["d"])
        raise ParseError(f"unknown constraint type {kind!r}")


@dataclass(frozen=True, eq=False)
class VectorProblem:
    """``min f(x)`` over the constraints, ordered by ``cone``."""

    n: int
    objectives: tuple
    constraints: tuple = ()
    cone: OrderingCone | None = None
    name: str = "problem"
    _certificate: object = field(default=None, repr=False)

    def __post_init__(self):
        objectives = tuple(self.objectives)
        constraints = tuple(self.constraints)
        object.__setattr__(self, "objectives", objectives)
        object.__setattr__(self, "constraints", constraints)
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError("n must be a positive integer")
        if len(objectives) < 2:
            raise ValidationError("a vector problem needs at least two objectives")
        for f in objectives:
            if f.n != self.n:
                raise DimensionMismatch(f"objective has {f.n} variables, expected {self.n}")
        for con in constraints:
            if con.n != self.n:
                raise DimensionMismatch(f"constraint has {con.n} variables, expected {self.n}")
        cone = self.cone if self.cone is not None else natural_cone(len(objectives))
        if cone.dim != len(objectives):
            raise DimensionMismatch(f"cone has dimension {cone.dim}, problem has {len(objectives)} objectives")
        object.__setattr__(self, "cone", cone)

    @property
    def q(self):
        return len(self.objectives)

    @property
    def hessians(self):
        return np.array([f.hessian for f in self.objectives])

    @property
    def linear_terms(self):
        return np.array([f.c for f in self.objectives])

    @property
    def constants(self):
        return np.array([f.d for f in self.objectives])

    def with_cone(self, cone):
        return VectorProblem(self.n, self.objectives, self.constraints, cone, self.name)

    def to_dict(self):
        out = {
            "name": self.name,
            "n": int(self.n),
            "objectives": [f.to_dict() for f in self.objectives],
            "constraints": [c.to_dict() for c in self.constraints],
        }
        if not self.cone.is_natural():
            out["cone"] = self.cone.to_dict()
        return out


def evaluate_objectives(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({p.n},)")
    return np.array([f(x) for f in p.objectives])


def max_violation(p, x):
    return max((c.violation(x) for c in p.constraints), default=0.0)


@dataclass(frozen=True)
class ConvexityCertificate:
    dual_rays: np.ndarray
    min_eigenvalues: np.ndarray


def check_c_convexity(objectives, dual_rays):
    """Minimum eigenvalue of ``sum_i w_i Q_i`` for each weight ``w``.

    Raises :class:`NotCConvex` for the first weight below ``-TAU_PSD``.
    """
    hessians = np.array([f.hessian for f in objectives])
    eigs = []
    for w in np.atleast_2d(dual_rays):
        e = min_eigenvalue(np.tensordot(w, hessians, axes=1))
        if e < -TAU_PSD:
            raise NotCConvex(w, e)
        eigs.append(e)
    return ConvexityCertificate(np.array(dual_rays, dtype=float), np.array(eigs))


def validate_convexity(p):
    """Certificate that ``w' f`` is convex for every extreme ray ``w`` of C+.

    Checking the extreme rays suffices: the weighted Hessian is linear in ``w``.
    """
    if p._certificate is None:
        object.__setattr__(p, "_certificate", check_c_convexity(p.objectives, p.cone.dual_rays))
    return p._certificate


def _parse_cone(obj, q):
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ParseError("cone must be an object with 'rays' or 'halfspaces'")
    if "rays" in obj:
        return cone_from_rays(obj["rays"])
    if "halfspaces" in obj:
        return cone_from_halfspaces(obj["halfspaces"])
    raise ParseError("cone must contain 'rays' or 'halfspaces'")


def problem_from_dict(obj):
    if not isinstance(obj, dict):
        raise ParseError("problem file must contain a JSON object")
    try:
        n = obj["n"]
        raw_objectives = obj["objectives"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(n, int) or isinstance(n, bool):
        raise ValidationError("n must be an integer")
    if not isinstance(raw_objectives, list):
        raise ParseError("objectives must be a list")
    try:
        objectives = [QuadraticFunction.from_dict(o, n) for o in raw_objectives]
        constraints = [Constraint.from_dict(c, n) for c in obj.get("constraints", [])]
        cone = _parse_cone(obj.get("cone"), len(objectives))
        p = VectorProblem(n, objectives, constraints, cone, obj.get("name", "problem"))
    except (DimensionMismatch, ConeError) as exc:
        raise ValidationError(str(exc)) from exc
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed problem: {exc}") from exc
    validate_convexity(p)
    return p


def parse_problem(text):
    """Parse and validate a JSON problem file (``bytes`` or ``str``)."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("problem file is not valid UTF-8") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return problem_from_dict(obj)


def serialize_problem(p):
    return json.dumps(p.to_dict(), indent=2)


def load_problem(path):
    with open(path, "rb") as fh:
        return parse_problem(fh.read())
