"""Build norms, immersions and metrics from JSON-style specifications."""

import ast
import math
import operator

import numpy as np

from .exceptions import DomainError
from .norms import EllipsoidNorm, RandersNorm, Sum2Norm, plane_from_alpha
from .planar import (EuclideanNorm2, PaperPhi0, Randers2, ScaledEllipseNorm, Sum2Planar,
                     restrict_norm)
from .surfaces import (FrozenMetric, GraphImmersion, InducedMetric, RotationMetric,
                       graph_surface)

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos}


def parse_number(value):
    """A float from a number or an arithmetic string such as ``"pi/4"``."""
    if isinstance(value, bool):
        raise DomainError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise DomainError(f"expected a number, got {value!r}")
    try:
        tree = ast.parse(value, mode="eval")
    except SyntaxError:
        raise DomainError(f"cannot parse number {value!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise DomainError(f"unsupported expression in {value!r}")

    return float(ev(tree))


def parse_array(value):
    if isinstance(value, (list, tuple)):
        return np.array([parse_array(v) for v in value], dtype=float)
    return parse_number(value)


def _fields(spec, required, optional=()):
    if not isinstance(spec, dict):
        raise DomainError(f"expected an object, got {spec!r}")
    unknown = set(spec) - set(required) - set(optional) - {"family"}
    if unknown:
        raise DomainError(f"unknown field {sorted(unknown)[0]!r} in {spec.get('family')} spec")
    missing = [k for k in required if k not in spec]
    if missing:
        raise DomainError(f"missing field {missing[0]!r} in {spec.get('family')} spec")
    return {k: parse_array(spec[k]) for k in list(required) + list(optional) if k in spec}


def build_norm(spec):
    """Norm on R^3 from ``{"family": ..., ...}``."""
    if isinstance(spec, str):
        spec = {"family": spec}
    family = spec.get("family") if isinstance(spec, dict) else None
    if family == "euclidean":
        _fields(spec, ())
        return EllipsoidNorm(np.eye(3))
    if family == "ellipsoid":
        return EllipsoidNorm(**_fields(spec, ("Q",)))
    if family == "randers":
        f = _fields(spec, ("Q", "b"))
        norm = RandersNorm(f["Q"], f["b"])
        if not norm.admissible:
            raise DomainError("randers spec violates b' Q^-1 b < 1")
        return norm
    if family == "sum2":
        f = _fields(spec, ("Q1", "Q2"))
        return Sum2Norm(f["Q1"], f["Q2"])
    raise DomainError(f"unknown norm family {family!r}")


def build_planar(spec):
    """Planar norm from a family name or ``{"family": ..., ...}``."""
    if isinstance(spec, str):
        spec = {"family": spec}
    family = spec.get("family") if isinstance(spec, dict) else None
    if family == "euclidean":
        _fields(spec, ())
        return EuclideanNorm2()
    if family == "paper_phi0":
        _fields(spec, ())
        return PaperPhi0()
    if family == "scaled_ellipse":
        return ScaledEllipseNorm(**_fields(spec, ("M",)))
    if family == "randers2":
        f = _fields(spec, ("M", "b"))
        norm = Randers2(f["M"], f["b"])
        if float(norm.b @ np.linalg.solve(norm.M, norm.b)) >= 1.0:
            raise DomainError("randers2 spec violates b' M^-1 b < 1")
        return norm
    if family == "sum2":
        f = _fields(spec, ("M1", "M2"))
        return Sum2Planar(f["M1"], f["M2"])
    if family == "restriction":
        _check_keys(spec, {"norm", "alpha"})
        a, b = parse_array(spec["alpha"])
        return restrict_norm(build_norm(spec["norm"]), plane_from_alpha(a, b))
    raise DomainError(f"unknown planar norm family {family!r}")


def build_immersion(spec):
    if isinstance(spec, str):
        return graph_surface(spec)
    family = spec.get("family") if isinstance(spec, dict) else None
    if family != "graph":
        raise DomainError(f"unknown immersion family {family!r}")
    unknown = set(spec) - {"family", "name", "coefficients"}
    if unknown:
        raise DomainError(f"unknown field {sorted(unknown)[0]!r} in graph spec")
    if "name" in spec:
        return graph_surface(spec["name"])
    if "coefficients" not in spec:
        raise DomainError("graph spec needs 'name' or 'coefficients'")
    coeffs = {}
    for row in spec["coefficients"]:
        if len(row) != 3:
            raise DomainError("coefficients rows are [i, j, c]")
        i, j, c = row
        if not (isinstance(i, int) and isinstance(j, int)) or i + j > 4:
            raise DomainError("exponents must be integers of total degree at most 4")
        coeffs[(i, j)] = parse_number(c)
    return GraphImmersion(coeffs)


def build_metric(spec):
    family = spec.get("family") if isinstance(spec, dict) else None
    if family == "frozen":
        _check_keys(spec, {"phi0"})
        return FrozenMetric(build_planar(spec["phi0"]))
    if family == "rotation":
        _check_keys(spec, {"phi0"})
        return RotationMetric(build_planar(spec["phi0"]))
    if family == "induced":
        _check_keys(spec, {"immersion", "norm"})
        return InducedMetric(build_immersion(spec["immersion"]), build_norm(spec["norm"]))
    raise DomainError(f"unknown metric family {family!r}")


def _check_keys(spec, required):
    unknown = set(spec) - required - {"family"}
    if unknown:
        raise DomainError(f"unknown field {sorted(unknown)[0]!r} in {spec['family']} spec")
    missing = required - set(spec)
    if missing:
        raise DomainError(f"missing field {sorted(missing)[0]!r} in {spec['family']} spec")
