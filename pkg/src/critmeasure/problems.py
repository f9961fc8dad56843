"""Built-in problem instances and the named function registry.

Config files select analytic data from this registry instead of parsing
expressions; every entry is a factory returning a ``SampledFn`` with its
H1 seminorm filled in whenever a closed form exists.
"""

import re

import numpy as np

from .fe_space import SampledFn
from .mesh import uniform
from .pde import LinearFunctionalProblem, ReducedProblem
from .regularizer import CompositeRegularizer

__all__ = [
    "FUNCTION_REGISTRY",
    "PROBLEM_IDS",
    "make_function",
    "build_problem",
]

PROBLEM_IDS = ("linear", "semilinear", "bilinear", "example_lp")


def constant(c):
    return SampledFn.constant(c)


def neg_identity():
    """f(x) = -x."""
    return SampledFn(lambda x: -np.asarray(x, dtype=float), h1_seminorm=1.0)


def affine(intercept, slope):
    """f(x) = intercept + slope*x."""
    a, b = float(intercept), float(slope)
    return SampledFn(lambda x: a + b * np.asarray(x, dtype=float), h1_seminorm=abs(b))


def scaled_square(a):
    """f(x) = a*x^2."""
    a = float(a)
    return SampledFn(lambda x: a * np.asarray(x, dtype=float) ** 2,
                     h1_seminorm=2.0 * abs(a) / np.sqrt(3.0))


def one_plus_sine(amp):
    """f(x) = 1 + amp*sin(2*pi*x)."""
    amp = float(amp)
    return SampledFn(lambda x: 1.0 + amp * np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
                     h1_seminorm=np.sqrt(2.0) * np.pi * abs(amp))


def hinge_ramp(slope, offset):
    """f(x) = max(0, slope*x + offset), continuous piecewise linear."""
    s, o = float(slope), float(offset)
    if s == 0.0:
        active = 1.0 if o > 0.0 else 0.0
    else:
        root = -o / s
        active = np.clip(1.0 - root if s > 0.0 else root, 0.0, 1.0)
    return SampledFn(
        lambda x: np.maximum(0.0, s * np.asarray(x, dtype=float) + o),
        h1_seminorm=abs(s) * np.sqrt(active),
    )


def modulated_sine(amp, freq, growth):
    """f(x) = amp*sin(freq*pi*x)*exp(growth*x)."""
    a, k, r = float(amp), float(freq), float(growth)

    def fn(x):
        x = np.asarray(x, dtype=float)
        return a * np.sin(k * np.pi * x) * np.exp(r * x)

    return SampledFn(fn)


def cosine(amp, freq):
    """f(x) = amp*cos(freq*pi*x)."""
    a, k = float(amp), float(freq)
    return SampledFn(
        lambda x: a * np.cos(k * np.pi * np.asarray(x, dtype=float)),
        h1_seminorm=abs(a) * k * np.pi / np.sqrt(2.0),
    )


FUNCTION_REGISTRY = {
    "constant": constant,
    "neg_identity": neg_identity,
    "affine": affine,
    "scaled_square": scaled_square,
    "one_plus_sine": one_plus_sine,
    "hinge_ramp": hinge_ramp,
    "modulated_sine": modulated_sine,
    "cosine": cosine,
}

_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\(([^)]*)\))?\s*$")


def make_function(text):
    """Build a SampledFn from registry syntax like ``constant(-1)``."""
    match = _CALL_RE.match(text)
    if not match:
        raise ValueError("cannot parse function spec %r" % text)
    name, args = match.group(1), match.group(2)
    if name not in FUNCTION_REGISTRY:
        raise ValueError(
            "unknown function %r (available: %s)"
            % (name, ", ".join(sorted(FUNCTION_REGISTRY)))
        )
    values = []
    if args is not None and args.strip():
        try:
            values = [float(tok) for tok in args.split(",")]
        except ValueError as exc:
            raise ValueError("bad numeric arguments in %r" % text) from exc
    try:
        return FUNCTION_REGISTRY[name](*values)
    except TypeError as exc:
        raise ValueError("wrong number of arguments in %r" % text) from exc


def _instance_defaults(problem_id):
    if problem_id == "linear":
        return dict(
            kind="linear",
            target=scaled_square(100.0),
            source=None,
            beta=0.001,
            lower=constant(-1.0),
            upper=one_plus_sine(0.1),
        )
    if problem_id == "semilinear":
        return dict(
            kind="semilinear",
            target=modulated_sine(2.0, 4.0, 2.0),
            source=cosine(10.0, 8.0),
            beta=0.0055,
            lower=constant(-10.0),
            upper=hinge_ramp(20.0, -5.0),
        )
    if problem_id == "bilinear":
        return dict(
            kind="bilinear",
            target=one_plus_sine(1.0),
            source=cosine(10.0, 8.0),
            beta=0.0001,
            lower=constant(0.0),
            upper=hinge_ramp(20.0, -5.0),
        )
    if problem_id == "example_lp":
        return dict(
            kind=None,
            target=None,
            source=None,
            beta=0.0,
            lower=neg_identity(),
            upper=constant(1.0),
        )
    raise ValueError(
        "unknown problem id %r (available: %s)" % (problem_id, ", ".join(PROBLEM_IDS))
    )


def build_problem(problem_id, n, target=None, source=None, beta=None,
                  lower=None, upper=None):
    """Problem and regularizer for a built-in instance on a uniform mesh.

    Keyword arguments override individual pieces of the instance data.
    """
    data = _instance_defaults(problem_id)
    if target is not None:
        data["target"] = target
    if source is not None:
        data["source"] = source
    if beta is not None:
        data["beta"] = beta
    if lower is not None:
        data["lower"] = lower
    if upper is not None:
        data["upper"] = upper
    reg = CompositeRegularizer(data["beta"], data["lower"], data["upper"])
    if problem_id == "example_lp":
        coeff = SampledFn(lambda x: np.ones(np.shape(x)), h1_seminorm=0.0)
        return LinearFunctionalProblem(coeff), reg
    prob = ReducedProblem(
        data["kind"], data["target"], data["source"], state_mesh=uniform(n)
    )
    return prob, reg
