"""Covariance functions built as sums of simple terms.

Three term types are available:

* :class:`SE` -- ``sf^2 exp(-|x - x'|^2 / (2 l^2))``
* :class:`Periodic` -- ``exp(-2 sin^2(nu pi (x - x')))``, 1-D inputs only,
  unit amplitude
* :class:`Noise` -- ``sn^2`` when the two arguments are the *same
  observation* (index identity, never numeric equality)

A :class:`KernelExpr` is an ordered sum of terms.  Kernels can be
written as text, e.g. ``"se(sf=1.27,l=1) + noise(sn=0.3!)"``; a trailing
``!`` holds a parameter fixed during optimization.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import (
    DimensionMismatch,
    DuplicateNoise,
    NonPositiveParam,
    ParseError,
    PeriodicOnMultiDim,
)


@dataclass(frozen=True)
class SE:
    sigma_f: float
    length: float
    fixed: frozenset = field(default_factory=frozenset)

    kind = "se"
    param_names = ("sf", "l")

    def values(self):
        return (self.sigma_f, self.length)

    def with_values(self, vals):
        return replace(self, sigma_f=float(vals[0]), length=float(vals[1]))


@dataclass(frozen=True)
class Periodic:
    nu: float
    fixed: frozenset = field(default_factory=frozenset)

    kind = "periodic"
    param_names = ("nu",)

    def values(self):
        return (self.nu,)

    def with_values(self, vals):
        return replace(self, nu=float(vals[0]))


@dataclass(frozen=True)
class Noise:
    sigma_n: float
    fixed: frozenset = field(default_factory=frozenset)

    kind = "noise"
    param_names = ("sn",)

    def values(self):
        return (self.sigma_n,)

    def with_values(self, vals):
        return replace(self, sigma_n=float(vals[0]))


def _check_term(term):
    vals = term.values()
    if not all(math.isfinite(v) for v in vals):
        raise NonPositiveParam(f"{term.kind}: parameters must be finite, got {vals}")
    if isinstance(term, Noise):
        if term.sigma_n < 0:
            raise NonPositiveParam(f"noise: sn must be >= 0, got {term.sigma_n}")
    elif min(vals) <= 0:
        raise NonPositiveParam(f"{term.kind}: parameters must be > 0, got {vals}")
    unknown = set(term.fixed) - set(term.param_names)
    if unknown:
        raise NonPositiveParam(f"{term.kind}: unknown fixed parameters {sorted(unknown)}")


@dataclass(frozen=True)
class KernelExpr:
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ValueError("a kernel needs at least one term")
        for t in terms:
            _check_term(t)
        if sum(isinstance(t, Noise) for t in terms) > 1:
            raise DuplicateNoise("at most one noise term is allowed")

    def __add__(self, other):
        if isinstance(other, (SE, Periodic, Noise)):
            other = KernelExpr((other,))
        return KernelExpr(self.terms + other.terms)

    @property
    def noise(self):
        for t in self.terms:
            if isinstance(t, Noise):
                return t
        return None

    @property
    def noise_variance(self) -> float:
        n = self.noise
        return 0.0 if n is None else n.sigma_n**2

    def without_noise(self):
        return KernelExpr(tuple(t for t in self.terms if not isinstance(t, Noise)))

    def __str__(self):
        return format_kernel_spec(self)


def kernel(*terms) -> KernelExpr:
    return KernelExpr(tuple(terms))


def as_inputs(xs) -> np.ndarray:
    """Coerce to an ``(n, d)`` float array; 1-D input means ``d = 1``."""
    a = np.asarray(xs, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    elif a.ndim != 2:
        raise DimensionMismatch(f"inputs must be 1-D or 2-D, got {a.ndim}-D")
    return a


def _term_cross(term, x1, x2):
    if isinstance(term, SE):
        return _backend.se_cov(x1, x2, term.sigma_f, term.length)
    if isinstance(term, Periodic):
        if x1.shape[1] != 1:
            raise PeriodicOnMultiDim(f"periodic term needs 1-D inputs, got d={x1.shape[1]}")
        return _backend.periodic_cov(x1[:, 0], x2[:, 0], term.nu)
    return np.zeros((x1.shape[0], x2.shape[0]))


def _cross_matrix(k, x1, x2):
    if x1.shape[1] != x2.shape[1]:
        raise DimensionMismatch(f"input dimensions differ: {x1.shape[1]} vs {x2.shape[1]}")
    out = np.zeros((x1.shape[0], x2.shape[0]))
    for term in k.terms:
        if not isinstance(term, Noise):
            out += _term_cross(term, x1, x2)
    return out


def eval_kernel(k: KernelExpr, x, x_prime, same_point: bool = False) -> float:
    """Covariance between two single inputs.

    ``same_point`` says whether ``x`` and ``x_prime`` are the same
    observation, which is the only case in which noise contributes.
    """
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"inputs have shapes {a.shape} and {b.shape}")
    val = float(_cross_matrix(k, a[None, :], b[None, :])[0, 0])
    if same_point:
        val += k.noise_variance
    return val


def gram(k: KernelExpr, xs) -> np.ndarray:
    """``K[i, j] = k(x_i, x_j)`` with noise on the diagonal only."""
    x = as_inputs(xs)
    if x.shape[0] == 0:
        raise DimensionMismatch("need at least one input")
    out = np.zeros((x.shape[0], x.shape[0]))
    for term in k.terms:
        if isinstance(term, SE):
            out += _backend.se_cov_sym(x, term.sigma_f, term.length)
        elif not isinstance(term, Noise):
            out += _term_cross(term, x, x)
    out[np.diag_indices_from(out)] += k.noise_variance
    return out


def cross(k: KernelExpr, xs_train, xs_test) -> np.ndarray:
    """``(m, n)`` covariance between test rows and training columns; never noisy."""
    return _cross_matrix(k, as_inputs(xs_test), as_inputs(xs_train))


def self_variance(k: KernelExpr, xs_test) -> np.ndarray:
    """``k(x*, x*)`` per test point, noise included (predictions target y*)."""
    x = as_inputs(xs_test)
    out = np.zeros(x.shape[0])
    for term in k.terms:
        if isinstance(term, SE):
            out += term.sigma_f**2
        elif isinstance(term, Periodic):
            if x.shape[1] != 1:
                raise PeriodicOnMultiDim(f"periodic term needs 1-D inputs, got d={x.shape[1]}")
            out += 1.0
        else:
            out += term.sigma_n**2
    return out


# ---------------------------------------------------------------------------
# log-space hyperparameter vectors


@dataclass(frozen=True)
class HyperVector:
    """Log values of the free parameters.

    ``mask`` has one entry per parameter of the kernel, in term order,
    and is ``True`` where the parameter is held fixed.
    """

    values: np.ndarray
    mask: tuple

    def __len__(self):
        return len(self.values)


def param_mask(k: KernelExpr) -> tuple:
    return tuple(name in t.fixed for t in k.terms for name in t.param_names)


def pack(k: KernelExpr) -> HyperVector:
    vals = []
    for t in k.terms:
        for name, v in zip(t.param_names, t.values()):
            if name in t.fixed:
                continue
            if v <= 0:
                raise NonPositiveParam(f"{t.kind}.{name}={v} cannot be optimized in log-space; mark it fixed")
            vals.append(math.log(v))
    return HyperVector(np.array(vals, dtype=float), param_mask(k))


def unpack(h, template: KernelExpr) -> KernelExpr:
    """Inverse of :func:`pack`; ``h`` may be a HyperVector or a plain array."""
    values = np.asarray(getattr(h, "values", h), dtype=float).ravel()
    n_free = sum(not m for m in param_mask(template))
    if values.size != n_free:
        raise DimensionMismatch(f"template has {n_free} free parameters, got {values.size}")
    it = iter(values)
    terms = []
    for t in template.terms:
        new = [v if name in t.fixed else math.exp(next(it)) for name, v in zip(t.param_names, t.values())]
        terms.append(t.with_values(new))
    return KernelExpr(tuple(terms))


def n_free(k: KernelExpr) -> int:
    return sum(not m for m in param_mask(k))


def named_params(k: KernelExpr):
    """``[(key, value), ...]`` with keys like ``se0.sf``, ``periodic0.nu``, ``noise.sn``."""
    counts = {}
    out = []
    for t in k.terms:
        if isinstance(t, Noise):
            prefix = "noise"
        else:
            idx = counts.get(t.kind, 0)
            counts[t.kind] = idx + 1
            prefix = f"{t.kind}{idx}"
        for name, v in zip(t.param_names, t.values()):
            out.append((f"{prefix}.{name}", v))
    return out


# ---------------------------------------------------------------------------
# text form

_TERM_PARAMS = {"se": ("sf", "l"), "periodic": ("nu",), "noise": ("sn",)}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[()+,=!]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos}", text, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind, value=None):
        tok = self.tokens[self.i]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = repr(value) if value is not None else kind
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {want} at position {tok[2]}, got {got}", self.text, tok[2])
        self.i += 1
        return tok

    def expr(self):
        terms = [self.term()]
        while self.peek()[:2] == ("op", "+"):
            self.i += 1
            terms.append(self.term())
        self.take("end")
        return terms

    def term(self):
        _, name, pos = self.take("name")
        key = name.lower()
        if key not in _TERM_PARAMS:
            raise ParseError(f"unknown term {name!r} at position {pos}", self.text, pos)
        self.take("op", "(")
        params, fixed = {}, set()
        while True:
            _, pname, ppos = self.take("name")
            if pname not in _TERM_PARAMS[key]:
                raise ParseError(f"{key} has no parameter {pname!r} (position {ppos})", self.text, ppos)
            if pname in params:
                raise ParseError(f"parameter {pname!r} given twice (position {ppos})", self.text, ppos)
            self.take("op", "=")
            params[pname] = float(self.take("num")[1])
            if self.peek()[:2] == ("op", "!"):
                self.i += 1
                fixed.add(pname)
            if self.peek()[:2] == ("op", ","):
                self.i += 1
                continue
            break
        close = self.take("op", ")")
        missing = [p for p in _TERM_PARAMS[key] if p not in params]
        if missing:
            raise ParseError(f"{key} is missing {', '.join(missing)} (position {close[2]})", self.text, close[2])
        fixed = frozenset(fixed)
        if key == "se":
            return SE(params["sf"], params["l"], fixed)
        if key == "periodic":
            return Periodic(params["nu"], fixed)
        return Noise(params["sn"], fixed)


def parse_kernel_spec(text: str) -> KernelExpr:
    """Parse ``term ("+" term)*`` where a term is ``se(sf=R,l=R)``,
    ``periodic(nu=R)`` or ``noise(sn=R)``.

    >>> k = parse_kernel_spec("se(sf=1.27,l=1)+noise(sn=0.3!)")
    >>> k.noise.fixed
    frozenset({'sn'})
    """
    return KernelExpr(tuple(_Parser(text).expr()))


def format_kernel_spec(k: KernelExpr) -> str:
    """Text form that parses back to an identical kernel."""
    parts = []
    for t in k.terms:
        args = ",".join(f"{name}={v!r}{'!' if name in t.fixed else ''}" for name, v in zip(t.param_names, t.values()))
        parts.append(f"{t.kind}({args})")
    return "+".join(parts)
