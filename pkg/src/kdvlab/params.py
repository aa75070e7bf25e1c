"""Soliton parameter sequences: validation, generators, tail bounds, truncation choice.

A parameter set is a finite prefix of wavenumbers kappa_j > 0 with norming
constants c_j > 0, optionally continued past the prefix by a declared tail
rule.  Every j-th mode contributes the diagonal weight

    (c_j^2 / (2 kappa_j)) * exp(8 kappa_j^3 t - 2 kappa_j x)

to the trace of the interaction matrix, which is what the tail bounds here
control.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentTailError

__all__ = [
    "SummabilityClass", "TailKind", "TailRule", "SolitonParams", "Window",
    "ValidationReport", "validate", "generate", "tail_trace_bound", "choose_N",
    "params_from_json",
]


class SummabilityClass(enum.Enum):
    FINITE = "finite"            # finite prefix, no declared continuation
    LINF_SUMMABLE = "linf"       # bounded kappas, sum c_j^2/kappa_j < inf
    L1_SUMMABLE = "l1"           # additionally sum kappa_j < inf


class TailKind(enum.Enum):
    EXPLICIT = "explicit"        # nothing past the stored prefix
    GEOMETRIC = "geometric"      # kappa_j = base * ratio**(j-1)
    RECIPROCAL = "reciprocal"    # kappa_j = scale / j**power


@dataclass(frozen=True)
class TailRule:
    kind: TailKind
    ratio: float = 0.0
    base: float = 0.0
    power: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.kind is TailKind.GEOMETRIC:
            if not (0.0 < self.ratio < 1.0):
                raise ValueError(f"geometric tail needs 0 < ratio < 1, got {self.ratio}")
            if self.base <= 0.0:
                raise ValueError("geometric tail needs base > 0")
        elif self.kind is TailKind.RECIPROCAL:
            if self.scale <= 0.0:
                raise ValueError("reciprocal tail needs scale > 0")
            if self.power <= 0.0:
                raise ValueError("reciprocal tail needs power > 0")

    def kappa(self, j: int) -> float:
        """kappa_j for 1-based index j."""
        if self.kind is TailKind.GEOMETRIC:
            return self.base * self.ratio ** (j - 1)
        if self.kind is TailKind.RECIPROCAL:
            return self.scale / j ** self.power
        raise ValueError("explicit rule has no generator")

    def kappa_tail_sum(self, from_index: int) -> float:
        """Upper bound on sum_{j >= from_index} kappa_j, or raise if divergent."""
        if self.kind is TailKind.GEOMETRIC:
            return self.kappa(from_index) / (1.0 - self.ratio)
        if self.kind is TailKind.RECIPROCAL:
            if self.power <= 1.0:
                raise DivergentTailError("reciprocal tail with power <= 1 is not l1")
            p = self.power
            # kappa(from) + integral comparison for the rest
            return self.kappa(from_index) + self.scale * (from_index ** (1.0 - p)) / (p - 1.0)
        return 0.0


@dataclass(frozen=True)
class SolitonParams:
    """Finite prefix of (kappa_j, c_j) plus an optional declared tail."""
    kappas: tuple[float, ...]
    norming: tuple[float, ...]
    declared_class: SummabilityClass = SummabilityClass.FINITE
    tail: TailRule | None = None

    def __post_init__(self):
        if len(self.kappas) != len(self.norming):
            raise ValueError("kappas and norming must have equal length")

    def __len__(self) -> int:
        return len(self.kappas)

    def kap(self, N: int | None = None) -> np.ndarray:
        N = len(self) if N is None else N
        if N > len(self):
            raise ValueError(f"truncation N={N} exceeds stored prefix {len(self)}")
        return np.asarray(self.kappas[:N], dtype=float)

    def cn(self, N: int | None = None) -> np.ndarray:
        N = len(self) if N is None else N
        return np.asarray(self.norming[:N], dtype=float)


@dataclass(frozen=True)
class Window:
    """Closed (t,x) rectangle; infinities allowed on the x side."""
    t_min: float
    t_max: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.t_min > self.t_max or self.x_min > self.x_max:
            raise ValueError("window must satisfy t_min <= t_max and x_min <= x_max")


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)
    holds: dict[SummabilityClass, bool] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


def validate(params: SolitonParams) -> ValidationReport:
    """Check positivity, distinctness and which summability hypotheses hold.

    Failures are reported, never raised: callers decide what is fatal.
    """
    failures: list[str] = []
    kap = np.asarray(params.kappas, dtype=float)
    cs = np.asarray(params.norming, dtype=float)
    if kap.size and not np.all(np.isfinite(kap) & (kap > 0)):
        failures.append("all kappa_j must be finite and > 0")
    if cs.size and not np.all(np.isfinite(cs) & (cs > 0)):
        failures.append("all c_j must be finite and > 0")
    if kap.size > 1 and len(np.unique(kap)) != kap.size:
        failures.append("kappa_j must be pairwise distinct")

    holds = {SummabilityClass.FINITE: params.tail is None
             or params.tail.kind is TailKind.EXPLICIT}
    linf = True
    l1 = True
    if params.tail is not None and params.tail.kind is not TailKind.EXPLICIT:
        # tail continues with c_j = kappa_j, so sum c^2/kappa = sum kappa
        try:
            params.tail.kappa_tail_sum(len(params) + 1)
        except DivergentTailError:
            linf = False
            l1 = False
        if params.tail.kind is TailKind.RECIPROCAL and params.tail.power <= 1.0:
            l1 = False
    holds[SummabilityClass.LINF_SUMMABLE] = linf and not failures
    holds[SummabilityClass.L1_SUMMABLE] = l1 and not failures

    declared_ok = holds.get(params.declared_class, False) if not failures else False
    if not declared_ok and not failures:
        failures.append(f"declared class {params.declared_class} hypotheses do not hold")
    return ValidationReport(ok=not failures, failures=failures, holds=holds)


def generate(rule: TailRule, count: int, norming: str = "c=kappa") -> SolitonParams:
    """Deterministically materialize `count` leading modes of a tail rule."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if norming != "c=kappa":
        raise ValueError(f"unknown norming rule {norming!r}")
    kap = tuple(rule.kappa(j) for j in range(1, count + 1))
    cls = SummabilityClass.L1_SUMMABLE
    if rule.kind is TailKind.RECIPROCAL and rule.power <= 1.0:
        cls = SummabilityClass.LINF_SUMMABLE
    return SolitonParams(kappas=kap, norming=kap, declared_class=cls, tail=rule)


def _term(kap, cs, t, x):
    return cs * cs / (2.0 * kap) * np.exp(8.0 * kap**3 * t - 2.0 * kap * x)


def tail_trace_bound(params: SolitonParams, from_index: int, t: float, x: float) -> float:
    """Upper bound on sum_{j >= from_index} (c_j^2/(2 kappa_j)) e^{8 kappa_j^3 t - 2 kappa_j x}.

    Stored prefix terms are summed exactly; the continuation past the prefix is
    bounded using monotonicity of the exponent in kappa (kappa decreasing along
    the tail), which is exact at (t, x) = (0, 0).  `from_index` is 1-based.
    """
    if from_index < 1:
        raise ValueError("from_index is 1-based")
    kap = np.asarray(params.kappas, dtype=float)
    cs = np.asarray(params.norming, dtype=float)
    total = 0.0
    if from_index <= len(kap):
        sl = slice(from_index - 1, None)
        total += float(np.sum(_term(kap[sl], cs[sl], t, x)))
    if params.tail is not None and params.tail.kind is not TailKind.EXPLICIT:
        start = max(from_index, len(kap) + 1)
        k0 = params.tail.kappa(start)
        ssum = params.tail.kappa_tail_sum(start)  # raises DivergentTailError if not l1
        amp = max(1.0, math.exp(8.0 * k0**3 * t)) * max(1.0, math.exp(-2.0 * k0 * x))
        total += 0.5 * ssum * amp
    return total


def choose_N(params: SolitonParams, eps: float, window: Window, max_n: int = 4096) -> int:
    """Smallest N whose tail bound at the worst window corner is <= eps.

    The bound is monotone increasing in t and decreasing in x, so the
    maximizing corner is (t_max, x_min).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    t, x = window.t_max, window.x_min
    hi = len(params)
    for n in range(0, hi + 1):
        if tail_trace_bound(params, n + 1, t, x) <= eps:
            return n
    if params.tail is None or params.tail.kind is TailKind.EXPLICIT:
        raise DivergentTailError(
            f"stored prefix of {hi} modes cannot reach eps={eps:g} and no tail rule is declared")
    ext = materialize(params, max_n)
    for n in range(hi + 1, max_n + 1):
        if tail_trace_bound(ext, n + 1, t, x) <= eps:
            return n
    raise DivergentTailError(f"no truncation below {max_n} reaches eps={eps:g}")


def materialize(params: SolitonParams, count: int) -> SolitonParams:
    """Extend the stored prefix to `count` modes using the declared tail rule."""
    if count <= len(params):
        return params
    if params.tail is None or params.tail.kind is TailKind.EXPLICIT:
        raise ValueError("cannot extend an explicit parameter set")
    extra = tuple(params.tail.kappa(j) for j in range(len(params) + 1, count + 1))
    return SolitonParams(
        kappas=params.kappas + extra,
        norming=params.norming + extra,
        declared_class=params.declared_class,
        tail=params.tail,
    )


def kappa_tail_sum(params: SolitonParams, from_index: int) -> float | None:
    """Bound on sum_{j >= from_index} kappa_j; None when nothing is declared there."""
    kap = np.asarray(params.kappas, dtype=float)
    total = 0.0
    if from_index <= len(kap):
        total += float(np.sum(kap[from_index - 1:]))
    if params.tail is not None and params.tail.kind is not TailKind.EXPLICIT:
        total += params.tail.kappa_tail_sum(max(from_index, len(kap) + 1))
    elif from_index > len(kap):
        return None if from_index > len(kap) + 1 else 0.0
    return total


# -- JSON parameter schema ---------------------------------------------------

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kappas"],
    "properties": {
        "kappas": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "explicit": {"type": "array", "items": {"type": "number"}},
                "geometric": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["base", "ratio", "count"],
                    "properties": {
                        "base": {"type": "number"},
                        "ratio": {"type": "number"},
                        "count": {"type": "integer", "minimum": 0},
                    },
                },
                "reciprocal": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["scale", "power", "count"],
                    "properties": {
                        "scale": {"type": "number"},
                        "power": {"type": "number"},
                        "count": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "norming": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "explicit": {"type": "array", "items": {"type": "number"}},
                "rule": {"type": "string", "enum": ["c=kappa"]},
            },
        },
    },
}


def params_from_json(obj: dict) -> SolitonParams:
    """Build SolitonParams from the documented JSON shape (already schema-checked)."""
    kspec = obj["kappas"]
    if "explicit" in kspec:
        kap = tuple(float(v) for v in kspec["explicit"])
        tail = None
    elif "geometric" in kspec:
        g = kspec["geometric"]
        tail = TailRule(TailKind.GEOMETRIC, ratio=float(g["ratio"]), base=float(g["base"]))
        kap = tuple(tail.kappa(j) for j in range(1, int(g["count"]) + 1))
    else:
        r = kspec["reciprocal"]
        tail = TailRule(TailKind.RECIPROCAL, power=float(r["power"]), scale=float(r["scale"]))
        kap = tuple(tail.kappa(j) for j in range(1, int(r["count"]) + 1))

    nspec = obj.get("norming", {"rule": "c=kappa"})
    if "explicit" in nspec:
        cs = tuple(float(v) for v in nspec["explicit"])
    else:
        cs = kap

    if tail is None:
        cls = SummabilityClass.FINITE
    elif tail.kind is TailKind.RECIPROCAL and tail.power <= 1.0:
        cls = SummabilityClass.LINF_SUMMABLE
    else:
        cls = SummabilityClass.L1_SUMMABLE
    return SolitonParams(kappas=kap, norming=cs, declared_class=cls, tail=tail)
