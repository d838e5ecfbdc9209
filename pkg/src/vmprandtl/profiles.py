"""Problem data: coastline shape, interior stream-function trace, and the standing hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

KAPPA_CRIT = (27.0 / 4.0) ** (1.0 / 3.0)

_KINDS = ("affine", "polynomial", "sine")


@dataclass(frozen=True)
class Profile:
    """Closed-form scalar function of latitude with exact first and second derivatives.

    Supported kinds:

    * ``affine``: ``c0 + c1*y``
    * ``polynomial``: ``sum(c[k] * y**k)`` with degree at most 4
    * ``sine``: ``offset + amplitude*sin(frequency*y + phase)``
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}; expected one of {_KINDS}")
        params = tuple(float(p) for p in self.params)
        if self.kind == "affine" and len(params) != 2:
            raise DomainError("affine profile takes (c0, c1)")
        if self.kind == "polynomial" and not 1 <= len(params) <= 5:
            raise DomainError("polynomial profile takes 1 to 5 coefficients (degree <= 4)")
        if self.kind == "sine" and len(params) != 4:
            raise DomainError("sine profile takes (offset, amplitude, frequency, phase)")
        if not all(np.isfinite(params)):
            raise DomainError("profile parameters must be finite")
        object.__setattr__(self, "params", params)

    @classmethod
    def affine(cls, c0, c1):
        return cls("affine", (c0, c1))

    @classmethod
    def constant(cls, c0=0.0):
        return cls("affine", (c0, 0.0))

    @classmethod
    def polynomial(cls, coeffs):
        return cls("polynomial", tuple(coeffs))

    @classmethod
    def sine(cls, offset, amplitude, frequency, phase=0.0):
        return cls("sine", (offset, amplitude, frequency, phase))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        keys = {"affine": ("c0", "c1"), "polynomial": ("coeffs",),
                "sine": ("offset", "amplitude", "frequency", "phase")}
        if kind not in keys:
            raise DomainError(f"unknown profile kind {kind!r}")
        extra = sorted(set(d) - set(keys[kind]))
        if extra:
            raise DomainError(f"unknown profile keys {extra} for kind {kind!r}")
        defaults = {"offset": 0.0, "phase": 0.0}
        try:
            args = [d[k] if k in d else defaults[k] for k in keys[kind]]
        except KeyError as exc:
            raise DomainError(f"profile of kind {kind!r} is missing key {exc.args[0]!r}") from None
        if kind == "polynomial":
            return cls.polynomial(args[0])
        return cls(kind, tuple(args))

    def to_dict(self):
        if self.kind == "affine":
            return {"kind": "affine", "c0": self.params[0], "c1": self.params[1]}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.params)}
        off, amp, freq, ph = self.params
        return {"kind": "sine", "offset": off, "amplitude": amp, "frequency": freq, "phase": ph}

    def derivative(self, y, order=0):
        y = np.asarray(y, dtype=float)
        if self.kind == "sine":
            off, amp, freq, ph = self.params
            arg = freq * y + ph
            if order == 0:
                return off + amp * np.sin(arg)
            if order == 1:
                return amp * freq * np.cos(arg)
            return -amp * freq * freq * np.sin(arg)
        coeffs = self.params
        for _ in range(order):
            coeffs = tuple(k * c for k, c in enumerate(coeffs))[1:] or (0.0,)
        acc = np.zeros_like(y) + coeffs[-1]
        for c in coeffs[-2::-1]:
            acc = acc * y + c
        return acc

    def __call__(self, y):
        return self.derivative(y, 0)

    def d1(self, y):
        return self.derivative(y, 1)

    def d2(self, y):
        return self.derivative(y, 2)


@dataclass(frozen=True)
class GyreSetup:
    """Physical problem data: inertia ratio, latitude span, hypothesis margin and the two profiles."""

    lambda0: float
    Y: float
    eta: float
    coastline: Profile
    psi0: Profile

    def __post_init__(self):
        for name in ("lambda0", "Y", "eta"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val <= 0.0:
                raise DomainError(f"{name} must be a positive finite number, got {val}")
            object.__setattr__(self, name, val)

    def check_y(self, y):
        y = np.asarray(y, dtype=float)
        slack = 1e-12 * self.Y
        if np.any(~np.isfinite(y)) or np.any(y < -slack) or np.any(y > self.Y + slack):
            raise DomainError(f"latitude outside [0, {self.Y}]")
        return np.clip(y, 0.0, self.Y)

    # vectorised, unchecked evaluators used by the solvers
    def nu(self, y):
        return 1.0 + self.coastline.d1(y) ** 2

    def dnu(self, y):
        return 2.0 * self.coastline.d1(y) * self.coastline.d2(y)

    def kappa(self, y):
        return self.lambda0 * self.psi0.d1(y) * self.nu(y) ** (-1.0 / 3.0)

    def to_dict(self):
        return {"lambda0": self.lambda0, "Y": self.Y, "eta": self.eta,
                "coastline": self.coastline.to_dict(), "psi0": self.psi0.to_dict()}


def benchmark_setup(slope=2.5, lambda0=1.0, Y=1.0, eta=0.1):
    """Flat coast with affine interior trace ``1 + slope*y``: constant kappa, exact separable solution."""
    return GyreSetup(lambda0, Y, eta, Profile.constant(0.0), Profile.affine(1.0, slope))


def _scalar_or_array(values, y):
    return float(values) if np.ndim(y) == 0 else values


def nu_of(setup: GyreSetup, y):
    """Coastline geometry factor ``1 + chi'(y)**2``."""
    yy = setup.check_y(y)
    return _scalar_or_array(setup.nu(yy), y)


def kappa_of(setup: GyreSetup, y):
    """Dimensionless group ``lambda0 * psi0'(y) * nu(y)**(-1/3)``."""
    yy = setup.check_y(y)
    return _scalar_or_array(setup.kappa(yy), y)


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    worst_y: float
    worst_value: float
    bound: float


@dataclass
class ValidationReport:
    samples: int
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed_names(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {"samples": self.samples, "passed": self.passed,
                "checks": [vars(c).copy() for c in self.checks]}


def validate(setup: GyreSetup, samples: int = 1024) -> ValidationReport:
    """Check positivity of the trace, of its slope, and the margin ``kappa > 2 + eta`` on a uniform grid."""
    if int(samples) < 2:
        raise DomainError("samples must be at least 2")
    y = np.linspace(0.0, setup.Y, int(samples))
    report = ValidationReport(int(samples))
    nu = setup.nu(y)
    if np.any(nu < 1.0):
        raise AssertionError("nu below one; coastline derivative evaluation is broken")
    for name, vals, bound in (
        ("psi0_positive", setup.psi0(y), 0.0),
        ("psi0_slope_positive", setup.psi0.d1(y), 0.0),
        ("kappa_margin", setup.kappa(y), 2.0 + setup.eta),
    ):
        vals = np.broadcast_to(vals, y.shape)
        k = int(np.argmin(vals))
        report.checks.append(HypothesisCheck(name, bool(vals[k] > bound), float(y[k]),
                                             float(vals[k]), bound))
    return report
