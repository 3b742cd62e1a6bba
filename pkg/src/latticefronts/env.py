"""Seeded realizations of the time-dependent random medium.

A medium bundles six coefficient channels (a1, b1, c1, a2, b2, c2). Every
channel is a pure function of the seed and of time: random kinds hash the
integer index of a time cell with a counter-based mixer and interpolate
smoothly between cells, so evaluation never depends on call order and the
time shift is exact (``shift(m, s)`` just adds ``s`` to the query time).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Annotated, Callable, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import kernels
from .errors import ConfigError
from .quadrature import PrefixIntegral, integrate

CHANNELS = ("a1", "b1", "c1", "a2", "b2", "c2")
POSITIVE = ("b1", "c1", "b2", "c2")
KINDS = ("constant", "periodic", "quasi-periodic", "smoothed-switching", "bounded-noise")

Path = Callable[[np.ndarray], np.ndarray]

# --------------------------------------------------------------------------
# counter-based hashing (SplitMix64 finalizer on uint64 arrays)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, stream: int, k) -> np.ndarray:
    """Uniform [0, 1) numbers indexed by integer counters ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=np.int64)).astype(np.uint64)
    base = _mix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
                ^ _mix(np.array([stream], dtype=np.uint64)))
    z = _mix(base + k)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


# --------------------------------------------------------------------------
# channel specifications


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantChannel(_Strict):
    type: Literal["constant"] = "constant"
    value: float


class SinesChannel(_Strict):
    type: Literal["sines"] = "sines"
    mean: float
    amplitudes: list[float] = Field(default_factory=list)
    frequencies: list[float] = Field(default_factory=list)
    phases: Optional[list[float]] = None

    @model_validator(mode="after")
    def _lengths(self):
        n = len(self.amplitudes)
        if len(self.frequencies) != n or (self.phases is not None and len(self.phases) != n):
            raise ValueError("amplitudes, frequencies and phases must have equal length")
        if any(w <= 0 for w in self.frequencies):
            raise ValueError("frequencies must be positive")
        return self


class SwitchingChannel(_Strict):
    type: Literal["switching"] = "switching"
    low: float
    high: float
    mean_dwell: float = Field(gt=0)
    width: float = Field(gt=0)


class NoiseChannel(_Strict):
    type: Literal["noise"] = "noise"
    mean: float
    amplitude: float = Field(ge=0)
    cell: float = Field(gt=0)


ChannelSpec = Annotated[
    Union[ConstantChannel, SinesChannel, SwitchingChannel, NoiseChannel],
    Field(discriminator="type"),
]

_ALLOWED = {
    "constant": {"constant"},
    "periodic": {"constant", "sines"},
    "quasi-periodic": {"constant", "sines"},
    "smoothed-switching": {"constant", "sines", "switching"},
    "bounded-noise": {"constant", "sines", "noise"},
}


class MediumSpec(_Strict):
    """JSON-serializable description of one realization."""

    kind: Literal["constant", "periodic", "quasi-periodic", "smoothed-switching", "bounded-noise"]
    seed: int = 0
    channels: dict[str, ChannelSpec]

    @model_validator(mode="after")
    def _check(self):
        if set(self.channels) != set(CHANNELS):
            raise ValueError(f"channels must be exactly {CHANNELS}")
        for name, ch in self.channels.items():
            if ch.type not in _ALLOWED[self.kind]:
                raise ValueError(f"channel {name}: type {ch.type!r} not allowed for kind {self.kind!r}")
        for name in POSITIVE:
            lo = _build_channel(self.channels[name], 0, 0).lower
            if not lo > 0:
                raise ValueError(f"channel {name}: non-positive amplitude floor ({lo:g}); b_i and c_i must stay > 0")
        if self.kind == "smoothed-switching" and not any(c.type == "switching" for c in self.channels.values()):
            raise ValueError("smoothed-switching medium needs at least one switching channel")
        if self.kind == "bounded-noise" and not any(c.type == "noise" for c in self.channels.values()):
            raise ValueError("bounded-noise medium needs at least one noise channel")
        return self


# --------------------------------------------------------------------------
# channel evaluators


def _ramp(z):
    """CDF of the C1 bump 30 s^2 (1 - s)^2 on s = z + 1/2 in [0, 1]."""
    s = np.clip(z + 0.5, 0.0, 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


class _Channel:
    lower: float
    upper: float
    slope: float = 0.0  # bound on |d/dt|, only reported for rough kinds
    rough = False

    def period(self):
        return None

    def antiderivative(self, t):
        return None


class _Const(_Channel):
    def __init__(self, spec: ConstantChannel):
        self.v = float(spec.value)
        self.lower = self.upper = self.v

    def __call__(self, t):
        return np.full(np.shape(t), self.v)

    def antiderivative(self, t):
        return self.v * np.asarray(t, dtype=float)

    def period(self):
        return 0.0


class _Sines(_Channel):
    def __init__(self, spec: SinesChannel):
        self.mean = float(spec.mean)
        self.amp = np.array(spec.amplitudes, dtype=float)
        self.freq = np.array(spec.frequencies, dtype=float)
        self.phase = np.zeros_like(self.amp) if spec.phases is None else np.array(spec.phases, dtype=float)
        spread = float(np.abs(self.amp).sum())
        self.lower, self.upper = self.mean - spread, self.mean + spread

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.mean)
        for a, w, p in zip(self.amp, self.freq, self.phase):
            out += a * np.sin(w * t + p)
        return out

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        out = self.mean * t
        for a, w, p in zip(self.amp, self.freq, self.phase):
            out -= (a / w) * np.cos(w * t + p)
        return out

    def period(self):
        active = [w for a, w in zip(self.amp, self.freq) if a != 0.0]
        if not active:
            return 0.0
        base = min(active)
        ratios = [w / base for w in active]
        if all(abs(q - round(q)) < 1e-12 for q in ratios):
            return 2.0 * math.pi / base
        return None


class _Switching(_Channel):
    rough = True

    def __init__(self, spec: SwitchingChannel, seed: int, stream: int):
        self.low, self.high = float(spec.low), float(spec.high)
        self.L = float(spec.mean_dwell)
        self.w = float(spec.width)
        self.seed, self.stream = seed, stream
        self.lower, self.upper = min(self.low, self.high), max(self.low, self.high)
        self.slope = 1.875 * abs(self.high - self.low) / self.w
        self.K = int(math.ceil(self.w / (2.0 * self.L))) + 1

    def switch_time(self, k):
        k = np.asarray(k, dtype=np.int64)
        u = hash_uniform(self.seed, 2 * self.stream, k.ravel()).reshape(k.shape)
        return (k + 0.25 + 0.5 * u) * self.L

    def plateau(self, k):
        """Value held after switch k (until switch k + 1)."""
        k = np.asarray(k, dtype=np.int64)
        u = hash_uniform(self.seed, 2 * self.stream + 1, k.ravel()).reshape(k.shape)
        return np.where(u < 0.5, self.low, self.high)

    def raw(self, t):
        """Unsmoothed piecewise-constant signal."""
        t = np.asarray(t, dtype=float)
        k0 = np.floor(t / self.L).astype(np.int64)
        k = np.where(t >= self.switch_time(k0), k0, k0 - 1)
        return self.plateau(k)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k0 = np.floor(t / self.L).astype(np.int64)[..., None]
        ks = k0 + np.arange(-self.K, self.K + 1)
        jumps = self.plateau(ks) - self.plateau(ks - 1)
        out = self.plateau(k0[..., 0] - self.K - 1)
        return out + np.sum(jumps * _ramp((t[..., None] - self.switch_time(ks)) / self.w), axis=-1)


class _Noise(_Channel):
    rough = True

    def __init__(self, spec: NoiseChannel, seed: int, stream: int):
        self.mean, self.amp, self.L = float(spec.mean), float(spec.amplitude), float(spec.cell)
        self.seed, self.stream = seed, stream
        self.lower, self.upper = self.mean - self.amp, self.mean + self.amp
        self.slope = 1.5 * 2.0 * self.amp / self.L

    def knot(self, k):
        k = np.asarray(k, dtype=np.int64)
        return 2.0 * hash_uniform(self.seed, 2 * self.stream, k.ravel()).reshape(k.shape) - 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = t / self.L
        k = np.floor(pos).astype(np.int64)
        s = pos - k
        left, right = self.knot(k), self.knot(k + 1)
        return self.mean + self.amp * (left + (right - left) * s * s * (3.0 - 2.0 * s))


def _build_channel(spec, seed: int, stream: int) -> _Channel:
    if spec.type == "constant":
        return _Const(spec)
    if spec.type == "sines":
        return _Sines(spec)
    if spec.type == "switching":
        return _Switching(spec, seed, stream)
    return _Noise(spec, seed, stream)


# --------------------------------------------------------------------------
# the medium


class CoefficientSet(NamedTuple):
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    window: float
    horizon: tuple
    mode: str
    argwindow: tuple
    lengths: np.ndarray = field(repr=False)
    trace: np.ndarray = field(repr=False)


class Medium:
    """One realization with exact time shift.

    Parameters
    ----------
    spec : MediumSpec or dict
    offset : float
        Time shift; ``Medium(spec, s)`` evaluates the channels at ``t + s``.
    """

    def __init__(self, spec, offset: float = 0.0):
        if isinstance(spec, dict):
            try:
                spec = MediumSpec.model_validate(spec)
            except ValidationError as exc:
                raise ConfigError(f"invalid medium: {exc}") from exc
        self.spec: MediumSpec = spec
        self.offset = float(offset)
        self._ch = {name: _build_channel(spec.channels[name], spec.seed, i + 1)
                    for i, name in enumerate(CHANNELS)}
        self._prefix_cache = {}

    # -- evaluation

    def _tt(self, t):
        return np.asarray(t, dtype=float) + self.offset

    def sample(self, name: str, t) -> np.ndarray:
        return self._ch[name](self._tt(t))

    def sample_all(self, t) -> np.ndarray:
        tt = self._tt(t)
        return np.stack([self._ch[n](tt) for n in CHANNELS])

    def coeffs_at(self, t: float) -> CoefficientSet:
        vals = self.sample_all(np.array([t]))[:, 0]
        return CoefficientSet(*(float(x) for x in vals))

    def path(self, name: str) -> Path:
        ch, off = self._ch[name], self.offset
        return lambda t: ch(np.asarray(t, dtype=float) + off)

    def shift(self, s: float) -> "Medium":
        return Medium(self.spec, self.offset + s)

    # -- descriptive

    @property
    def kind(self) -> str:
        return self.spec.kind

    def bounds(self, name: str):
        ch = self._ch[name]
        return ch.lower, ch.upper

    def is_constant(self) -> bool:
        return all(isinstance(c, _Const) for c in self._ch.values())

    def roughness(self) -> float:
        """Sum of slope bounds over switching/noise channels (0 if none)."""
        return float(sum(c.slope for c in self._ch.values() if c.rough))

    def period(self):
        """Common period of all channels, 0.0 if constant, None if aperiodic."""
        periods = [c.period() for c in self._ch.values()]
        if any(p is None for p in periods):
            return None
        nonzero = [p for p in periods if p > 0]
        if not nonzero:
            return 0.0
        big = max(nonzero)
        for p in nonzero:
            q = big / p
            if abs(q - round(q)) > 1e-12:
                return None
        return big

    def to_dict(self) -> dict:
        return self.spec.model_dump(mode="json", exclude_none=True)

    # -- integrals and means

    def integral(self, path, s: float, t: float, tol: float = 1e-9) -> float:
        """Integral of a channel (by name) or of a vectorized path over [s, t]."""
        if isinstance(path, str):
            anti = self._ch[path].antiderivative
            if anti(0.0) is not None:
                hi, lo = anti(np.array(t + self.offset)), anti(np.array(s + self.offset))
                return float(hi - lo)
            path = self.path(path)
        return integrate(path, s, t, tol=tol)

    def prefix(self, path, t0: float, t1: float, step: float = 1e-2) -> PrefixIntegral:
        key = (path, t0, t1, step) if isinstance(path, str) else None
        if key is not None and key in self._prefix_cache:
            return self._prefix_cache[key]
        f = self.path(path) if isinstance(path, str) else path
        out = PrefixIntegral(f, t0, t1, step)
        if key is not None:
            self._prefix_cache[key] = out
        return out

    def mean_estimate(self, path, T: float, r: float, mode: str = "least",
                      t0: float = 0.0, step: float = 1e-2) -> MeanEstimate:
        return mean_estimate(self, path, T, r, mode, t0=t0, step=step)


def mean_estimate(medium: Optional[Medium], path, T: float, r: float, mode: str = "least",
                  t0: float = 0.0, step: float = 1e-2) -> MeanEstimate:
    """Least or greatest mean of a path over windows of length >= r in [t0, t0 + T].

    Window endpoints live on a grid of spacing ``step``. Windows of length
    2r or more split into two windows of length >= r whose average they
    are, so only lengths in [r, 2r) need scanning.
    """
    if mode not in ("least", "greatest"):
        raise ValueError("mode must be 'least' or 'greatest'")
    if not (0 < r <= T):
        raise ValueError(f"need 0 < r <= T (got r={r}, T={T})")
    ncell = int(math.floor(T / step + 1e-9))
    m = int(math.ceil(r / step - 1e-9))
    if m > ncell:
        raise ValueError("window longer than the horizon grid")
    t1 = t0 + ncell * step
    if medium is not None:
        pre = medium.prefix(path, t0, t1, step)
    else:
        pre = PrefixIntegral(path, t0, t1, step)
    hi = min(2 * m - 1, ncell)
    mins, imin, maxs, imax = kernels.window_extrema(np.ascontiguousarray(pre.values), m, hi)
    lengths = np.arange(m, hi + 1)
    if mode == "least":
        vals, idx = mins / step, imin
        j = int(np.argmin(vals))
    else:
        vals, idx = maxs / step, imax
        j = int(np.argmax(vals))
    s = t0 + idx[j] * step
    return MeanEstimate(
        value=float(vals[j]), window=float(r), horizon=(float(t0), float(t1)), mode=mode,
        argwindow=(float(s), float(s + lengths[j] * step)),
        lengths=lengths * step, trace=vals,
    )


# --------------------------------------------------------------------------
# convenience constructors


def constant_medium(a1, b1, c1, a2, b2, c2, seed: int = 0) -> Medium:
    vals = dict(zip(CHANNELS, (a1, b1, c1, a2, b2, c2)))
    return Medium({"kind": "constant", "seed": seed,
                   "channels": {k: {"type": "constant", "value": v} for k, v in vals.items()}})


def make_medium(spec) -> Medium:
    return Medium(spec)


def sines_medium(base=(1.0, 1.0, 0.5, 0.5, 1.0, 1.0), kind="periodic", seed=0, **waves) -> Medium:
    """Constant base coefficients with sine modulations.

    ``waves`` maps a channel name to a list of (amplitude, frequency[, phase]).
    """
    channels = {}
    for name, v in zip(CHANNELS, base):
        if name in waves:
            terms = waves[name]
            channels[name] = {
                "type": "sines", "mean": v,
                "amplitudes": [w[0] for w in terms],
                "frequencies": [w[1] for w in terms],
                "phases": [w[2] if len(w) > 2 else 0.0 for w in terms],
            }
        else:
            channels[name] = {"type": "constant", "value": v}
    return Medium({"kind": kind, "seed": seed, "channels": channels})


CANONICAL = (1.0, 1.0, 0.5, 0.5, 1.0, 1.0)


def canonical_constant() -> Medium:
    return constant_medium(*CANONICAL)


def canonical_periodic(amplitude: float = 0.25) -> Medium:
    return sines_medium(CANONICAL, "periodic", a1=[(amplitude, 1.0)])


def canonical_quasi_periodic() -> Medium:
    return sines_medium(CANONICAL, "quasi-periodic", a1=[(0.3, 1.0), (0.2, math.sqrt(2.0))])
