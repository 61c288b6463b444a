"""Torus geometry and migration kernels.

Colonies live on the torus of integer points in (-L/2, L/2]^2.  A migration
kernel is a finite symmetric displacement law ``q`` on Z^2 with no mass at the
origin; the full one-step law mixes it with staying put:
``p(x, y) = (1 - nu) [x == y] + nu q(y - x)``.
"""
from __future__ import annotations

import dataclasses
import math
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

SUM_TOL = 1e-12


class KernelError(ValueError):
    """Raised when a displacement table violates a kernel invariant."""


def wrap(point: Sequence[int], L: int) -> tuple[int, int]:
    """Reduce an integer pair componentwise into (-L/2, L/2]."""
    if L < 2:
        raise ValueError(f"torus side must be at least 2, got {L}")
    out = []
    for v in point:
        y = int(v) % L
        if 2 * y > L:
            y -= L
        out.append(y)
    return out[0], out[1]


def wrap_array(points: np.ndarray, L: int) -> np.ndarray:
    """Vectorised :func:`wrap` for an integer array of shape (..., 2)."""
    y = np.mod(points, L)
    return np.where(2 * y > L, y - L, y)


def torus_distance(a: Sequence[int], b: Sequence[int], L: int) -> float:
    """Euclidean length of the wrapped difference b - a."""
    d = wrap((b[0] - a[0], b[1] - a[1]), L)
    return math.hypot(d[0], d[1])


@dataclasses.dataclass(frozen=True)
class DisplacementKernel:
    """Validated symmetric displacement law q on Z^2.

    ``offsets`` is an (m, 2) integer array, ``probs`` the matching
    probabilities.  ``exact`` holds the same probabilities as Fractions when
    the constructor could supply them.
    """

    name: str
    offsets: np.ndarray
    probs: np.ndarray
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def range(self) -> int:
        """Largest coordinate magnitude carrying positive mass."""
        return int(np.abs(self.offsets).max())

    @property
    def sigma2(self) -> float:
        return float(self.sigma2_exact) if self.exact is not None else self._moment(0)

    @property
    def sigma2_exact(self) -> Fraction | float:
        if self.exact is None:
            return self._moment(0)
        return sum(
            (Fraction(int(z[0]) ** 2) * p for z, p in zip(self.offsets, self.exact)),
            Fraction(0),
        )

    def _moment(self, axis: int) -> float:
        return math.fsum(float(z[axis]) ** 2 * float(p) for z, p in zip(self.offsets, self.probs))

    def sigma2_by_axis(self) -> tuple[float, float]:
        return self._moment(0), self._moment(1)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.probs == self.probs[0]))

    def as_table(self) -> dict[tuple[int, int], float]:
        return {(int(z[0]), int(z[1])): float(p) for z, p in zip(self.offsets, self.probs)}

    def cumulative(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def describe(self) -> dict:
        if self.name.startswith("uniform_box"):
            return {"kind": "uniform_box", "k": self.range}
        if self.name in ("nearest4", "kings8"):
            return {"kind": self.name}
        return {"kind": "custom", "table": [[int(z[0]), int(z[1]), float(p)]
                                            for z, p in zip(self.offsets, self.probs)]}


@dataclasses.dataclass(frozen=True)
class FullKernel:
    """Lazy migration law: stay with probability 1 - nu, else jump by q."""

    base: DisplacementKernel
    nu: float

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise KernelError(f"migration probability must lie in [0, 1], got {self.nu}")

    @property
    def range(self) -> int:
        return self.base.range

    def table(self) -> dict[tuple[int, int], float]:
        out = {(0, 0): 1.0 - self.nu}
        for z, p in self.base.as_table().items():
            out[z] = self.nu * p
        return out


def _uniform(name: str, pts: list[tuple[int, int]]) -> DisplacementKernel:
    pts = sorted(pts)
    m = len(pts)
    return DisplacementKernel(
        name=name,
        offsets=np.array(pts, dtype=np.int64),
        probs=np.full(m, 1.0 / m),
        exact=tuple(Fraction(1, m) for _ in pts),
    )


def nearest4() -> DisplacementKernel:
    return _uniform("nearest4", [(1, 0), (-1, 0), (0, 1), (0, -1)])


def kings8() -> DisplacementKernel:
    pts = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]
    return _uniform("kings8", pts)


def uniform_box(k: int) -> DisplacementKernel:
    if int(k) != k or k < 1:
        raise KernelError(f"uniform_box needs an integer k >= 1, got {k}")
    k = int(k)
    pts = [(a, b) for a in range(-k, k + 1) for b in range(-k, k + 1) if (a, b) != (0, 0)]
    return _uniform(f"uniform_box({k})", pts)


def _generates_z2(offsets: np.ndarray) -> bool:
    # The subgroup spanned by integer vectors has index gcd of all 2x2 minors.
    g = 0
    for i in range(len(offsets)):
        for j in range(i + 1, len(offsets)):
            det = int(offsets[i, 0] * offsets[j, 1] - offsets[i, 1] * offsets[j, 0])
            g = math.gcd(g, det)
            if g == 1:
                return True
    return False


def custom(table: Union[Mapping[tuple[int, int], float], Sequence[Sequence[float]]]) -> DisplacementKernel:
    """Validate an explicit displacement table.

    Accepts ``{(dx, dy): prob}`` or ``[[dx, dy, prob], ...]``.  Symmetric
    partners must agree to within 1e-12; the stored table is averaged over
    each symmetry orbit so that the two axis moments agree exactly.
    """
    if isinstance(table, Mapping):
        items = [(int(k[0]), int(k[1]), float(v)) for k, v in table.items()]
    else:
        items = []
        for row in table:
            if len(row) != 3:
                raise KernelError(f"table rows must be [dx, dy, prob], got {row!r}")
            dx, dy, p = row
            if int(dx) != dx or int(dy) != dy:
                raise KernelError(f"displacements must be integers, got {row!r}")
            items.append((int(dx), int(dy), float(p)))
    if not items:
        raise KernelError("custom kernel table is empty")

    q: dict[tuple[int, int], float] = {}
    for dx, dy, p in items:
        if not math.isfinite(p) or p < 0:
            raise KernelError(f"probability at {(dx, dy)} must be finite and nonnegative, got {p}")
        q[(dx, dy)] = q.get((dx, dy), 0.0) + p
    if q.get((0, 0), 0.0) != 0.0:
        raise KernelError(f"q((0,0)) must be 0, got {q[(0, 0)]}")
    q.pop((0, 0), None)
    q = {z: p for z, p in q.items() if p > 0}
    total = math.fsum(q.values())
    if abs(total - 1.0) > SUM_TOL:
        raise KernelError(f"probabilities sum to {total!r}, not 1")

    sym: dict[tuple[int, int], float] = {}
    for (a, b), p in q.items():
        orbit = {(a, b), (-a, -b), (b, a), (-b, -a)}
        vals = [q.get(z, 0.0) for z in orbit]
        if max(vals) - min(vals) > SUM_TOL:
            raise KernelError(f"kernel is not symmetric on the orbit of {(a, b)}: {vals}")
        mean = math.fsum(vals) / len(vals)
        for z in orbit:
            sym[z] = mean

    pts = sorted(sym)
    offsets = np.array(pts, dtype=np.int64)
    probs = np.array([sym[z] for z in pts])
    probs /= math.fsum(probs)
    if not _generates_z2(offsets):
        raise KernelError("kernel support does not generate Z^2 (reducible walk)")
    return DisplacementKernel(name="custom", offsets=offsets, probs=probs)


KernelSpec = Union[str, Mapping]


def build_kernel(spec: KernelSpec) -> DisplacementKernel:
    """Construct a kernel from a descriptor.

    ``spec`` is either a kind name (``"nearest4"``, ``"kings8"``) or a mapping
    ``{"kind": ..., "k": int}`` / ``{"kind": "custom", "table": [...]}``.
    """
    if isinstance(spec, DisplacementKernel):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    extra = set(spec) - {"kind", "k", "table"}
    if extra:
        raise KernelError(f"unknown kernel keys: {sorted(extra)}")
    if kind == "nearest4":
        return nearest4()
    if kind == "kings8":
        return kings8()
    if kind == "uniform_box":
        if "k" not in spec:
            raise KernelError("uniform_box requires 'k'")
        return uniform_box(spec["k"])
    if kind == "custom":
        if "table" not in spec:
            raise KernelError("custom kernel requires 'table'")
        return custom(spec["table"])
    raise KernelError(f"unknown kernel kind {kind!r}")


def sample_displacement(kernel: DisplacementKernel | FullKernel, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one displacement with the kernel's exact probabilities."""
    if isinstance(kernel, FullKernel):
        if rng.random() >= kernel.nu:
            return 0, 0
        kernel = kernel.base
    i = int(np.searchsorted(kernel.cumulative(), rng.random(), side="right"))
    i = min(i, len(kernel.probs) - 1)
    z = kernel.offsets[i]
    return int(z[0]), int(z[1])


def check_torus(kernel: DisplacementKernel, L: int) -> None:
    if L < 2 or L < 2 * kernel.range:
        raise ValueError(f"torus side L={L} must be >= max(2, 2K) with K={kernel.range}")


__all__ = [
    "DisplacementKernel", "FullKernel", "KernelError", "build_kernel", "check_torus", "custom",
    "kings8", "nearest4", "sample_displacement", "torus_distance", "uniform_box", "wrap", "wrap_array",
]
