"""System data model: timer-dependent impulsive systems, switched systems,
dwell-time families, positivity checking, adjoint construction, JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDomain,
    NoCertificate,
    ParseError,
    Unsupported,
)
from .poly import Poly, certify_nonneg, falsify_nonneg

__all__ = [
    "PolyMatrix",
    "JumpMap",
    "ImpulsiveSystem",
    "SwitchedSystem",
    "DwellTimeSpec",
    "PositivityReport",
    "check_positive",
    "lift_switched",
    "adjoint",
    "load_system",
    "save_system",
]


class PolyMatrix:
    """Matrix of univariate polynomials, stored as an (r, c, d+1) coefficient array."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: np.ndarray):
        arr = np.asarray(coeffs, dtype=float)
        if arr.ndim != 3:
            raise DimensionMismatch(f"PolyMatrix needs a 3-D coefficient array, got shape {arr.shape}")
        # canonical: drop all-zero leading-degree slabs
        while arr.shape[2] > 1 and not arr[:, :, -1].any():
            arr = arr[:, :, :-1]
        self.coeffs = arr

    @staticmethod
    def from_const(mat) -> "PolyMatrix":
        m = np.asarray(mat, dtype=float)
        if m.ndim != 2:
            raise DimensionMismatch(f"expected 2-D matrix, got shape {m.shape}")
        return PolyMatrix(m[:, :, None])

    @staticmethod
    def from_entries(entries: Sequence[Sequence[Sequence[float]]]) -> "PolyMatrix":
        """Build from nested lists: entries[i][j] is an ascending coefficient list."""
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        dmax = 1
        for row in entries:
            if len(row) != cols:
                raise DimensionMismatch("ragged entry rows")
            for e in row:
                dmax = max(dmax, len(list(e)))
        arr = np.zeros((rows, cols, dmax))
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                cs = [float(c) for c in e]
                arr[i, j, : len(cs)] = cs
        return PolyMatrix(arr)

    @staticmethod
    def zeros(r: int, c: int) -> "PolyMatrix":
        return PolyMatrix(np.zeros((r, c, 1)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[0], self.coeffs.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def const(self) -> np.ndarray:
        if not self.is_constant:
            raise DimensionMismatch("matrix is timer-dependent")
        return self.coeffs[:, :, 0].copy()

    def entry(self, i: int, j: int) -> Poly:
        return Poly(tuple(self.coeffs[i, j]))

    def __call__(self, tau: float, clamp: Optional[float] = None) -> np.ndarray:
        t = min(tau, clamp) if clamp is not None else tau
        out = self.coeffs[:, :, -1].copy()
        for k in range(self.coeffs.shape[2] - 2, -1, -1):
            out = out * t + self.coeffs[:, :, k]
        return out

    def eval_mesh(self, taus: np.ndarray, clamp: Optional[float] = None) -> np.ndarray:
        """Evaluate on a mesh, returning shape (len(taus), r, c)."""
        t = np.minimum(taus, clamp) if clamp is not None else np.asarray(taus, dtype=float)
        out = np.broadcast_to(self.coeffs[:, :, -1], (len(t),) + self.shape).copy()
        for k in range(self.coeffs.shape[2] - 2, -1, -1):
            out = out * t[:, None, None] + self.coeffs[:, :, k]
        return out

    @property
    def T(self) -> "PolyMatrix":
        return PolyMatrix(self.coeffs.transpose(1, 0, 2))

    def deriv(self) -> "PolyMatrix":
        d = self.coeffs.shape[2]
        if d == 1:
            return PolyMatrix.zeros(*self.shape)
        ks = np.arange(1, d)
        return PolyMatrix(self.coeffs[:, :, 1:] * ks[None, None, :])

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def to_json(self) -> list:
        r, c = self.shape
        return [[self.entry(i, j).to_json() for j in range(c)] for i in range(r)]

    def __eq__(self, other):
        return (
            isinstance(other, PolyMatrix)
            and self.coeffs.shape == other.coeffs.shape
            and np.array_equal(self.coeffs, other.coeffs)
        )


def _is_empty_listing(data) -> bool:
    if isinstance(data, (list, tuple)):
        return len(data) == 0 or all(isinstance(r, (list, tuple)) and len(r) == 0 for r in data)
    if isinstance(data, np.ndarray):
        return data.size == 0
    return False


def _as_polymatrix(data, rows: Optional[int] = None, cols: Optional[int] = None) -> PolyMatrix:
    """Coerce constant arrays / nested coefficient lists / PolyMatrix; None means zeros."""
    if data is None or _is_empty_listing(data):
        if rows is None or cols is None:
            raise DimensionMismatch("cannot infer shape of omitted matrix")
        return PolyMatrix.zeros(rows, cols)
    if isinstance(data, PolyMatrix):
        return data
    arr = np.asarray(data, dtype=object)
    if arr.ndim == 2 and all(np.isscalar(x) or isinstance(x, (int, float)) for x in arr.ravel()):
        return PolyMatrix.from_const(np.asarray(data, dtype=float))
    if arr.ndim == 0:
        return PolyMatrix.from_const([[float(data)]])
    return PolyMatrix.from_entries(data)


def _as_matrix(data, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    if data is None or _is_empty_listing(data):
        if rows is None or cols is None:
            raise DimensionMismatch("cannot infer shape of omitted matrix")
        return np.zeros((rows, cols))
    m = np.asarray(data, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected 2-D matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class JumpMap:
    """One discrete transition: x+ = J x + Bd ud + Ed wd, zd = Cd x + Dd ud + Fd wd."""

    J: np.ndarray
    Bd: np.ndarray
    Ed: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    Fd: np.ndarray
    tag: Optional[tuple[int, int]] = None  # (source mode, target mode) for lifted systems


@dataclass(frozen=True)
class ImpulsiveSystem:
    """Timer-dependent linear impulsive system with one or more jump maps."""

    A: PolyMatrix
    Bc: PolyMatrix
    Ec: PolyMatrix
    Cc: PolyMatrix
    Dc: PolyMatrix
    Fc: PolyMatrix
    jumps: tuple[JumpMap, ...]
    time_reversed: bool = False  # adjoint semantics run backward in time

    @staticmethod
    def from_arrays(
        A,
        J,
        Ec=None,
        Cc=None,
        Fc=None,
        Ed=None,
        Cd=None,
        Fd=None,
        Bc=None,
        Dc=None,
        Bd=None,
        Dd=None,
        extra_jumps: Sequence[dict] = (),
    ) -> "ImpulsiveSystem":
        Apm = _as_polymatrix(A)
        n = Apm.shape[0]
        if Apm.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {Apm.shape}")
        Ecpm = _as_polymatrix(Ec, n, 0)
        pc = Ecpm.shape[1]
        Ccpm = _as_polymatrix(Cc, 0, n)
        qc = Ccpm.shape[0]
        Fcpm = _as_polymatrix(Fc, qc, pc)
        Bcpm = _as_polymatrix(Bc, n, 0)
        mc = Bcpm.shape[1]
        Dcpm = _as_polymatrix(Dc, qc, mc)

        def one_jump(J, Ed, Cd, Fd, Bd, Dd, tag=None) -> JumpMap:
            Jm = _as_matrix(J)
            Edm = _as_matrix(Ed, n, 0)
            pd = Edm.shape[1]
            Cdm = _as_matrix(Cd, 0, n)
            qd = Cdm.shape[0]
            Fdm = _as_matrix(Fd, qd, pd)
            Bdm = _as_matrix(Bd, n, 0)
            md = Bdm.shape[1]
            Ddm = _as_matrix(Dd, qd, md)
            return JumpMap(Jm, Bdm, Edm, Cdm, Ddm, Fdm, tag)

        jumps = [one_jump(J, Ed, Cd, Fd, Bd, Dd)]
        for ex in extra_jumps:
            jumps.append(one_jump(ex["J"], ex.get("Ed"), ex.get("Cd"), ex.get("Fd"),
                                  ex.get("Bd"), ex.get("Dd"), ex.get("tag")))
        sys = ImpulsiveSystem(Apm, Bcpm, Ecpm, Ccpm, Dcpm, Fcpm, tuple(jumps))
        sys.validate()
        return sys

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def mc(self) -> int:
        return self.Bc.shape[1]

    @property
    def pc(self) -> int:
        return self.Ec.shape[1]

    @property
    def qc(self) -> int:
        return self.Cc.shape[0]

    @property
    def md(self) -> int:
        return self.jumps[0].Bd.shape[1]

    @property
    def pd(self) -> int:
        return self.jumps[0].Ed.shape[1]

    @property
    def qd(self) -> int:
        return self.jumps[0].Cd.shape[0]

    @property
    def jump(self) -> JumpMap:
        return self.jumps[0]

    def validate(self) -> None:
        n, mc, pc, qc = self.n, self.mc, self.pc, self.qc
        checks = [
            ("A", self.A.shape, (n, n)),
            ("Bc", self.Bc.shape, (n, mc)),
            ("Ec", self.Ec.shape, (n, pc)),
            ("Cc", self.Cc.shape, (qc, n)),
            ("Dc", self.Dc.shape, (qc, mc)),
            ("Fc", self.Fc.shape, (qc, pc)),
        ]
        md, pd, qd = self.md, self.pd, self.qd
        for k, jm in enumerate(self.jumps):
            checks += [
                (f"jumps[{k}].J", jm.J.shape, (n, n)),
                (f"jumps[{k}].Bd", jm.Bd.shape, (n, md)),
                (f"jumps[{k}].Ed", jm.Ed.shape, (n, pd)),
                (f"jumps[{k}].Cd", jm.Cd.shape, (qd, n)),
                (f"jumps[{k}].Dd", jm.Dd.shape, (qd, md)),
                (f"jumps[{k}].Fd", jm.Fd.shape, (qd, pd)),
            ]
        for name, got, want in checks:
            if got != want:
                raise DimensionMismatch(f"{name}: expected shape {want}, got {got}")

    def is_constant(self) -> bool:
        return all(m.is_constant for m in (self.A, self.Bc, self.Ec, self.Cc, self.Dc, self.Fc))

    def max_degree(self) -> int:
        return max(m.degree for m in (self.A, self.Bc, self.Ec, self.Cc, self.Dc, self.Fc))


@dataclass(frozen=True)
class SwitchedSystem:
    """Timer-dependent switched system: N modes sharing dimensions (n, m, p, q)."""

    modes: tuple[dict, ...]  # each: A, B, E, C, D, F as PolyMatrix

    @staticmethod
    def from_arrays(modes: Sequence[dict]) -> "SwitchedSystem":
        if len(modes) < 1:
            raise DimensionMismatch("need at least one mode")
        built = []
        for md in modes:
            A = _as_polymatrix(md["A"])
            n = A.shape[0]
            E = _as_polymatrix(md.get("E"), n, 0)
            C = _as_polymatrix(md.get("C"), 0, n)
            q = C.shape[0]
            p = E.shape[1]
            F = _as_polymatrix(md.get("F"), q, p)
            B = _as_polymatrix(md.get("B"), n, 0)
            D = _as_polymatrix(md.get("D"), q, B.shape[1])
            built.append({"A": A, "B": B, "E": E, "C": C, "D": D, "F": F})
        dims = {(m["A"].shape[0], m["B"].shape[1], m["E"].shape[1], m["C"].shape[0]) for m in built}
        if len(dims) != 1:
            raise DimensionMismatch(f"modes disagree on dimensions: {sorted(dims)}")
        return SwitchedSystem(tuple(built))

    @property
    def N(self) -> int:
        return len(self.modes)

    @property
    def n(self) -> int:
        return self.modes[0]["A"].shape[0]

    @property
    def m(self) -> int:
        return self.modes[0]["B"].shape[1]

    @property
    def p(self) -> int:
        return self.modes[0]["E"].shape[1]

    @property
    def q(self) -> int:
        return self.modes[0]["C"].shape[0]


@dataclass(frozen=True)
class DwellTimeSpec:
    """Admissible dwell-time family: arbitrary | constant(T) | minimum(T) | range(Tmin, Tmax)."""

    kind: str
    T: Optional[float] = None
    Tmin: Optional[float] = None
    Tmax: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("arbitrary", "constant", "minimum", "range"):
            raise ParseError(f"unknown dwell kind {self.kind!r}")
        if self.kind in ("constant", "minimum"):
            if self.T is None or not (0 < self.T < np.inf):
                raise ParseError(f"{self.kind} dwell-time needs 0 < T < inf, got {self.T}")
        if self.kind == "range":
            ok = (
                self.Tmin is not None
                and self.Tmax is not None
                and 0 < self.Tmin <= self.Tmax < np.inf
            )
            if not ok:
                raise ParseError(f"range dwell-time needs 0 < Tmin <= Tmax < inf, got [{self.Tmin}, {self.Tmax}]")

    @staticmethod
    def arbitrary() -> "DwellTimeSpec":
        return DwellTimeSpec("arbitrary")

    @staticmethod
    def constant(T: float) -> "DwellTimeSpec":
        return DwellTimeSpec("constant", T=float(T))

    @staticmethod
    def minimum(T: float) -> "DwellTimeSpec":
        return DwellTimeSpec("minimum", T=float(T))

    @staticmethod
    def range(Tmin: float, Tmax: float) -> "DwellTimeSpec":
        return DwellTimeSpec("range", Tmin=float(Tmin), Tmax=float(Tmax))

    @staticmethod
    def parse(text: str) -> "DwellTimeSpec":
        parts = text.strip().split(":")
        try:
            if parts[0] == "arbitrary" and len(parts) == 1:
                return DwellTimeSpec.arbitrary()
            if parts[0] == "constant" and len(parts) == 2:
                return DwellTimeSpec.constant(float(parts[1]))
            if parts[0] == "minimum" and len(parts) == 2:
                return DwellTimeSpec.minimum(float(parts[1]))
            if parts[0] == "range" and len(parts) == 3:
                return DwellTimeSpec.range(float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ParseError(f"bad dwell spec {text!r}: {exc}") from exc
        raise ParseError(f"bad dwell spec {text!r}")

    def __str__(self) -> str:
        if self.kind == "arbitrary":
            return "arbitrary"
        if self.kind == "range":
            return f"range:{self.Tmin:g}:{self.Tmax:g}"
        return f"{self.kind}:{self.T:g}"

    @property
    def clamp(self) -> Optional[float]:
        """Timer clamp point: matrices are evaluated at min(tau, clamp) when set."""
        return self.T if self.kind == "minimum" else None

    def horizon_tau(self) -> float:
        """Right end of the timer interval the certificates must cover."""
        if self.kind in ("constant", "minimum"):
            return float(self.T)
        if self.kind == "range":
            return float(self.Tmax)
        raise InvalidDomain("arbitrary dwell-time has no timer interval")


@dataclass
class PositivityReport:
    """Entrywise internal-positivity audit of an impulsive system."""

    positive: bool
    violations: list[tuple[str, tuple[int, int], Optional[float], float]] = field(default_factory=list)
    unverified: list[tuple[str, tuple[int, int]]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.positive


def _check_entry_nonneg(report: PositivityReport, name: str, p: Poly, domain: tuple[float, float]):
    if p.is_zero:
        return
    if p.degree == 0:
        if p.coeffs[0] < 0:
            report.violations.append((name, (0, 0), None, p.coeffs[0]))
        return
    wit = falsify_nonneg(p, domain, 10_000)
    if wit is not None:
        report.violations.append((name, (0, 0), wit.tau, wit.value))
        return
    try:
        certify_nonneg(p, domain, margin=0.0)
    except NoCertificate:
        report.unverified.append((name, (0, 0)))


def check_positive(sys: ImpulsiveSystem, domain: tuple[float, float]) -> PositivityReport:
    """Audit internal positivity on tau in [0, T]: A Metzler, everything else nonnegative.

    Entries are certified nonnegative with the interval certificate and refereed
    by the grid falsifier; `positive` only when every required entry is certified.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= 0 or lo != 0.0:
        raise InvalidDomain(f"domain must be [0, T] with T > 0, got [{lo}, {hi}]")
    report = PositivityReport(positive=True)
    n = sys.n

    def scan_entry(name: str, i: int, j: int, p: Poly):
        before = (len(report.violations), len(report.unverified))
        _check_entry_nonneg(report, name, p, (lo, hi))
        for k in range(before[0], len(report.violations)):
            nm, _, tau, val = report.violations[k]
            report.violations[k] = (nm, (i, j), tau, val)
        for k in range(before[1], len(report.unverified)):
            nm, _ = report.unverified[k]
            report.unverified[k] = (nm, (i, j))

    for i in range(n):
        for j in range(n):
            if i != j:
                scan_entry("A", i, j, sys.A.entry(i, j))
    for name, mat in (("Ec", sys.Ec), ("Cc", sys.Cc), ("Fc", sys.Fc)):
        r, c = mat.shape
        for i in range(r):
            for j in range(c):
                scan_entry(name, i, j, mat.entry(i, j))
    for k, jm in enumerate(sys.jumps):
        for name, m in (("J", jm.J), ("Ed", jm.Ed), ("Cd", jm.Cd), ("Fd", jm.Fd)):
            bad = np.argwhere(m < 0.0)
            for i, j in bad:
                report.violations.append((f"jumps[{k}].{name}", (int(i), int(j)), None, float(m[i, j])))
    report.positive = not report.violations and not report.unverified
    return report


def lift_switched(sw: SwitchedSystem) -> ImpulsiveSystem:
    """Rewrite an N-mode switched system as an Nn-state impulsive system whose
    jump maps select the active diagonal block."""
    if sw.N < 2:
        raise DimensionMismatch("lifting requires at least two modes")
    N, n, m, p, q = sw.N, sw.n, sw.m, sw.p, sw.q
    dmax = 1 + max(max(md[k].degree for k in "ABECDF") for md in sw.modes)

    def blkdiag(key, rows, cols):
        arr = np.zeros((N * rows, N * cols, dmax))
        for i, md in enumerate(sw.modes):
            c = md[key].coeffs
            arr[i * rows : (i + 1) * rows, i * cols : (i + 1) * cols, : c.shape[2]] = c
        return PolyMatrix(arr)

    def colstack(key, rows, cols):
        arr = np.zeros((N * rows, cols, dmax))
        for i, md in enumerate(sw.modes):
            c = md[key].coeffs
            arr[i * rows : (i + 1) * rows, :, : c.shape[2]] = c
        return PolyMatrix(arr)

    A = blkdiag("A", n, n)
    B = blkdiag("B", n, m)
    E = colstack("E", n, p)
    C = blkdiag("C", q, n)
    D = blkdiag("D", q, m)
    F = colstack("F", q, p)

    jumps = []
    for dst in range(N):
        for src in range(N):
            if dst == src:
                continue
            sel = np.zeros((N, N))
            sel[dst, src] = 1.0
            jumps.append(
                JumpMap(
                    J=np.kron(sel, np.eye(n)),
                    Bd=np.zeros((N * n, 0)),
                    Ed=np.zeros((N * n, 0)),
                    Cd=np.zeros((0, N * n)),
                    Dd=np.zeros((0, 0)),
                    Fd=np.zeros((0, 0)),
                    tag=(src, dst),
                )
            )
    sys = ImpulsiveSystem(A, B, E, C, D, F, tuple(jumps))
    sys.validate()
    return sys


def adjoint(sys: ImpulsiveSystem) -> ImpulsiveSystem:
    """Adjoint realization: transposed matrices with input/output roles swapped.

    Semantics run backward in time (recorded in `time_reversed`); defined only
    for single-jump systems without control channels.
    """
    if len(sys.jumps) != 1:
        raise Unsupported("adjoint is defined only for single-jump-map systems")
    if sys.mc != 0 or sys.md != 0:
        raise Unsupported("adjoint is defined for systems without control channels")
    jm = sys.jump
    out = ImpulsiveSystem(
        A=sys.A.T,
        Bc=PolyMatrix.zeros(sys.n, 0),
        Ec=sys.Cc.T,
        Cc=sys.Ec.T,
        Dc=PolyMatrix.zeros(sys.pc, 0),
        Fc=sys.Fc.T,
        jumps=(
            JumpMap(
                J=jm.J.T.copy(),
                Bd=np.zeros((sys.n, 0)),
                Ed=jm.Cd.T.copy(),
                Cd=jm.Ed.T.copy(),
                Dd=np.zeros((sys.pd, 0)),
                Fd=jm.Fd.T.copy(),
            ),
        ),
        time_reversed=not sys.time_reversed,
    )
    out.validate()
    return out


# --- JSON round-trip ---------------------------------------------------------

_CONT_KEYS = ("A", "Bc", "Ec", "Cc", "Dc", "Fc")
_DISC_KEYS = ("J", "Bd", "Ed", "Cd", "Dd", "Fd")


def _jump_to_json(jm: JumpMap) -> dict:
    out = {k: getattr(jm, k).tolist() for k in _DISC_KEYS if getattr(jm, k).size}
    if jm.tag is not None:
        out["tag"] = list(jm.tag)
    return out


def system_to_json(sys: Union[ImpulsiveSystem, SwitchedSystem]) -> dict:
    if isinstance(sys, SwitchedSystem):
        return {
            "kind": "switched",
            "n": sys.n,
            "m": sys.m,
            "p": sys.p,
            "q": sys.q,
            "modes": [
                {k: md[k].to_json() for k in ("A", "B", "E", "C", "D", "F") if md[k].coeffs.size}
                for md in sys.modes
            ],
        }
    data = {
        "kind": "impulsive",
        "n": sys.n,
        "mc": sys.mc,
        "pc": sys.pc,
        "md": sys.md,
        "pd": sys.pd,
        "qc": sys.qc,
        "qd": sys.qd,
        "time_reversed": sys.time_reversed,
    }
    for k in _CONT_KEYS:
        m = getattr(sys, k)
        if m.coeffs.size:
            data[k] = m.to_json()
    if len(sys.jumps) == 1:
        data.update(_jump_to_json(sys.jump))
    else:
        data["jump_maps"] = [_jump_to_json(jm) for jm in sys.jumps]
    return data


def system_from_json(data: dict) -> Union[ImpulsiveSystem, SwitchedSystem]:
    try:
        if data.get("kind") == "switched" or "modes" in data:
            return SwitchedSystem.from_arrays(
                [
                    {k: PolyMatrix.from_entries(md[k]) if k in md else None for k in ("A", "B", "E", "C", "D", "F")}
                    for md in data["modes"]
                ]
            )
        cont = {k: PolyMatrix.from_entries(data[k]) if k in data else None for k in _CONT_KEYS}
        if "jump_maps" in data:
            jumps = data["jump_maps"]
            first, extra = jumps[0], jumps[1:]
        else:
            first, extra = {k: data[k] for k in _DISC_KEYS if k in data}, []
        sys = ImpulsiveSystem.from_arrays(
            A=cont["A"],
            Bc=cont["Bc"],
            Ec=cont["Ec"],
            Cc=cont["Cc"],
            Dc=cont["Dc"],
            Fc=cont["Fc"],
            J=first["J"],
            Bd=first.get("Bd"),
            Ed=first.get("Ed"),
            Cd=first.get("Cd"),
            Fd=first.get("Fd"),
            Dd=first.get("Dd"),
            extra_jumps=[
                {
                    "J": ex["J"],
                    "Bd": ex.get("Bd"),
                    "Ed": ex.get("Ed"),
                    "Cd": ex.get("Cd"),
                    "Dd": ex.get("Dd"),
                    "Fd": ex.get("Fd"),
                    "tag": tuple(ex["tag"]) if "tag" in ex else None,
                }
                for ex in extra
            ],
        )
        if data.get("time_reversed"):
            sys = replace(sys, time_reversed=True)
        declared = {k: data[k] for k in ("n", "mc", "pc", "md", "pd", "qc", "qd") if k in data}
        for k, v in declared.items():
            if getattr(sys, k) != v:
                raise DimensionMismatch(f"declared {k}={v} but matrices give {getattr(sys, k)}")
        return sys
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r} in system file") from exc


def save_system(sys: Union[ImpulsiveSystem, SwitchedSystem], path: str) -> None:
    with open(path, "w") as fh:
        json.dump(system_to_json(sys), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_system(path: str) -> Union[ImpulsiveSystem, SwitchedSystem]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return system_from_json(data)
