"""Gain analysis: build and minimize the linear programs behind each
dwell-time stability/performance condition and return a checkable Certificate.

Every strict theorem inequality "expr < 0" is encoded as "-expr >= margin";
interval-valued rows embed a nonnegative-combination (interval certificate)
expansion directly into the LP, point rows are plain LP rows.  gamma enters
every encoding affinely and is minimized directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    Infeasible,
    NotConstant,
    NumericalFailure,
    ParseError,
    RelaxationLimit,
)
from .lp import LinearProgram, LinExpr, PolyExpr, lp_solve
from .model import DwellTimeSpec, ImpulsiveSystem, PolyMatrix, SwitchedSystem
from .poly import HandelmanCertificate, Poly

__all__ = [
    "Certificate",
    "CertifiedRow",
    "analyze_arbitrary",
    "analyze_constant",
    "analyze_minimum",
    "analyze_range",
    "analyze_switched_min",
    "analyze_switched_blanchini",
    "analyze_lti",
    "DEFAULT_MARGIN",
    "DEFAULT_JUMP_MARGIN",
    "RELAX_SCHEDULE",
]

DEFAULT_MARGIN = 1e-6
# Strictness offset on the jump rows.  The reference results for this family of
# conditions embed a 0.01 closure of the discrete-time inequality; keeping it as
# the default makes certified gains reproduce those values (it only strengthens
# the certificate, so soundness is unaffected).
DEFAULT_JUMP_MARGIN = 1e-2
RELAX_SCHEDULE = (4, 6, 8, 10)
_ZETA_PIN = 1e6  # upper bound on zeta(0) fixing the free scaling
_REFEREE_SAMPLES = 51


@dataclass
class CertifiedRow:
    """One encoded theorem row at the solved point."""

    family: str
    index: int
    poly: Poly
    margin: float
    interval: Optional[tuple[float, float]] = None
    handelman: Optional[HandelmanCertificate] = None


@dataclass
class Certificate:
    """Sufficient proof object for one analysis theorem."""

    kind: str
    gamma: float
    zeta: Union[list[Poly], list[list[Poly]]]
    dwell: DwellTimeSpec
    margin: float
    jump_margin: float
    degree: int
    rows: list[CertifiedRow] = field(default_factory=list)
    aux: dict = field(default_factory=dict)
    relax: int = 0

    @property
    def per_mode(self) -> bool:
        return self.kind == "SwitchedMinDT"

    def zeta_vectors(self) -> list[list[Poly]]:
        return self.zeta if self.per_mode else [self.zeta]

    def to_json(self) -> dict:
        def poly_list(polys):
            return [p.to_json() for p in polys]

        data = {
            "type": "certificate",
            "kind": self.kind,
            "gamma": self.gamma,
            "dwell": str(self.dwell),
            "margin": self.margin,
            "jump_margin": self.jump_margin,
            "degree": self.degree,
            "relax": self.relax,
            "zeta": [poly_list(z) for z in self.zeta] if self.per_mode else poly_list(self.zeta),
            "aux": {k: poly_list(v) if k == "mu" else v for k, v in self.aux.items()},
            "rows": [
                {
                    "family": r.family,
                    "index": r.index,
                    "poly": r.poly.to_json(),
                    "margin": r.margin,
                    "interval": list(r.interval) if r.interval else None,
                    "handelman": (
                        {
                            "interval": list(r.handelman.interval),
                            "order": r.handelman.order,
                            "weights": [[i, j, c] for (i, j), c in sorted(r.handelman.weights.items())],
                        }
                        if r.handelman
                        else None
                    ),
                }
                for r in self.rows
            ],
        }
        return data

    @staticmethod
    def from_json(data: dict) -> "Certificate":
        try:
            kind = data["kind"]
            per_mode = kind == "SwitchedMinDT"
            zeta = (
                [[Poly.from_json(p) for p in mode] for mode in data["zeta"]]
                if per_mode
                else [Poly.from_json(p) for p in data["zeta"]]
            )
            rows = []
            for r in data.get("rows", []):
                hc = None
                if r.get("handelman"):
                    h = r["handelman"]
                    hc = HandelmanCertificate(
                        interval=tuple(h["interval"]),
                        order=int(h["order"]),
                        weights={(int(i), int(j)): float(c) for i, j, c in h["weights"]},
                    )
                rows.append(
                    CertifiedRow(
                        family=r["family"],
                        index=int(r["index"]),
                        poly=Poly.from_json(r["poly"]),
                        margin=float(r["margin"]),
                        interval=tuple(r["interval"]) if r.get("interval") else None,
                        handelman=hc,
                    )
                )
            aux = {
                k: [Poly.from_json(p) for p in v] if k == "mu" else v
                for k, v in data.get("aux", {}).items()
            }
            return Certificate(
                kind=kind,
                gamma=float(data["gamma"]),
                zeta=zeta,
                dwell=DwellTimeSpec.parse(data["dwell"]),
                margin=float(data["margin"]),
                jump_margin=float(data.get("jump_margin", data["margin"])),
                degree=int(data["degree"]),
                rows=rows,
                aux=aux,
                relax=int(data.get("relax", 0)),
            )
        except KeyError as exc:
            raise ParseError(f"certificate file missing field {exc.args[0]!r}") from exc

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path: str) -> "Certificate":
        with open(path) as fh:
            return Certificate.from_json(json.load(fh))


def _row_ones(pm: PolyMatrix, i: int) -> Poly:
    """Sum of row i's entries: (M(tau) * ones)_i as a polynomial."""
    out = Poly.const(0.0)
    for j in range(pm.shape[1]):
        out = out + pm.entry(i, j)
    return out


def _matvec_row(pm: PolyMatrix, i: int, zeta: Sequence[PolyExpr]) -> PolyExpr:
    """(M(tau) zeta(tau))_i as a PolyExpr."""
    out = PolyExpr.zero()
    for j, z in enumerate(zeta):
        entry = pm.entry(i, j)
        if not entry.is_zero:
            out = out + z.mul_poly(entry.coeffs)
    return out


def _const_matvec_row(mat: np.ndarray, i: int, vals: Sequence[LinExpr]) -> LinExpr:
    out = LinExpr()
    for j, v in enumerate(vals):
        out.add_inplace(v, float(mat[i, j]))
    return out


class _Program:
    """LP under construction plus bookkeeping to extract certified rows."""

    def __init__(self, relax: int):
        self.lp = LinearProgram()
        self.relax = relax
        self.interval_records: list[dict] = []
        self.point_records: list[dict] = []

    def scalar(self, lo=None, hi=None, name="") -> int:
        return self.lp.new_var(lo, hi, name)

    def poly_vec(self, n: int, degree: int, name: str) -> list[PolyExpr]:
        out = []
        for i in range(n):
            ids = [self.lp.new_var(name=f"{name}{i}_c{k}") for k in range(degree + 1)]
            out.append(PolyExpr.from_vars(ids))
        return out

    def add_point_ge(self, family: str, index: int, expr: LinExpr, margin: float) -> None:
        # expr >= margin
        self.lp.add_ge(dict(expr.coeffs), margin - expr.const)
        self.point_records.append(
            {"family": family, "index": index, "expr": expr, "margin": margin}
        )

    def add_interval_ge(
        self,
        family: str,
        index: int,
        pexpr: PolyExpr,
        interval: tuple[float, float],
        margin: float,
    ) -> None:
        """pexpr(t) >= margin on [a, b] via the product-basis cone at solver level."""
        a, b = interval
        if not a < b:
            # degenerate interval: a single point row
            self.add_point_ge(family, index, pexpr.eval_at(a), margin)
            return
        h = b - a
        order = pexpr.degree + self.relax
        q = pexpr.shift_scale_arg(a, h)  # q(s) = pexpr(a + h s), s in [0, 1]
        pairs = [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]
        basis = {
            ij: ((Poly((0.0, 1.0)) ** ij[0]) * (Poly((1.0, -1.0)) ** ij[1])).coeffs
            for ij in pairs
        }
        cone = [self.lp.new_var(0.0, None, name=f"{family}{index}_h{i}_{j}") for i, j in pairs]
        for k in range(order + 1):
            row: dict[int, float] = {}
            const = 0.0
            if k <= q.degree:
                for v, c in q.coeffs[k].coeffs.items():
                    row[v] = row.get(v, 0.0) + c
                const = q.coeffs[k].const
            for v, ij in zip(cone, pairs):
                bc = basis[ij]
                if k < len(bc) and bc[k] != 0.0:
                    row[v] = row.get(v, 0.0) - bc[k]
            rhs = (margin if k == 0 else 0.0) - const
            self.lp.add_eq(row, rhs)
        self.interval_records.append(
            {
                "family": family,
                "index": index,
                "pexpr": pexpr,
                "interval": (a, b),
                "order": order,
                "margin": margin,
                "cone": cone,
                "pairs": pairs,
                "h": h,
            }
        )

    def solve_min(self, gamma: int, extra_obj: Optional[dict[int, float]] = None):
        obj = {gamma: 1.0}
        if extra_obj:
            for v, c in extra_obj.items():
                obj[v] = obj.get(v, 0.0) + c
        self.lp.set_objective(obj)
        return lp_solve(self.lp)

    def sampled_referee(self) -> LinearProgram:
        """Same program with interval rows imposed on a finite grid only.

        This relaxation is necessary for the true semi-infinite program, so its
        infeasibility proves genuine infeasibility (vs. a relaxation limit).
        """
        lp = LinearProgram()
        lp.num_vars = self.lp.num_vars
        lp.bounds = dict(self.lp.bounds)
        lp.objective = dict(self.lp.objective)
        for rec in self.point_records:
            expr, margin = rec["expr"], rec["margin"]
            lp.add_ge(dict(expr.coeffs), margin - expr.const)
        for rec in self.interval_records:
            a, b = rec["interval"]
            for t in np.linspace(a, b, _REFEREE_SAMPLES):
                e = rec["pexpr"].eval_at(float(t))
                lp.add_ge(dict(e.coeffs), rec["margin"] - e.const)
        return lp

    def extract_rows(self, x: np.ndarray) -> list[CertifiedRow]:
        rows = []
        for rec in self.point_records:
            rows.append(
                CertifiedRow(
                    family=rec["family"],
                    index=rec["index"],
                    poly=Poly.const(rec["expr"].value(x)),
                    margin=rec["margin"],
                )
            )
        for rec in self.interval_records:
            weights = {}
            h = rec["h"]
            for v, (i, j) in zip(rec["cone"], rec["pairs"]):
                c = float(x[v])
                if c > 0.0:
                    weights[(i, j)] = c / h ** (i + j)
            rows.append(
                CertifiedRow(
                    family=rec["family"],
                    index=rec["index"],
                    poly=rec["pexpr"].value(x),
                    margin=rec["margin"],
                    interval=rec["interval"],
                    handelman=HandelmanCertificate(rec["interval"], rec["order"], weights),
                )
            )
        return rows


def _gain_rows_constant_like(
    prog: _Program,
    sys: ImpulsiveSystem,
    zeta: list[PolyExpr],
    gamma: int,
    tau_interval: tuple[float, float],
    jump_at,
    margin: float,
    jump_margin: float,
    stationary_at: Optional[float] = None,
    theta_interval: Optional[tuple[float, float]] = None,
    mu: Optional[list[PolyExpr]] = None,
):
    """Common rows for the constant/minimum/range conditions.

    jump_at: the timer value (or PolyExpr-evaluable theta handling) at which
    jump/discrete-output rows are imposed; with theta_interval set the rows are
    imposed as polynomials in theta over that interval (mu substitutes for
    zeta(theta) when provided).
    """
    n, qc = sys.n, sys.qc
    gam = PolyExpr([LinExpr.variable(gamma)])

    # flow rows: zeta' - A zeta - Ec*1 >= margin on tau_interval
    for i in range(n):
        expr = zeta[i].deriv() - _matvec_row(sys.A, i, zeta) - PolyExpr.from_poly(
            _row_ones(sys.Ec, i).coeffs
        )
        prog.add_interval_ge("flow", i, expr, tau_interval, margin)

    # continuous output rows: gamma - Cc zeta - Fc*1 >= margin on tau_interval
    for i in range(qc):
        expr = gam - _matvec_row(sys.Cc, i, zeta) - PolyExpr.from_poly(_row_ones(sys.Fc, i).coeffs)
        prog.add_interval_ge("out_c", i, expr, tau_interval, margin)

    # stationary rows at tau = T (minimum dwell-time only)
    if stationary_at is not None:
        T = stationary_at
        A_T = sys.A(T)
        Ec_T = sys.Ec(T).sum(axis=1)
        zeta_T = [z.eval_at(T) for z in zeta]
        for i in range(n):
            expr = -_const_matvec_row(A_T, i, zeta_T) - Ec_T[i]
            prog.add_point_ge("stat_flow", i, expr, margin)
        Cc_T = sys.Cc(T)
        Fc_T = sys.Fc(T).sum(axis=1)
        for i in range(qc):
            expr = LinExpr.variable(gamma) - _const_matvec_row(Cc_T, i, zeta_T) - Fc_T[i]
            prog.add_point_ge("stat_out", i, expr, margin)

    # jump and discrete output rows, per jump map
    zeta0 = [z.eval_at(0.0) for z in zeta]
    for jk, jm in enumerate(sys.jumps):
        Ed1 = jm.Ed.sum(axis=1)
        Fd1 = jm.Fd.sum(axis=1)
        if theta_interval is None:
            T = jump_at
            target = [z.eval_at(T) for z in zeta] if mu is None else [m.eval_at(T) for m in mu]
            for i in range(n):
                expr = zeta0[i] - _const_matvec_row(jm.J, i, target) - Ed1[i]
                prog.add_point_ge(f"jump[{jk}]", i, expr, jump_margin)
            for i in range(jm.Cd.shape[0]):
                expr = (
                    LinExpr.variable(gamma)
                    - _const_matvec_row(jm.Cd, i, target)
                    - Fd1[i]
                )
                prog.add_point_ge(f"out_d[{jk}]", i, expr, margin)
        else:
            target_p = zeta if mu is None else mu
            for i in range(n):
                expr = PolyExpr([zeta0[i]])
                for j in range(n):
                    if jm.J[i, j] != 0.0:
                        expr = expr - target_p[j].scaled(jm.J[i, j])
                expr = expr - PolyExpr.from_poly([Ed1[i]])
                prog.add_interval_ge(f"jump[{jk}]", i, expr, theta_interval, jump_margin)
            for i in range(jm.Cd.shape[0]):
                expr = gam
                for j in range(n):
                    if jm.Cd[i, j] != 0.0:
                        expr = expr - target_p[j].scaled(jm.Cd[i, j])
                expr = expr - PolyExpr.from_poly([Fd1[i]])
                prog.add_interval_ge(f"out_d[{jk}]", i, expr, theta_interval, margin)

    # mu domination rows: mu(theta) - zeta(theta) >= 0 on theta interval
    if mu is not None and theta_interval is not None:
        for i in range(n):
            prog.add_interval_ge("mu_dom", i, mu[i] - zeta[i], theta_interval, 0.0)

    # scaling pin: margin <= zeta_i(0) <= PIN
    for i in range(n):
        prog.add_point_ge("pin_lo", i, zeta0[i], margin)
        prog.add_point_ge("pin_hi", i, LinExpr.constant(_ZETA_PIN) - zeta0[i], 0.0)


def _solve_with_escalation(build, degree: int, relax_schedule=RELAX_SCHEDULE, dump_lp=None):
    """build(relax) -> (_Program, gamma var, finalize[, extra_obj]); escalate the
    relaxation order on infeasibility, then classify via the sampled referee."""
    last_prog = None
    for relax in relax_schedule:
        built = build(relax)
        prog, gamma, finalize = built[:3]
        extra_obj = built[3] if len(built) > 3 else None
        last_prog = (prog, gamma, finalize)
        try:
            sol = prog.solve_min(gamma, extra_obj)
        except NumericalFailure:
            continue
        if sol.status == "Optimal":
            if dump_lp:
                from .lp import dump_lp as _dump

                _dump(prog.lp, dump_lp)
            return finalize(prog, sol, relax)
        if sol.status == "Unbounded":
            raise NumericalFailure("gain LP unbounded; encoding error")
        if not prog.interval_records:
            raise Infeasible("conditions infeasible (finite LP)")
    prog = last_prog[0]
    referee = prog.sampled_referee()
    ref_sol = lp_solve(referee)
    if ref_sol.status == "Optimal":
        raise RelaxationLimit(
            f"interval relaxation exhausted at order +{relax_schedule[-1]} "
            "while the sampled referee stays feasible"
        )
    raise Infeasible("conditions infeasible (sampled referee LP infeasible)")


def analyze_arbitrary(
    sys: ImpulsiveSystem,
    margin: float = DEFAULT_MARGIN,
    jump_margin: float = DEFAULT_JUMP_MARGIN,
) -> Certificate:
    """Arbitrary dwell-time gain bound for constant-matrix systems (plain LP)."""
    if not sys.is_constant():
        raise NotConstant("arbitrary dwell-time analysis needs constant matrices")
    A = sys.A.const()
    Ec1 = sys.Ec.const().sum(axis=1)
    Cc = sys.Cc.const()
    Fc1 = sys.Fc.const().sum(axis=1)
    n, qc = sys.n, sys.qc

    prog = _Program(relax=0)
    lam = [prog.scalar(name=f"lam{i}") for i in range(n)]
    gamma = prog.scalar(lo=0.0, name="gamma")
    lam_e = [LinExpr.variable(v) for v in lam]
    for i in range(n):
        prog.add_point_ge("flow", i, -_const_matvec_row(A, i, lam_e) - Ec1[i], margin)
    for i in range(qc):
        prog.add_point_ge(
            "out_c", i, LinExpr.variable(gamma) - _const_matvec_row(Cc, i, lam_e) - Fc1[i], margin
        )
    for jk, jm in enumerate(sys.jumps):
        JmI = jm.J - np.eye(n)
        Ed1 = jm.Ed.sum(axis=1)
        Fd1 = jm.Fd.sum(axis=1)
        for i in range(n):
            prog.add_point_ge(
                f"jump[{jk}]", i, -_const_matvec_row(JmI, i, lam_e) - Ed1[i], jump_margin
            )
        for i in range(jm.Cd.shape[0]):
            prog.add_point_ge(
                f"out_d[{jk}]",
                i,
                LinExpr.variable(gamma) - _const_matvec_row(jm.Cd, i, lam_e) - Fd1[i],
                margin,
            )
    for i in range(n):
        prog.add_point_ge("pin_lo", i, lam_e[i], margin)
        prog.add_point_ge("pin_hi", i, LinExpr.constant(_ZETA_PIN) - lam_e[i], 0.0)
    sol = prog.solve_min(gamma)
    if sol.status != "Optimal":
        raise Infeasible("no positive vector satisfies the arbitrary dwell-time conditions")
    return Certificate(
        kind="ArbitraryDT",
        gamma=float(sol.x[gamma]),
        zeta=[Poly.const(sol.x[v]) for v in lam],
        dwell=DwellTimeSpec.arbitrary(),
        margin=margin,
        jump_margin=jump_margin,
        degree=0,
        rows=prog.extract_rows(sol.x),
    )


def _analyze_hybrid(
    sys: ImpulsiveSystem,
    dwell: DwellTimeSpec,
    degree: int,
    margin: float,
    jump_margin: float,
    relax_schedule,
    mu_variant: bool = False,
    dump_lp=None,
) -> Certificate:
    if degree < 0:
        raise ValueError("degree must be >= 0")
    Tend = dwell.horizon_tau()
    kind = {"constant": "ConstantDT", "minimum": "MinimumDT", "range": "RangeDT"}[dwell.kind]

    def build(relax: int):
        prog = _Program(relax)
        zeta = prog.poly_vec(sys.n, degree, "zeta")
        gamma = prog.scalar(lo=0.0, name="gamma")
        mu = None
        theta_interval = None
        jump_at: Optional[float] = None
        stationary_at = None
        if dwell.kind == "constant":
            jump_at = dwell.T
        elif dwell.kind == "minimum":
            jump_at = dwell.T
            stationary_at = dwell.T
        else:
            if dwell.Tmax - dwell.Tmin > 1e-12:
                theta_interval = (dwell.Tmin, dwell.Tmax)
                if mu_variant:
                    mu = prog.poly_vec(sys.n, degree, "mu")
            else:
                jump_at = dwell.Tmin
        _gain_rows_constant_like(
            prog,
            sys,
            zeta,
            gamma,
            (0.0, Tend),
            jump_at,
            margin,
            jump_margin,
            stationary_at=stationary_at,
            theta_interval=theta_interval,
            mu=mu,
        )

        def finalize(prog, sol, relax):
            zp = [z.value(sol.x) for z in zeta]
            aux = {}
            if mu is not None:
                aux["mu"] = [m.value(sol.x) for m in mu]
            return Certificate(
                kind=kind,
                gamma=float(sol.x[gamma]),
                zeta=zp,
                dwell=dwell,
                margin=margin,
                jump_margin=jump_margin,
                degree=degree,
                rows=prog.extract_rows(sol.x),
                aux=aux,
                relax=relax,
            )

        return prog, gamma, finalize

    return _solve_with_escalation(build, degree, relax_schedule, dump_lp=dump_lp)


def analyze_constant(
    sys: ImpulsiveSystem,
    T: float,
    degree: int,
    margin: float = DEFAULT_MARGIN,
    jump_margin: float = DEFAULT_JUMP_MARGIN,
    relax_schedule=RELAX_SCHEDULE,
    dump_lp=None,
) -> Certificate:
    """Constant dwell-time hybrid-gain bound via a timer-polynomial vector."""
    return _analyze_hybrid(
        sys, DwellTimeSpec.constant(T), degree, margin, jump_margin, relax_schedule,
        dump_lp=dump_lp,
    )


def analyze_minimum(
    sys: ImpulsiveSystem,
    T: float,
    degree: int,
    margin: float = DEFAULT_MARGIN,
    jump_margin: float = DEFAULT_JUMP_MARGIN,
    relax_schedule=RELAX_SCHEDULE,
    dump_lp=None,
) -> Certificate:
    """Minimum dwell-time bound: constant-dwell rows plus stationarity at T.

    Timer clamping (matrices frozen at T for tau >= T) is part of the system
    semantics downstream (simulation/verification)."""
    return _analyze_hybrid(
        sys, DwellTimeSpec.minimum(T), degree, margin, jump_margin, relax_schedule,
        dump_lp=dump_lp,
    )


def analyze_range(
    sys: ImpulsiveSystem,
    Tmin: float,
    Tmax: float,
    degree: int,
    mode: str = "direct",
    margin: float = DEFAULT_MARGIN,
    jump_margin: float = DEFAULT_JUMP_MARGIN,
    relax_schedule=RELAX_SCHEDULE,
    dump_lp=None,
) -> Certificate:
    """Range dwell-time bound; jump rows become polynomials in the dwell theta.

    mode="mu_variant" adds the dominating vector used by dwell-time-independent
    synthesis (zeta(theta) <= mu(theta))."""
    if mode not in ("direct", "mu_variant"):
        raise ValueError(f"unknown mode {mode!r}")
    return _analyze_hybrid(
        sys,
        DwellTimeSpec.range(Tmin, Tmax),
        degree,
        margin,
        jump_margin,
        relax_schedule,
        mu_variant=(mode == "mu_variant"),
        dump_lp=dump_lp,
    )


def analyze_switched_min(
    sw: SwitchedSystem,
    T: float,
    degree: int,
    margin: float = DEFAULT_MARGIN,
    relax_schedule=RELAX_SCHEDULE,
    dump_lp=None,
) -> Certificate:
    """Minimum dwell-time L-infinity bound for switched systems: one polynomial
    vector per mode, coupled at the switch (nonstrict coupling rows)."""
    if sw.N < 2:
        raise DimensionMismatch("switched analysis needs at least two modes")
    if T <= 0:
        raise ValueError("T must be positive")
    n, q = sw.n, sw.q

    def build(relax: int):
        prog = _Program(relax)
        zetas = [prog.poly_vec(n, degree, f"zeta{i}_") for i in range(sw.N)]
        gamma = prog.scalar(lo=0.0, name="gamma")
        gam = PolyExpr([LinExpr.variable(gamma)])
        for i, md in enumerate(sw.modes):
            zeta = zetas[i]
            for r in range(n):
                expr = zeta[r].deriv() - _matvec_row(md["A"], r, zeta) - PolyExpr.from_poly(
                    _row_ones(md["E"], r).coeffs
                )
                prog.add_interval_ge(f"flow[{i}]", r, expr, (0.0, T), margin)
            for r in range(q):
                expr = gam - _matvec_row(md["C"], r, zeta) - PolyExpr.from_poly(
                    _row_ones(md["F"], r).coeffs
                )
                prog.add_interval_ge(f"out_c[{i}]", r, expr, (0.0, T), margin)
            A_T = md["A"](T)
            E_T = md["E"](T).sum(axis=1)
            C_T = md["C"](T)
            F_T = md["F"](T).sum(axis=1)
            zT = [z.eval_at(T) for z in zeta]
            for r in range(n):
                prog.add_point_ge(f"stat_flow[{i}]", r, -_const_matvec_row(A_T, r, zT) - E_T[r], margin)
            for r in range(q):
                prog.add_point_ge(
                    f"stat_out[{i}]",
                    r,
                    LinExpr.variable(gamma) - _const_matvec_row(C_T, r, zT) - F_T[r],
                    margin,
                )
            z0 = [z.eval_at(0.0) for z in zeta]
            for r in range(n):
                prog.add_point_ge(f"pin_lo[{i}]", r, z0[r], margin)
                prog.add_point_ge(f"pin_hi[{i}]", r, LinExpr.constant(_ZETA_PIN) - z0[r], 0.0)
        # coupling: zeta_j(T) - zeta_i(0) <= 0, i != j (closed inequality)
        for i in range(sw.N):
            for j in range(sw.N):
                if i == j:
                    continue
                zi0 = [z.eval_at(0.0) for z in zetas[i]]
                zjT = [z.eval_at(T) for z in zetas[j]]
                for r in range(n):
                    prog.add_point_ge(f"couple[{j}->{i}]", r, zi0[r] - zjT[r], 0.0)

        def finalize(prog, sol, relax):
            return Certificate(
                kind="SwitchedMinDT",
                gamma=float(sol.x[gamma]),
                zeta=[[z.value(sol.x) for z in zeta] for zeta in zetas],
                dwell=DwellTimeSpec.minimum(T),
                margin=margin,
                jump_margin=0.0,
                degree=degree,
                rows=prog.extract_rows(sol.x),
                relax=relax,
            )

        return prog, gamma, finalize

    return _solve_with_escalation(build, degree, relax_schedule, dump_lp=dump_lp)


def analyze_switched_blanchini(
    sw: SwitchedSystem,
    T: float,
    grid_points: int = 101,
    margin: float = DEFAULT_MARGIN,
) -> float:
    """Reference bound from the classical per-mode vector conditions, with the
    output coupling row sampled on a timer grid (necessary-only gridding)."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    for md in sw.modes:
        if any(not md[k].is_constant for k in ("A", "E", "C", "F")):
            raise NotConstant("this comparison bound needs timer-independent modes")
    from .cert import flow_grid

    n, q, N = sw.n, sw.q, sw.N
    taus = np.linspace(0.0, T, grid_points)
    Phis, forced = [], []
    for md in sw.modes:
        Ph, rr = flow_grid(md["A"], md["E"], taus, clamp=None)
        Phis.append(Ph)
        forced.append(rr)

    lp = LinearProgram()
    lam = [[lp.new_var(name=f"lam{i}_{r}") for r in range(n)] for i in range(N)]
    gamma = lp.new_var(lo=0.0, name="gamma")
    for i, md in enumerate(sw.modes):
        A = md["A"].const()
        E1 = md["E"].const().sum(axis=1)
        for r in range(n):
            lp.add_le({lam[i][c]: A[r, c] for c in range(n)}, -E1[r] - margin)
    for i in range(N):
        eAT = Phis[i][-1]
        integ = forced[i][-1]
        for j in range(N):
            if i == j:
                continue
            for r in range(n):
                row = {lam[j][c]: eAT[r, c] for c in range(n)}
                row[lam[i][r]] = row.get(lam[i][r], 0.0) - 1.0
                lp.add_le(row, -integ[r] - margin)
    for i, md in enumerate(sw.modes):
        C = md["C"].const()
        F1 = md["F"].const().sum(axis=1)
        for j in range(N):
            if i == j:
                continue
            for Ph in Phis[i]:
                CP = C @ Ph
                CmCP = C - CP
                for r in range(q):
                    row = {lam[i][c]: CmCP[r, c] for c in range(n)}
                    for c in range(n):
                        row[lam[j][c]] = row.get(lam[j][c], 0.0) + CP[r, c]
                    row[gamma] = -1.0
                    lp.add_le(row, -F1[r] - margin)
    for i in range(N):
        for r in range(n):
            lp.add_ge({lam[i][r]: 1.0}, margin)
    lp.set_objective({gamma: 1.0})
    sol = lp_solve(lp)
    if sol.status != "Optimal":
        raise Infeasible("per-mode vector conditions infeasible at this dwell-time")
    return float(sol.objective_value)


def analyze_lti(
    sys: ImpulsiveSystem,
    norm: str = "Linf",
    time: str = "continuous",
    margin: float = 0.0,
) -> tuple[float, np.ndarray]:
    """LTI gain corollaries: minimal gamma plus the witness vector.

    continuous uses (A, Ec, Cc, Fc); discrete uses the jump tuple (J, Ed, Cd, Fd)
    as the one-step system."""
    if norm not in ("Linf", "L1") or time not in ("continuous", "discrete"):
        raise ValueError("norm must be Linf|L1 and time continuous|discrete")
    if not sys.is_constant():
        raise NotConstant("LTI analysis needs constant matrices")
    if time == "continuous":
        A = sys.A.const()
        E = sys.Ec.const()
        C = sys.Cc.const()
        F = sys.Fc.const()
    else:
        jm = sys.jump
        A, E, C, F = jm.J, jm.Ed, jm.Cd, jm.Fd
    n = A.shape[0]
    q, p = C.shape[0], E.shape[1]

    lp = LinearProgram()
    v = [lp.new_var(lo=1e-12, name=f"v{i}") for i in range(n)]
    gamma = lp.new_var(lo=0.0, name="gamma")
    if norm == "Linf":
        Aeff = A if time == "continuous" else A - np.eye(n)
        for i in range(n):
            lp.add_le({v[j]: Aeff[i, j] for j in range(n)}, -float(E[i].sum()) - margin)
        for i in range(q):
            row = {v[j]: C[i, j] for j in range(n)}
            row[gamma] = -1.0
            lp.add_le(row, -float(F[i].sum()) - margin)
    else:
        Aeff = A if time == "continuous" else A - np.eye(n)
        ones_q = np.ones(q)
        for j in range(n):
            lp.add_le({v[i]: Aeff[i, j] for i in range(n)}, -float(ones_q @ C[:, j]) - margin)
        for j in range(p):
            row = {v[i]: E[i, j] for i in range(n)}
            row[gamma] = -1.0
            lp.add_le(row, -float(ones_q @ F[:, j]) - margin)
    lp.set_objective({gamma: 1.0})
    sol = lp_solve(lp)
    if sol.status != "Optimal":
        raise Infeasible("system not certifiably stable (LTI vector conditions)")
    return float(sol.x[gamma]), np.array([sol.x[i] for i in v])
