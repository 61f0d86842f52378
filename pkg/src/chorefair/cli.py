"""Command line entry point and the end-to-end pipelines behind it.

Exit codes: 0 success, 1 a ``check`` that did not pass, 2 bad input or an
unmet precondition, 3 an exhausted budget, 4 an internal invariant failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any

import click

from . import instances as io_
from .bivalued import bivalued_3efx_po, bivalued_efx_po_small
from .efx import four_efx, efx_small
from .enumeration import MAX_AGENTS, find_er_equilibrium_enum
from .errors import BudgetExceeded, ChoreFairError, InvariantViolation, ParseError, PreconditionViolated
from .instances import Allocation, ErInstance, Instance, as_fraction, fmt_fraction, normalize_bivalued, random_instance
from .lcp import DEFAULT_MAX_PIVOTS, solve_er
from .market import ErEquilibrium, allocation_dot, mpb_certificate, payment_graph_dot
from .rounding import balanced_po, rebalance_ef1, round_er_half, round_er_one
from .verify import (
    CRITERIA,
    FairnessQuery,
    check_fairness,
    efk_factor,
    efx_factor,
    is_efk,
    is_efx,
    is_two_ef2,
    minimal_alpha_oracle,
    po_bruteforce,
    verify_er,
)

GOALS = ("ef2po", "ef1po", "efx", "bivalued")
SOLVERS = ("auto", "lemke", "enum")
HALF = Fraction(1, 2)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3, 4


# pipeline


@dataclass
class RunReport:
    digest: str
    goal: str
    algorithm: str
    n: int
    m: int
    solver: str = ""
    efx: str = ""
    ef1: str = ""
    ef2: str = ""
    certificate: bool | None = None
    guarantee: bool = False
    pivots: int = 0
    swaps: int = 0
    seconds: float = 0.0
    params: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = asdict(self)
        out["params"] = json.dumps(self.params, sort_keys=True)
        return out


REPORT_FIELDS = list(RunReport.__dataclass_fields__)


def digest(inst: Instance) -> str:
    text = json.dumps(io_.to_json(inst), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    return "inf" if isinstance(v, float) else fmt_fraction(v)


def solve_equilibrium(er: ErInstance, solver: str = "auto", max_pivots: int = DEFAULT_MAX_PIVOTS) -> tuple[ErEquilibrium, str, int]:
    """Equilibrium plus the solver used and its pivot count."""
    if solver not in SOLVERS:
        raise PreconditionViolated(f"unknown solver {solver!r}")
    if solver == "enum" or (solver == "auto" and er.n <= 3):
        return find_er_equilibrium_enum(er, max_agents=max(MAX_AGENTS, er.n) if solver == "enum" else MAX_AGENTS), "enum", 0
    eq, trace = solve_er(er, max_pivots)
    return eq, "lemke", len(trace.pivots)


def pipeline(
    inst: Instance, goal: str, solver: str = "auto", max_pivots: int = DEFAULT_MAX_PIVOTS
) -> tuple[Allocation, tuple[Fraction, ...] | None, RunReport]:
    """Route to the algorithm for ``goal`` and re-verify its guarantee."""
    if goal not in GOALS:
        raise PreconditionViolated(f"unknown goal {goal!r}")
    start = time.perf_counter()
    n, m = inst.n, inst.m
    rep = RunReport(digest(inst), goal, "", n, m)
    swaps: list = []
    check_inst = inst
    if goal == "ef2po":
        if m <= 2 * n:
            rep.algorithm = "balanced_po"
            alloc = balanced_po(inst)
            ok = is_efk(inst, alloc, 2)
        else:
            rep.algorithm = "round_er_half"
            er = ErInstance.uniform(inst, 1, HALF)
            eq, rep.solver, rep.pivots = solve_equilibrium(er, solver, max_pivots)
            alloc = round_er_half(eq, er)
            ok = is_two_ef2(inst, alloc)
    elif goal == "ef1po":
        if m <= n:
            rep.algorithm = "balanced_po"
            alloc = balanced_po(inst)
            ok = is_efk(inst, alloc, 1)
        else:
            rep.algorithm = "round_er_one+rebalance_ef1"
            er = ErInstance.uniform(inst, 1, 1)
            eq, rep.solver, rep.pivots = solve_equilibrium(er, solver, max_pivots)
            alloc = rebalance_ef1(round_er_one(eq, er), eq, er, swaps)
            ok = is_efk(inst, alloc, 1, max(1, n - 1))
    elif goal == "efx":
        if m <= 2 * n:
            rep.algorithm = "efx_small"
            alloc = efx_small(inst, trace=swaps)
            ok = is_efx(inst, alloc)
        else:
            rep.algorithm = "four_efx"
            er = ErInstance.uniform(inst, 1, HALF)
            eq, rep.solver, rep.pivots = solve_equilibrium(er, solver, max_pivots)
            alloc = four_efx(eq, er, swaps)
            ok = is_efx(inst, alloc, 4)
    else:
        bform = normalize_bivalued(inst)
        rep.params["k"] = fmt_fraction(bform.k)
        check_inst = bform.scaled
        if m <= 2 * n:
            rep.algorithm = "bivalued_efx_po_small"
            alloc, _ = bivalued_efx_po_small(bform, swaps)
            ok = is_efx(inst, alloc)
        else:
            rep.algorithm = "bivalued_3efx_po"
            er = ErInstance.uniform(bform.scaled, 1, HALF)
            eq, rep.solver, rep.pivots = solve_equilibrium(er, solver, max_pivots)
            alloc, _ = bivalued_3efx_po(eq, er, bform, swaps)
            ok = is_efx(inst, alloc, 3)
    alloc.check(inst)
    if alloc.payments is not None:
        rep.certificate = mpb_certificate(alloc, alloc.payments, check_inst)
        ok = ok and rep.certificate
    if not ok:
        raise InvariantViolation(f"{rep.algorithm} output misses the {goal} guarantee")
    rep.guarantee = True
    rep.swaps = len(swaps)
    rep.efx = _fmt(efx_factor(inst, alloc))
    rep.ef1 = _fmt(efk_factor(inst, alloc, 1))
    rep.ef2 = _fmt(efk_factor(inst, alloc, 2))
    rep.seconds = round(time.perf_counter() - start, 6)
    return alloc, alloc.payments, rep


def _bench_one(args: tuple) -> list[dict]:
    idx, n, m, model, seed, goals, solver, max_pivots = args
    inst = random_instance(n, m, model, seed + idx)
    rows = []
    for goal in goals:
        _, _, rep = pipeline(inst, goal, solver, max_pivots)
        rep.params.update({"index": idx, "model": model, "seed": seed + idx})
        rep.seconds = 0.0  # keep files reproducible
        rows.append(rep.row())
    return rows


def bench(
    n: int, m: int, model: str, count: int, seed: int, goals: list[str], solver: str = "auto",
    max_pivots: int = DEFAULT_MAX_PIVOTS, workers: int = 1,
) -> list[dict]:
    """Reports for ``count`` generated instances, ordered by instance index."""
    jobs = [(idx, n, m, model, seed, tuple(goals), solver, max_pivots) for idx in range(count)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_bench_one, jobs))
    else:
        chunks = [_bench_one(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def worst_factors(rows: list[dict]) -> dict[str, str]:
    """Largest EFX factor seen per goal."""
    worst: dict[str, Fraction | float] = {}
    for row in rows:
        v: Fraction | float = float("inf") if row["efx"] == "inf" else as_fraction(row["efx"])
        if row["goal"] not in worst or v > worst[row["goal"]]:
            worst[row["goal"]] = v
    return {g: _fmt(v) for g, v in worst.items()}


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# file helpers


def load_instance(path: str) -> Instance:
    obj = io_.load(path)
    if isinstance(obj, ErInstance):
        return obj.base
    if not isinstance(obj, Instance):
        raise ParseError(f"{path} does not hold an instance")
    return obj


def load_er(path: str, e: str | None, c: str | None) -> ErInstance:
    obj = io_.load(path)
    if isinstance(obj, ErInstance) and e is None and c is None:
        return obj
    base = obj.base if isinstance(obj, ErInstance) else obj
    if not isinstance(base, Instance):
        raise ParseError(f"{path} does not hold an instance")
    return ErInstance.uniform(base, as_fraction(e or "1"), as_fraction(c or "1"))


def equilibrium_json(eq: ErEquilibrium, er: ErInstance) -> dict:
    out = io_.to_json(eq)
    out["instance"] = io_.to_json(er)
    return out


def load_equilibrium(path: str) -> tuple[ErEquilibrium, ErInstance]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict) or "instance" not in data:
        raise ParseError(f"{path} is not an equilibrium file with an embedded instance")
    eq = io_.from_json({k: v for k, v in data.items() if k != "instance"})
    er = io_.from_json(data["instance"])
    if not isinstance(eq, ErEquilibrium) or not isinstance(er, ErInstance):
        raise ParseError(f"{path} does not hold an equilibrium")
    return eq, er


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _emit_json(data: Any, path: str | None) -> None:
    _emit(json.dumps(data, indent=1) + "\n", path)


@dataclass
class Settings:
    seed: int
    max_pivots: int
    fmt: str
    dump_graph: str | None

    def graph(self, dot: str) -> None:
        if self.dump_graph:
            with open(self.dump_graph, "w", encoding="utf-8") as fh:
                fh.write(dot)


# commands


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed for generators.")
@click.option("--max-pivots", type=int, default=DEFAULT_MAX_PIVOTS, show_default=True, help="Lemke pivot budget.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--dump-graph", type=click.Path(dir_okay=False), default=None, help="Write a DOT graph here.")
@click.pass_context
def cli(ctx: click.Context, seed: int, max_pivots: int, fmt: str, dump_graph: str | None) -> None:
    """Fair and efficient chore allocation tools."""
    ctx.obj = Settings(seed, max_pivots, fmt, dump_graph)


@cli.command()
@click.option("--n", "n", type=int, required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--model", default="uniform", show_default=True, help="uniform | bivalued:a:b | 2-ary:a,b;...")
@click.option("--e", default=None, help="Uniform earning requirement; adds e and c when given.")
@click.option("--c", default=None, help="Uniform earning cap.")
@click.option("--output", "-o", default=None)
@click.pass_obj
def gen(s: Settings, n: int, m: int, model: str, e: str | None, c: str | None, output: str | None) -> None:
    """Generate a random instance."""
    inst = random_instance(n, m, model, s.seed)
    obj: Any = inst if e is None and c is None else ErInstance.uniform(inst, as_fraction(e or "1"), as_fraction(c or "1"))
    _emit_json(io_.to_json(obj), output)


def _solve_command(s: Settings, path: str, e, c, output, trace_path, use_enum: bool) -> None:
    er = load_er(path, e, c)
    if use_enum:
        eq = find_er_equilibrium_enum(er)
    else:
        eq, trace = solve_er(er, s.max_pivots)
        if trace_path:
            _emit_json(trace.to_json(), trace_path)
    ok, problems = verify_er(eq, er)
    if not ok:
        raise InvariantViolation("solver output failed verification: " + "; ".join(problems))
    s.graph(payment_graph_dot(eq))
    _emit_json(equilibrium_json(eq, er), output)


@cli.command("er-solve")
@click.option("--input", "-i", "path", required=True)
@click.option("--e", default=None)
@click.option("--c", default=None)
@click.option("--output", "-o", default=None)
@click.option("--trace", "trace_path", default=None, help="Write the Lemke pivot log here.")
@click.pass_obj
def er_solve(s: Settings, path: str, e, c, output, trace_path) -> None:
    """Earning-restricted equilibrium by Lemke pivoting."""
    _solve_command(s, path, e, c, output, trace_path, use_enum=False)


@cli.command("er-enum")
@click.option("--input", "-i", "path", required=True)
@click.option("--e", default=None)
@click.option("--c", default=None)
@click.option("--output", "-o", default=None)
@click.pass_obj
def er_enum(s: Settings, path: str, e, c, output) -> None:
    """Earning-restricted equilibrium by consumption-graph enumeration."""
    _solve_command(s, path, e, c, output, None, use_enum=True)


@cli.command("round")
@click.option("--mode", type=click.Choice(["half", "one", "rebalance", "balanced"]), required=True)
@click.option("--input", "-i", "path", required=True, help="Equilibrium file, or an instance for balanced.")
@click.option("--output", "-o", default=None)
@click.pass_obj
def round_cmd(s: Settings, mode: str, path: str, output) -> None:
    """Round an equilibrium (or balance an instance)."""
    if mode == "balanced":
        alloc = balanced_po(load_instance(path))
    else:
        eq, er = load_equilibrium(path)
        if mode == "half":
            alloc = round_er_half(eq, er)
        else:
            alloc = round_er_one(eq, er)
            if mode == "rebalance":
                alloc = rebalance_ef1(alloc, eq, er)
    s.graph(allocation_dot(alloc))
    _emit_json(io_.to_json(alloc), output)


def _eq_or_solve(s: Settings, eq_path: str | None, inst: Instance, solver: str) -> tuple[ErEquilibrium, ErInstance]:
    if eq_path:
        eq, er = load_equilibrium(eq_path)
        if er.base != inst:
            raise PreconditionViolated("equilibrium belongs to a different instance")
        return eq, er
    er = ErInstance.uniform(inst, 1, HALF)
    return solve_equilibrium(er, solver, s.max_pivots)[0], er


@cli.command()
@click.option("--input", "-i", "path", required=True)
@click.option("--eq", "eq_path", default=None, help="Equilibrium with e = 1, c = 1/2 (m > 2n only).")
@click.option("--solver", type=click.Choice(SOLVERS), default="auto", show_default=True)
@click.option("--output", "-o", default=None)
@click.pass_obj
def efx(s: Settings, path: str, eq_path, solver: str, output) -> None:
    """EFX for m <= 2n, 4-EFX otherwise."""
    inst = load_instance(path)
    if inst.m <= 2 * inst.n:
        alloc = efx_small(inst)
    else:
        eq, er = _eq_or_solve(s, eq_path, inst, solver)
        alloc = four_efx(eq, er)
    s.graph(allocation_dot(alloc))
    _emit_json(io_.to_json(alloc), output)


@cli.command()
@click.option("--input", "-i", "path", required=True)
@click.option("--eq", "eq_path", default=None, help="Equilibrium of the {1, k} form with c = 1/2.")
@click.option("--solver", type=click.Choice(SOLVERS), default="auto", show_default=True)
@click.option("--output", "-o", default=None)
@click.pass_obj
def bivalued(s: Settings, path: str, eq_path, solver: str, output) -> None:
    """EFX + PO for m <= 2n, 3-EFX + PO otherwise (bivalued input)."""
    inst = load_instance(path)
    bform = normalize_bivalued(inst)
    if inst.m <= 2 * inst.n:
        alloc, _ = bivalued_efx_po_small(bform)
    else:
        eq, er = _eq_or_solve(s, eq_path, bform.scaled, solver)
        alloc, _ = bivalued_3efx_po(eq, er, bform)
    s.graph(allocation_dot(alloc))
    _emit_json(io_.to_json(alloc), output)


@cli.command()
@click.option("--input", "-i", "path", required=True, help="Instance file.")
@click.option("--alloc", "alloc_path", default=None, help="Allocation to check.")
@click.option("--eq", "eq_path", default=None, help="Equilibrium to verify instead.")
@click.option("--criterion", type=click.Choice(CRITERIA), default="EFX", show_default=True)
@click.option("--alpha", default="1", show_default=True)
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--mpb/--no-mpb", default=False, help="Also require the MPB certificate.")
@click.pass_obj
def check(s: Settings, path: str, alloc_path, eq_path, criterion: str, alpha: str, k: int, mpb: bool) -> None:
    """Verify an allocation or an equilibrium; exit 1 when it fails."""
    if eq_path:
        eq, er = load_equilibrium(eq_path)
        inst_obj = io_.load(path)
        if (inst_obj.base if isinstance(inst_obj, ErInstance) else inst_obj) != er.base:
            raise PreconditionViolated("equilibrium belongs to a different instance")
        ok, problems = verify_er(eq, er)
        _emit_json({"ok": ok, "problems": problems}, None)
    else:
        if not alloc_path:
            raise click.UsageError("give --alloc or --eq")
        inst = load_instance(path)
        alloc = io_.load(alloc_path)
        if not isinstance(alloc, Allocation):
            raise ParseError(f"{alloc_path} does not hold an allocation")
        alloc.check(inst)
        verdict = check_fairness(FairnessQuery(criterion, inst, alloc, as_fraction(alpha), k))
        ok = verdict.ok
        out: dict[str, Any] = {"ok": ok, "criterion": criterion, "alpha": alpha, "k": k}
        if verdict.witness is not None:
            w = verdict.witness
            out["witness"] = {"agent": w.agent, "target": w.target, "removed": list(w.removed),
                              "lhs": fmt_fraction(w.lhs), "rhs": fmt_fraction(w.rhs)}
        if mpb:
            cert = alloc.payments is not None and mpb_certificate(alloc, alloc.payments, inst)
            out["mpb"] = cert
            ok = ok and cert
            out["ok"] = ok
        _emit_json(out, None)
    if not ok:
        sys.exit(EXIT_CHECK_FAILED)


@cli.command()
@click.option("--input", "-i", "path", required=True)
@click.option("--criterion", type=click.Choice(["EFX", "EF1", "EF2", "PO"]), default="EFX", show_default=True)
@click.option("--alloc", "alloc_path", default=None, help="Allocation to test for PO.")
@click.option("--cap", type=int, default=10**7, show_default=True)
@click.pass_obj
def oracle(s: Settings, path: str, criterion: str, alloc_path, cap: int) -> None:
    """Brute-force answers on tiny instances."""
    inst = load_instance(path)
    if criterion == "PO":
        if not alloc_path:
            raise click.UsageError("PO needs --alloc")
        alloc = io_.load(alloc_path)
        ok, witness = po_bruteforce(inst, alloc, cap)
        _emit_json({"po": ok, "dominated_by": None if witness is None else io_.to_json(witness)}, None)
        return
    best, alloc = minimal_alpha_oracle(inst, criterion, cap)
    _emit_json({"criterion": criterion, "alpha": _fmt(best), "allocation": io_.to_json(alloc)}, None)


@cli.command("pipeline")
@click.option("--input", "-i", "path", required=True)
@click.option("--goal", type=click.Choice(GOALS), required=True)
@click.option("--solver", type=click.Choice(SOLVERS), default="auto", show_default=True)
@click.option("--output", "-o", default=None)
@click.option("--report", "report_path", default=None)
@click.pass_obj
def pipeline_cmd(s: Settings, path: str, goal: str, solver: str, output, report_path) -> None:
    """Instance to verified allocation for one goal."""
    inst = load_instance(path)
    alloc, _, rep = pipeline(inst, goal, solver, s.max_pivots)
    s.graph(allocation_dot(alloc))
    _emit_json(io_.to_json(alloc), output)
    if s.fmt == "csv":
        text = rows_to_csv([rep.row()])
    else:
        text = json.dumps(rep.row(), indent=1) + "\n"
    if report_path:
        _emit(text, report_path)
    elif output:
        click.echo(text, nl=False, err=True)


@cli.command("bench")
@click.option("--n", "n", type=int, required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--model", default="uniform", show_default=True)
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--goals", default="efx", show_default=True, help="Comma separated goals.")
@click.option("--solver", type=click.Choice(SOLVERS), default="auto", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--output", "-o", default=None)
@click.pass_obj
def bench_cmd(s: Settings, n: int, m: int, model: str, count: int, goals: str, solver: str, workers: int, output) -> None:
    """Batch run over generated instances; CSV or JSON rows."""
    goal_list = [g for g in goals.split(",") if g]
    bad = [g for g in goal_list if g not in GOALS]
    if bad:
        raise click.BadParameter(f"unknown goals {bad}", param_hint="--goals")
    rows = bench(n, m, model, count, s.seed, goal_list, solver, s.max_pivots, workers)
    if s.fmt == "csv":
        _emit(rows_to_csv(rows), output)
    else:
        _emit_json({"rows": rows, "worst_efx": worst_factors(rows)}, output)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="chorefair", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_PRECONDITION
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_PRECONDITION
    except SystemExit as exc:
        return int(exc.code or 0)
    except PreconditionViolated as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_PRECONDITION
    except BudgetExceeded as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_BUDGET
    except (InvariantViolation, ChoreFairError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INVARIANT
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PRECONDITION
    return EXIT_OK
