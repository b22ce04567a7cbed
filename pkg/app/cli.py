import logging
import sys
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

from app.config import settings
from app.exceptions import CheckerError
from app.schemas.experiments import OutputFormat, Workload, WorkloadKind
from app.schemas.faults import TargetStream
from app.schemas.hashing import HashFamily
from app.services import experiments, tuner
from app.utils.results_io import table_record, write_results
from app.utils.rng import PRNG_NAME

logging.basicConfig(level=settings.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

app = typer.Typer(help="Communication-efficient checkers on a simulated cluster", no_args_is_help=True)
console = Console()


def _emit(rows, title: str, out: Optional[Path], fmt: OutputFormat, seed: Optional[int]) -> None:
    table = Table(title=title)
    if rows:
        columns = list(table_record(rows[0]))
        for column in columns:
            table.add_column(column)
        for row in rows:
            dumped = table_record(row)
            table.add_row(*(str(dumped[c]) for c in columns))
    console.print(table)
    if out is not None:
        meta = {"command": " ".join(sys.argv), "seed": seed, "prng": PRNG_NAME}
        write_results(rows, out, fmt, meta)


def _fail(error: Exception) -> None:
    console.print(f"[red]error:[/red] {error}")
    raise typer.Exit(code=2)


@app.command()
def accuracy(
    checker: str = typer.Option("sum", "--checker", help="Checker id, e.g. sum, count, sort, permutation"),
    config: List[str] = typer.Option([], "--config", help="Checker configuration, e.g. 4x8m5 or tab8; repeatable"),
    manipulator: List[str] = typer.Option([], "--manipulator", help="Manipulator name; repeatable; none = correct runs"),
    target: TargetStream = typer.Option(TargetStream.INPUT, "--target"),
    hash_family: HashFamily = typer.Option(HashFamily(settings.HASH), "--hash"),
    pes: int = typer.Option(settings.PES, "--pes", min=1),
    elements: int = typer.Option(settings.ELEMENTS, "--elements", min=0),
    trials: int = typer.Option(settings.TRIALS, "--trials", min=1),
    seed: int = typer.Option(settings.SEED, "--seed", min=0),
    workload: Optional[WorkloadKind] = typer.Option(None, "--workload"),
    n_jobs: int = typer.Option(settings.N_JOBS, "--n-jobs", min=1),
    fmt: OutputFormat = typer.Option(OutputFormat(settings.OUTPUT_FORMAT), "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """False-accept rate of a checker under seeded manipulations."""
    rows = []
    try:
        scenario = experiments.get_scenario(checker)
        w = Workload(
            kind=workload or scenario.default_workload(),
            n=elements,
            seed=seed,
            distinct_keys=settings.POWER_LAW_KEYS,
            hi=settings.UNIFORM_HIGH,
        )
        for config_text in config or [None]:
            for name in manipulator or [None]:
                rows.append(
                    experiments.run_accuracy(
                        checker,
                        config_text,
                        w,
                        None if name in (None, "none") else name,
                        trials,
                        pes,
                        seed,
                        target=target,
                        hash_family=hash_family,
                        n_jobs=n_jobs,
                        full_ledger=fmt is OutputFormat.JSON,
                    )
                )
    except (CheckerError, ValueError) as e:
        _fail(e)
    _emit(rows, f"accuracy: {checker}", out, fmt, seed)


@app.command()
def tune(
    budget_bits: Optional[int] = typer.Option(None, "--budget-bits", min=8),
    delta: Optional[float] = typer.Option(None, "--delta"),
    reference: bool = typer.Option(False, "--reference", "--table2", help="Optimize every row of the reference budget/bound grid"),
    configs: bool = typer.Option(False, "--configs", help="List the named accuracy and scaling configurations"),
    fmt: OutputFormat = typer.Option(OutputFormat(settings.OUTPUT_FORMAT), "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """Cheapest sum-checker configuration for a bit budget and failure bound."""
    try:
        if configs:
            _emit(tuner.named_configs(), "named configurations", out, fmt, None)
        elif reference:
            rows = [row.result for row in tuner.reference_table() if row.result is not None]
            _emit(rows, "optimal configurations", out, fmt, None)
        elif budget_bits is not None and delta is not None:
            _emit([tuner.optimize(budget_bits, delta)], "optimal configuration", out, fmt, None)
        else:
            raise typer.BadParameter("pass --budget-bits and --delta, or --reference, or --configs")
    except (CheckerError, ValueError) as e:
        _fail(e)


@app.command()
def cost(
    checker: str = typer.Option("sum", "--checker"),
    config: Optional[str] = typer.Option(None, "--config"),
    sizes: List[int] = typer.Option([1_000, 10_000, 100_000], "--size", help="Element counts; repeatable"),
    hash_family: HashFamily = typer.Option(HashFamily(settings.HASH), "--hash"),
    pes: int = typer.Option(8, "--pes", min=1),
    seed: int = typer.Option(settings.SEED, "--seed", min=0),
    fmt: OutputFormat = typer.Option(OutputFormat(settings.OUTPUT_FORMAT), "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """Checker-attributed communication on correct instances of growing size."""
    try:
        rows = experiments.run_cost_report(checker, config, sizes, pes, seed, hash_family)
    except (CheckerError, ValueError) as e:
        _fail(e)
    _emit(rows, f"cost: {checker}", out, fmt, seed)


@app.command()
def workload(
    kind: WorkloadKind = typer.Option(WorkloadKind.POWER_LAW, "--kind"),
    elements: int = typer.Option(settings.ELEMENTS, "--elements", min=0),
    pes: int = typer.Option(settings.PES, "--pes", min=1),
    distinct_keys: int = typer.Option(settings.POWER_LAW_KEYS, "--distinct-keys", min=0),
    seed: int = typer.Option(settings.SEED, "--seed", min=0),
    fmt: OutputFormat = typer.Option(OutputFormat(settings.OUTPUT_FORMAT), "--format"),
    out: Optional[Path] = typer.Option(None, "--out"),
):
    """Per-PE sizes and the most frequent keys of a generated workload."""
    w = Workload(kind=kind, n=elements, seed=seed, distinct_keys=distinct_keys, hi=settings.UNIFORM_HIGH)
    summary = experiments.summarize_workload(w, pes)
    _emit([summary], f"workload: {kind.value}", out, fmt, seed)


if __name__ == "__main__":
    app()
