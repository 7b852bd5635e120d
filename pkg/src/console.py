from collections.abc import Sequence
from typing import TYPE_CHECKING

from rich import box
from rich.console import Console
from rich.table import Table
from rich.tree import Tree

from src.classical import LyapunovEstimate
from src.config import RunConfig
from src.fitting import GrowthFit

if TYPE_CHECKING:
    from src.scan import TaskFailure

console = Console()


def _table(*columns: str) -> Table:
    table = Table(
        show_header=True, header_style="bold", padding=(0, 1), box=box.HORIZONTALS
    )
    for i, name in enumerate(columns):
        table.add_column(name, justify="left" if i == 0 else "right")
    return table


def _flag(ok: bool) -> str:
    return "[green]yes[/]" if ok else "[red]no[/]"


def print_config_tree(config: RunConfig, subcommand: str) -> None:
    p = config.params
    tree = Tree(f"[bold cyan]{subcommand}[/]")
    tree.add(
        f"[bold]model[/] [dim]omega={p.omega:g} omega0={p.omega0:g} "
        f"g1={p.g1:g} g2={p.g2:g} np={p.cutoff}[/]"
    )
    tree.add(f"[bold]energy[/] [dim]{config.energy:g}[/]")
    points = tree.add("[bold]points[/]")
    for name, point in config.points.items():
        points.add(
            f"{name} [dim]({point.q1:.6g}, {point.p1:.6g}, {point.q2:.6g}, "
            f"{point.p2:.6g})[/]"
        )
    tree.add(f"[bold]output[/] [dim]{config.out_dir}[/]")
    console.print(tree)


def print_fit_table(
    fits: dict[str, GrowthFit],
    converged: bool | None = None,
    exponents: dict[str, float] | None = None,
) -> None:
    exponents = exponents or {}
    columns = ["Point", "Rate", "Window", "R^2", "Samples"]
    table = _table(*columns, *(["Lyapunov", "Rate / 2L"] if exponents else []))
    for name, fit in fits.items():
        t1, t2 = fit.window
        cells = [
            name,
            f"{fit.rate:.4f}",
            f"[{t1:.2f}, {t2:.2f}]" + (" [dim]auto[/]" if fit.auto else ""),
            f"{fit.goodness:.4f}",
            str(fit.samples),
        ]
        if exponents:
            exponent = exponents.get(name)
            if exponent:
                cells += [f"{exponent:.5f}", f"{fit.rate / (2.0 * exponent):.3f}"]
            else:
                cells += ["-", "-"]
        table.add_row(*cells)
    console.print(table)
    if converged is not None:
        console.print(f"cutoff converged: {_flag(converged)}")


def print_lyapunov_table(estimates: dict[str, LyapunovEstimate]) -> None:
    table = _table("Point", "Exponent", "t_end", "Converged")
    for name, est in estimates.items():
        table.add_row(
            name, f"{est.exponent:.5f}", f"{est.times[-1]:g}", _flag(est.converged)
        )
    console.print(table)


def print_value_table(title: str, values: dict[str, float]) -> None:
    table = _table("Point", title)
    for name, value in values.items():
        table.add_row(name, f"{value:.6g}")
    console.print(table)


def print_failures(failures: Sequence["TaskFailure"]) -> None:
    if not failures:
        return
    console.print(f"[yellow]{len(failures)} task(s) failed[/]")
    table = _table("Task", "Error", "Message")
    for failure in failures[:20]:
        table.add_row(str(failure.key), failure.kind, failure.message)
    console.print(table)


def print_outputs(paths: Sequence[str]) -> None:
    for path in paths:
        console.print(f"[dim]wrote[/] {path}")
