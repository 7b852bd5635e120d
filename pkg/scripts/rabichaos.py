import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from src.config import load_config
from src.console import console
from src.errors import ConfigError
from src.logging_config import setup_logging
from src.runner import run
from src.settings import rabichaos_settings

setup_logging(rabichaos_settings.log_dir, rabichaos_settings.log_level)
logger = logging.getLogger("main")

app = typer.Typer(
    help="rabichaos - quantum chaos diagnostics for the anisotropic Rabi model"
)

SUBCOMMANDS = {
    "poincare": "Classical Poincare sections for named points and shell seeds.",
    "entropy-map": "Time-averaged linear entropy over the (q1, p1) section plane.",
    "echo": "Loschmidt echo under an atomic-frequency perturbation.",
    "otoc": "Quadrature OTOC series and early-time growth-rate fits.",
    "husimi": "Field Husimi Q snapshots and wave-packet peak counts.",
    "inversion": "Atomic population inversion and collapse windows.",
    "lyapunov": "Maximal classical Lyapunov exponent by tangent renormalization.",
    "jc-suite": "Sections, OTOC and inversion with the OTOC/collapse coincidence report.",
}


def execute(
    subcommand: str,
    config: str,
    grid: int | None = None,
    np: int | None = None,
    t_end: float | None = None,
    out: Path | None = None,
    workers: int | None = None,
) -> int:
    try:
        run_config = load_config(config).with_overrides(
            grid=grid, np=np, t_end=t_end, out_dir=out, workers=workers
        )
    except ConfigError as e:
        logger.error({"function": "execute", "config": config, "error": str(e)})
        console.print(f"[red]{type(e).__name__}:[/] {e}")
        return e.exit_code
    return run(subcommand, run_config)


def _register(name: str, help: str) -> None:
    def command(
        config: Annotated[
            str,
            typer.Argument(help="Config file, or the name of a bundled config"),
        ],
        grid: Annotated[
            Optional[int], typer.Option(help="Entropy-map resolution per axis")
        ] = None,
        np: Annotated[Optional[int], typer.Option("--np", help="Fock cutoff")] = None,
        t_end: Annotated[
            Optional[float], typer.Option(help="End of the sampling window")
        ] = None,
        out: Annotated[Optional[Path], typer.Option(help="Output directory")] = None,
        workers: Annotated[
            Optional[int], typer.Option(help="Worker processes for point tasks")
        ] = None,
    ) -> None:
        code = execute(name, config, grid, np, t_end, out, workers)
        if code:
            raise typer.Exit(code)

    app.command(name=name, help=help)(command)


for _name, _help in SUBCOMMANDS.items():
    _register(_name, _help)


if __name__ == "__main__":
    app()
