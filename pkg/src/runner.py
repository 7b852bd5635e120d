"""Subcommand pipelines: named-point tasks, scans, CSV emission and exit codes."""

import logging
import time
from collections.abc import Callable, Sequence
from functools import cached_property
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.classical import (
    LyapunovEstimate,
    SectionPoints,
    lyapunov_exponent,
    poincare_section,
    section_hull_area,
    shell_seeds,
)
from src.config import RunConfig
from src.console import (
    console,
    print_config_tree,
    print_failures,
    print_fit_table,
    print_lyapunov_table,
    print_outputs,
    print_value_table,
)
from src.dynamics import (
    QuantumSystem,
    TimeSeries,
    evolve,
    expectation_series,
    loschmidt_echo,
    otoc_convergence,
    quadrature_otoc,
    sample_times,
)
from src.errors import ConfigError, DomainError, RabiChaosError
from src.fitting import GrowthFit, fit_early_growth
from src.husimi import HusimiGrid, HusimiGridSpec, count_local_maxima, husimi_q
from src.model import ModelParams, PhasePoint, QuantumState, coherent_state
from src.observables import (
    best_overlap,
    collapse_windows,
    disk_axes,
    entropy_map,
    entropy_time_series,
    moving_std,
    population_inversion,
)
from src.scan import Task, TaskFailure, TaskResult, run_tasks
from src.settings import rabichaos_settings
from src.storage import LocalCSVStorage, ResultStorage

logger = logging.getLogger("runner")

Window = tuple[float, float]

HUSIMI_NORM_TOL = 1e-3


# worker processes import the task functions by qualified name
def _section_task(
    point: PhasePoint, params: ModelParams, t_end: float, max_points: int, tol: float
) -> SectionPoints:
    return poincare_section(point, params, t_end, max_points, tol)


def _entropy_task(
    point: PhasePoint, system: QuantumSystem, times: NDArray
) -> TimeSeries:
    state0 = coherent_state(point, system.params)
    return entropy_time_series(state0, system.spectrum, times)


def _echo_task(
    point: PhasePoint, system: QuantumSystem, delta: float, times: NDArray
) -> TimeSeries:
    state0 = coherent_state(point, system.params)
    return loschmidt_echo(state0, system.params, delta, times, spec=system.spectrum)


def _otoc_task(
    point: PhasePoint, system: QuantumSystem, times: NDArray, np_check: int | None
) -> tuple[dict[str, TimeSeries], bool | None]:
    parts = quadrature_otoc(point, system, times)
    if np_check is None:
        return parts, None
    converged, _ = otoc_convergence(
        point, system.params, np_check, times, reference=parts["sum"]
    )
    return parts, converged


def _husimi_task(
    point: PhasePoint, system: QuantumSystem, times: Sequence[float], spec: HusimiGridSpec
) -> list[HusimiGrid]:
    states = evolve(coherent_state(point, system.params), system.spectrum, times)
    return [
        husimi_q(QuantumState(psi), spec, timestamp=float(t))
        for t, psi in zip(times, states)
    ]


def _inversion_task(
    point: PhasePoint, system: QuantumSystem, times: NDArray
) -> tuple[TimeSeries, float | None]:
    """W(t), plus the drift of the excitation number when it is conserved."""
    state0 = coherent_state(point, system.params)
    inversion = population_inversion(state0, system.spectrum, times, system.ops.sigma_z)
    if system.params.g2 != 0.0:
        return inversion, None
    n = expectation_series(evolve(state0, system.spectrum, times), system.ops.excitation)
    return inversion, float(np.max(np.abs(n - n[0])))


def _lyapunov_task(
    point: PhasePoint,
    params: ModelParams,
    t_end: float,
    renorm_interval: float,
    tol: float,
) -> LyapunovEstimate:
    return lyapunov_exponent(point, params, t_end, renorm_interval, tol)


class Runner:
    def __init__(
        self,
        config: RunConfig,
        storage: ResultStorage | None = None,
        workers: int | None = None,
    ) -> None:
        self.config = config
        self.storage = storage or LocalCSVStorage(config.out_dir)
        self.workers = workers or config.workers or rabichaos_settings.workers
        self.paths: list[str] = []
        self.failures: list[TaskFailure] = []
        self.exit_code = 0
        self._pipelines: dict[str, Callable[[], Any]] = {
            "poincare": self.poincare,
            "entropy-map": self.entropy_map,
            "echo": self.echo,
            "otoc": self.otoc,
            "husimi": self.husimi,
            "inversion": self.inversion,
            "lyapunov": self.lyapunov,
            "jc-suite": self.jc_suite,
        }

    @cached_property
    def system(self) -> QuantumSystem:
        started = time.perf_counter()
        system = QuantumSystem.build(self.config.params)
        logger.info(
            {
                "function": "build_system",
                "dim": self.config.params.dim,
                "elapsed": time.perf_counter() - started,
            }
        )
        return system

    @cached_property
    def times(self) -> NDArray[np.float64]:
        c = self.config
        return sample_times(c.t_start, c.t_end, c.dt)

    def run(self, subcommand: str) -> int:
        if subcommand not in self._pipelines:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        started = time.perf_counter()
        logger.info(
            {
                "function": "run",
                "type": "start",
                "subcommand": subcommand,
                "workers": self.workers,
            }
        )
        try:
            self._pipelines[subcommand]()
        except RabiChaosError as e:
            logger.error({"function": "run", "subcommand": subcommand, "error": str(e)})
            self.exit_code = max(self.exit_code, e.exit_code)
            raise
        finally:
            if self.failures:
                self._save_errors()
            logger.info(
                {
                    "function": "run",
                    "type": "end",
                    "subcommand": subcommand,
                    "exit_code": self.exit_code,
                    "files": len(self.paths),
                    "elapsed": time.perf_counter() - started,
                }
            )
        print_failures(self.failures)
        print_outputs(self.paths)
        return self.exit_code

    def _provenance(self, diagnostic: str) -> list[str]:
        return [f"diagnostic = {diagnostic}", *self.config.provenance_lines()]

    def _save(
        self,
        name: str,
        diagnostic: str,
        columns: Sequence[str],
        rows: Any,
        status: dict[str, Any] | None = None,
    ) -> None:
        path = self.storage.save(
            name, columns, rows, self._provenance(diagnostic), status
        )
        self.paths.append(path)

    def _save_errors(self) -> None:
        path = self.storage.save(
            "errors",
            ["task", "kind", "message"],
            [(str(f.key), f.kind, f.message) for f in self.failures],
            self._provenance("errors"),
        )
        self.paths.append(path)

    def _require_points(self, subcommand: str) -> dict[str, PhasePoint]:
        if not self.config.points:
            raise ConfigError(f"{subcommand} needs at least one point.NAME entry")
        return self.config.points

    def _run_points(
        self,
        diagnostic: str,
        func: Callable[..., Any],
        args: tuple,
        outputs: Callable[[str], list[tuple[str, Sequence[str]]]],
    ) -> dict[str, Any]:
        """Run ``func(point, *args)`` for each named point.

        A failed point gets FAILED-marked files for every name ``outputs`` lists,
        and raises the exit code to that of its error.
        """
        points = self._require_points(diagnostic)
        tasks = [Task(key=name, func=func, args=(p, *args)) for name, p in points.items()]
        results, failures = run_tasks(tasks, self.workers, description=diagnostic)
        for failure in failures:
            self.failures.append(failure)
            self.exit_code = max(self.exit_code, failure.exit_code)
            for name, columns in outputs(str(failure.key)):
                self.paths.append(
                    self.storage.save_failed(
                        name,
                        columns,
                        f"{failure.kind}: {failure.message}",
                        self._provenance(diagnostic),
                    )
                )
        return {r.key: r.value for r in results}

    def _run_scan(
        self, tasks: list[Task], description: str
    ) -> list[TaskResult]:
        results, failures = run_tasks(tasks, self.workers, description=description)
        self.failures.extend(failures)
        return results

    def poincare(self) -> dict[str, SectionPoints]:
        c = self.config
        if not c.points and c.section_scan == 0:
            raise ConfigError("poincare needs point.NAME entries or section_scan > 0")
        print_config_tree(c, "poincare")
        columns = ["q1", "p1", "p2"]
        args = (c.params, c.section_t_end, c.section_max_points, c.tol)
        sections: dict[str, SectionPoints] = {}
        if c.points:
            sections = self._run_points(
                "poincare",
                _section_task,
                args,
                lambda name: [(f"section_{name}", columns)],
            )
        for name, section in sections.items():
            self._save(
                f"section_{name}",
                "poincare",
                columns,
                section.rows(),
                {"crossings": len(section), "hull_area": section_hull_area(section)},
            )

        if c.section_scan:
            seeds = shell_seeds(c.params, c.energy, c.section_scan)
            results = self._run_scan(
                [Task(key=key, func=_section_task, args=(p, *args)) for key, p in seeds],
                "section scan",
            )
            self._save(
                "section_scan",
                "poincare",
                ["seed", *columns],
                [(r.key, *row) for r in results for row in r.value.rows()],
                {"seeds": len(seeds), "completed": len(results)},
            )
        print_value_table(
            "Crossings", {name: float(len(s)) for name, s in sections.items()}
        )
        return sections

    def entropy_map(self) -> None:
        c = self.config
        print_config_tree(c, "entropy-map")
        axis = disk_axes(c.grid)
        emap = entropy_map(
            axis,
            axis,
            c.params,
            c.energy,
            window=(c.t_start, c.t_end),
            dt=c.dt,
            workers=self.workers,
            system=self.system,
        )
        self.failures.extend(emap.failures)
        self._save(
            "entropy_map",
            "entropy-map",
            ["q1", "p1", "S_m"],
            emap.rows(),
            {"admissible": emap.admissible},
        )

        if not c.points:
            return
        series = self._run_points(
            "entropy-map",
            _entropy_task,
            (self.system, self.times),
            lambda name: [(f"entropy_{name}", ["t", "S"])],
        )
        for name, s in series.items():
            self._save(
                f"entropy_{name}", "entropy-map", ["t", "S"], zip(s.times, s.values)
            )
        averages = {name: s.time_average() for name, s in series.items()}
        self._save(
            "entropy_points",
            "entropy-map",
            ["point", "S_m"],
            [(name, averages.get(name)) for name in c.points],
        )
        print_value_table("S_m", averages)

    def echo(self) -> None:
        c = self.config
        print_config_tree(c, "echo")
        series = self._run_points(
            "echo",
            _echo_task,
            (self.system, c.delta, self.times),
            lambda name: [(f"echo_{name}", ["t", "L"])],
        )
        means = {name: s.time_average() for name, s in series.items()}
        for name, s in series.items():
            self._save(
                f"echo_{name}",
                "echo",
                ["t", "L"],
                zip(s.times, s.values),
                {"mean_L": means[name]},
            )
        print_value_table("mean L", means)

    def otoc(self) -> dict[str, GrowthFit | None]:
        c = self.config
        print_config_tree(c, "otoc")
        columns = ["t", "var_q2", "var_p2", "sum"]
        outcomes = self._run_points(
            "otoc",
            _otoc_task,
            (self.system, self.times, c.np_check),
            lambda name: [(f"otoc_{name}", columns)],
        )
        fits: dict[str, GrowthFit | None] = {}
        for name, (parts, converged) in outcomes.items():
            q2, p2, total = parts["q2"], parts["p2"], parts["sum"]
            self._save(
                f"otoc_{name}",
                "otoc",
                columns,
                zip(total.times, q2.values, p2.values, total.values),
                {"converged": "unchecked" if converged is None else converged},
            )
            try:
                fits[name] = fit_early_growth(total, c.fit_window, c.fit_t_end)
            except DomainError as e:
                logger.warning({"function": "otoc", "point": name, "fit": str(e)})
                fits[name] = None

        exponents: dict[str, LyapunovEstimate] = {}
        if c.compare_lyapunov:
            exponents = self._run_points(
                "otoc",
                _lyapunov_task,
                (c.params, c.lyapunov_t_end, c.renorm_interval, c.tol),
                lambda name: [],
            )

        rows = []
        for name in c.points:
            fit = fits.get(name)
            est = exponents.get(name)
            exponent = None if est is None else est.exponent
            ratio = None
            if fit is not None and exponent:
                ratio = fit.rate / (2.0 * exponent)
            if fit is None:
                rows.append((name, None, None, None, None, exponent, ratio))
            else:
                rows.append((name, fit.rate, *fit.window, fit.goodness, exponent, ratio))
        self._save(
            "otoc_fit",
            "otoc",
            ["point", "rate", "t_start", "t_end", "r2", "lyapunov", "rate_over_2lyapunov"],
            rows,
            {"window": "auto" if c.fit_window is None else "fixed"},
        )
        checks = [conv for _, conv in outcomes.values() if conv is not None]
        print_fit_table(
            {name: fit for name, fit in fits.items() if fit is not None},
            all(checks) if checks else None,
            {name: est.exponent for name, est in exponents.items()},
        )
        return fits

    def husimi(self) -> None:
        c = self.config
        print_config_tree(c, "husimi")
        columns = ["q2", "p2", "Q"]
        spec = HusimiGridSpec(extent=c.husimi_extent, points=c.husimi_points)
        snapshots = self._run_points(
            "husimi",
            _husimi_task,
            (self.system, c.husimi_times, spec),
            lambda name: [(f"husimi_{name}_t{t:g}", columns) for t in c.husimi_times],
        )
        peaks = []
        for name, grids in snapshots.items():
            for grid in grids:
                maxima = count_local_maxima(grid)
                norm = grid.normalization()
                if abs(norm - 1.0) > HUSIMI_NORM_TOL:
                    logger.warning(
                        {
                            "function": "husimi",
                            "point": name,
                            "t": grid.timestamp,
                            "normalization": norm,
                            "message": "packet leaves the grid; widen husimi_extent",
                        }
                    )
                peaks.append((name, grid.timestamp, maxima))
                q2, p2 = grid.peak()
                self._save(
                    f"husimi_{name}_t{grid.timestamp:g}",
                    "husimi",
                    columns,
                    grid.rows(),
                    {
                        "t": grid.timestamp,
                        "normalization": norm,
                        "peak_q2": q2,
                        "peak_p2": p2,
                        "local_maxima": maxima,
                    },
                )
        self._save("husimi_peaks", "husimi", ["point", "t", "maxima"], peaks)

    def inversion(self) -> dict[str, list[Window]]:
        c = self.config
        print_config_tree(c, "inversion")
        columns = ["t", "W", "moving_std"]
        outcomes = self._run_points(
            "inversion",
            _inversion_task,
            (self.system, self.times),
            lambda name: [(f"inversion_{name}", columns)],
        )
        collapses: dict[str, list[Window]] = {}
        for name, (w, n_drift) in outcomes.items():
            spread = moving_std(w, c.inversion_window)
            status = {} if n_drift is None else {"excitation_drift": n_drift}
            self._save(
                f"inversion_{name}",
                "inversion",
                columns,
                zip(w.times, w.values, spread.values),
                status,
            )
            if c.collapse_threshold is None:
                continue
            collapses[name] = collapse_windows(
                w, c.inversion_window, c.collapse_threshold
            )
            self._save(
                f"collapse_{name}",
                "inversion",
                ["t_start", "t_end"],
                collapses[name],
                {"windows": len(collapses[name])},
            )
        return collapses

    def lyapunov(self) -> None:
        c = self.config
        print_config_tree(c, "lyapunov")
        estimates = self._run_points(
            "lyapunov",
            _lyapunov_task,
            (c.params, c.lyapunov_t_end, c.renorm_interval, c.tol),
            lambda name: [(f"lyapunov_{name}", ["t", "running_estimate"])],
        )
        for name, est in estimates.items():
            self._save(
                f"lyapunov_{name}",
                "lyapunov",
                ["t", "running_estimate"],
                zip(est.times, est.history),
                {"exponent": est.exponent, "converged": est.converged},
            )
        self._save(
            "lyapunov_summary",
            "lyapunov",
            ["point", "exponent", "converged"],
            [
                (name, est.exponent, est.converged)
                if (est := estimates.get(name)) is not None
                else (name, None, None)
                for name in c.points
            ],
        )
        print_lyapunov_table(estimates)

    def jc_suite(self) -> None:
        self.poincare()
        fits = self.otoc()
        collapses = self.inversion()
        if self.config.collapse_threshold is None:
            return
        rows = []
        for name in self.config.points:
            fit = fits.get(name)
            if fit is None or name not in collapses:
                rows.append((name, None, None, None, None, None))
                continue
            span, overlap = best_overlap(fit.window, collapses[name])
            rows.append((name, *fit.window, *(span or (None, None)), overlap))
        self._save(
            "jc_coincidence",
            "jc-suite",
            [
                "point",
                "fit_t_start",
                "fit_t_end",
                "collapse_t_start",
                "collapse_t_end",
                "overlap",
            ],
            rows,
        )


def run(
    subcommand: str, config: RunConfig, storage: ResultStorage | None = None
) -> int:
    """Run one subcommand; returns the process exit code."""
    runner = Runner(config, storage)
    try:
        return runner.run(subcommand)
    except RabiChaosError as e:
        console.print(f"[red]{type(e).__name__}:[/] {e}")
        return e.exit_code
