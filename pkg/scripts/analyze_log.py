"""Log timeline visualizer for rabichaos.

Parses structured JSON logs and generates an interactive HTML timeline
using Plotly, showing each subcommand run and the point tasks inside it.
"""

import json
import webbrowser
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import plotly.graph_objects as go
import typer

from src.settings import rabichaos_settings

LOGS_DIR = Path(rabichaos_settings.log_dir)

app = typer.Typer(help="Visualize rabichaos run logs as interactive timelines.")


@dataclass
class TaskEvent:
    name: str
    group: str
    finished_time: datetime
    elapsed: float

    @property
    def started_time(self) -> datetime:
        return self.finished_time - timedelta(seconds=self.elapsed)


@dataclass
class RunEvent:
    subcommand: str
    started_time: datetime
    finished_time: datetime | None = None
    exit_code: int | None = None


@dataclass
class LogSummary:
    runs: list[RunEvent] = field(default_factory=list)
    tasks: list[TaskEvent] = field(default_factory=list)
    failures: int = 0


@dataclass
class SessionInfo:
    log_path: Path
    timestamp: datetime
    run_count: int = 0
    task_count: int = 0


def _parse_datetime(s: str) -> datetime:
    """Parse ISO format or log asctime format."""
    if "T" in s:
        return datetime.fromisoformat(s)
    return datetime.strptime(s, "%Y-%m-%d %H:%M:%S,%f")


def _parse_log(log_path: Path) -> LogSummary:
    """Parse a log file and extract run and task events."""
    summary = LogSummary()
    open_runs: dict[str, RunEvent] = {}

    with open(log_path) as f:
        for line in f:
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue

            name = entry.get("name")
            func = entry.get("function")
            stamp = _parse_datetime(entry["asctime"])

            if name == "runner" and func == "run":
                sub = entry.get("subcommand", "")
                if entry.get("type") == "start":
                    open_runs[sub] = RunEvent(subcommand=sub, started_time=stamp)
                    summary.runs.append(open_runs[sub])
                elif entry.get("type") == "end" and sub in open_runs:
                    run = open_runs.pop(sub)
                    run.finished_time = stamp
                    run.exit_code = entry.get("exit_code")

            if name == "scan" and func == "run_tasks":
                if "elapsed" in entry:
                    summary.tasks.append(
                        TaskEvent(
                            name=entry["task"],
                            group=entry.get("description") or "tasks",
                            finished_time=stamp,
                            elapsed=float(entry["elapsed"]),
                        )
                    )
                elif "kind" in entry:
                    summary.failures += 1

    return summary


def _scan_sessions() -> list[SessionInfo]:
    """Scan logs directory and return session info sorted by newest first."""
    if not LOGS_DIR.exists():
        return []

    sessions: list[SessionInfo] = []
    for log_path in sorted(LOGS_DIR.glob("rabichaos_*.log"), reverse=True):
        summary = _parse_log(log_path)
        if not summary.runs:
            continue
        ts_str = log_path.stem.replace("rabichaos_", "")
        try:
            ts = datetime.strptime(ts_str, "%Y%m%d_%H%M%S")
        except ValueError:
            ts = summary.runs[0].started_time
        sessions.append(
            SessionInfo(
                log_path=log_path,
                timestamp=ts,
                run_count=len(summary.runs),
                task_count=len(summary.tasks),
            )
        )

    return sessions


def _format_duration(seconds: float) -> str:
    m, s = divmod(int(seconds), 60)
    if m > 0:
        return f"{m}m{s:02d}s"
    return f"{s}s"


def _build_timeline(summary: LogSummary) -> go.Figure:
    """Build a Plotly timeline figure."""
    t0 = summary.runs[0].started_time
    fig = go.Figure()

    runs = [r for r in summary.runs if r.finished_time is not None]
    fig.add_trace(
        go.Bar(
            y=[f"run: {r.subcommand}" for r in runs],
            x=[(r.finished_time - r.started_time).total_seconds() for r in runs],
            base=[(r.started_time - t0).total_seconds() for r in runs],
            orientation="h",
            name="Run",
            marker_color=[
                "rgba(76, 175, 80, 0.5)" if r.exit_code == 0 else "rgba(244, 67, 54, 0.5)"
                for r in runs
            ],
            hovertemplate="<b>%{y}</b><br>exit %{customdata}<extra></extra>",
            customdata=[r.exit_code for r in runs],
        )
    )

    # Task bars, one trace per scan so the legend can toggle them
    tasks = sorted(summary.tasks, key=lambda t: t.started_time)
    for group in dict.fromkeys(t.group for t in tasks):
        members = [t for t in tasks if t.group == group]
        fig.add_trace(
            go.Bar(
                y=[f"{group}: {t.name}" for t in members],
                x=[t.elapsed for t in members],
                base=[(t.started_time - t0).total_seconds() for t in members],
                orientation="h",
                name=group,
                hovertemplate="<b>%{y}</b><br>%{x:.2f}s<extra></extra>",
            )
        )

    rows = len(runs) + len(tasks)
    total_duration = max(
        (r.finished_time - t0).total_seconds() for r in runs
    ) if runs else 0.0

    fig.update_layout(
        title=dict(
            text=(
                f"Run Timeline - {t0.strftime('%Y-%m-%d %H:%M:%S')}"
                f" - {len(tasks)} tasks, {summary.failures} failed"
                f" - {_format_duration(total_duration)}"
            ),
        ),
        xaxis=dict(
            title="Time (seconds from start)",
            showgrid=True,
            gridcolor="rgba(200,200,200,0.3)",
        ),
        yaxis=dict(title="", autorange="reversed", showgrid=False),
        barmode="overlay",
        height=max(400, min(rows, 200) * 20 + 100),
        template="plotly_white",
        legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1),
        hoverlabel=dict(align="left"),
    )

    return fig


def _choose_session(interactive: bool) -> Path:
    sessions = _scan_sessions()
    if not sessions:
        typer.echo(f"No rabichaos runs logged under {LOGS_DIR}/")
        raise typer.Exit(1)
    if not interactive:
        typer.echo(f"Latest log: {sessions[0].log_path.name}")
        return sessions[0].log_path

    for i, s in enumerate(sessions, 1):
        typer.echo(
            f"  {i:3d}  {s.timestamp:%Y-%m-%d %H:%M:%S}"
            f"  runs={s.run_count} tasks={s.task_count}"
        )
    choice = typer.prompt("Log number", type=int)
    if not 1 <= choice <= len(sessions):
        typer.echo(f"Expected a number between 1 and {len(sessions)}.")
        raise typer.Exit(1)
    return sessions[choice - 1].log_path


@app.command()
def main(
    log_file: Path | None = typer.Argument(None, help="Log file to render"),
    list_sessions: bool = typer.Option(
        False, "--list", "-l", help="Pick a log from the log directory"
    ),
    output: Path | None = typer.Option(
        None, "--output", "-o", help="HTML path (default: next to the log)"
    ),
    no_open: bool = typer.Option(False, "--no-open", help="Only write the HTML file"),
):
    """Render a rabichaos log as an HTML timeline of runs and scan tasks."""
    log_path = log_file or _choose_session(list_sessions)
    if not log_path.exists():
        typer.echo(f"No such log: {log_path}")
        raise typer.Exit(1)

    summary = _parse_log(log_path)
    if not summary.runs:
        typer.echo(f"{log_path} holds no run events")
        raise typer.Exit(1)

    output = output or log_path.with_suffix(".html")
    _build_timeline(summary).write_html(str(output))
    typer.echo(f"Wrote {output}")
    if not no_open:
        webbrowser.open(output.resolve().as_uri())


if __name__ == "__main__":
    app()
