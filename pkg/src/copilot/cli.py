"""copilot command line: sim, serve, export-pddl, analyze."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


def _roster(text: str | None) -> list[str] | None:
    if not text:
        return None
    return [r.strip() for r in text.split(",") if r.strip()]


def _grid(text: str) -> tuple[int, int]:
    width, _, height = text.partition("x")
    try:
        return (int(width), int(height))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}")


def cmd_sim(args: argparse.Namespace) -> int:
    from .model import load_template
    from .runner import MissionRunner, load_scenario

    scenario = load_scenario(args.scenario)
    template = load_template(args.template) if args.template else None
    if args.log:
        # a fresh batch run; the store would otherwise resume an existing log
        Path(args.log).unlink(missing_ok=True)
    runner = MissionRunner(
        scenario, template=template, roster=_roster(args.robots), store_path=args.log
    )
    try:
        summary = runner.run(max_clock=args.max_clock)
    finally:
        runner.store.close()
    json.dump(summary, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .model import load_template
    from .runner import load_scenario
    from .service import serve

    serve(
        load_scenario(args.scenario),
        port=args.port,
        host=args.host,
        roster=_roster(args.robots),
        store_path=args.log,
        template=load_template(args.template) if args.template else None,
    )
    return 0


def cmd_export_pddl(args: argparse.Namespace) -> int:
    from .model import default_template, generate_tasks, load_template
    from .pddl import export_pddl
    from .runner import DEFAULT_ROSTER

    template = load_template(args.mission) if args.mission else default_template()
    robots = _roster(args.robots) or list(DEFAULT_ROSTER)
    graph = generate_tasks(template, robots)
    horizon = args.horizon if args.horizon is not None else template.exploration_window[1]
    domain, problem = export_pddl(graph, horizon, name=args.name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "domain.pddl").write_text(domain, encoding="utf-8")
    (out / "problem.pddl").write_text(problem, encoding="utf-8")
    print(f"wrote {out / 'domain.pddl'} and {out / 'problem.pddl'}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    from . import analysis
    from .store import read_log

    events = read_log(args.log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_all = not (args.deployment or args.usage or args.heatmap)

    if args.deployment or run_all:
        table = analysis.deployment_times(events)
        print(table.format())
        with open(out / "deployment.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["robot", "entry_s", "interval_s"])
            for row in table.rows:
                interval = "" if row.interval is None else f"{row.interval:.3f}"
                writer.writerow([row.robot, f"{row.entry:.3f}", interval])

    if args.usage or run_all:
        usage = analysis.usage_breakdown(events)
        ranked = sorted(usage.items(), key=lambda kv: (-kv[1], kv[0]))
        for view, share in ranked:
            print(f"{view:<20}{share:6.1f}%")
        with open(out / "usage.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["view", "percent"])
            for view, share in ranked:
                writer.writerow([view, f"{share:.2f}"])

    if args.heatmap or run_all:
        config = analysis.HeatmapConfig(
            dpi=args.dpi, grid=args.grid, zero_mean=args.zero_mean
        )
        samples = analysis.cursor_samples(events)
        active = analysis.filter_inactive(samples, config)
        result = analysis.heatmap(active, config)
        analysis.write_grid_csv(result.grid, out / "heatmap_grid.csv")
        analysis.write_pgm(result.normalized, out / "heatmap.pgm")
        mu, sigma = config.scaled
        print(
            f"heatmap: {len(samples)} samples, {len(active)} active, "
            f"{result.clipped} clipped; kernel mu={mu:.0f} sigma={sigma:.0f} "
            f"at {args.dpi:g} dpi"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="copilot")
    parser.add_argument("--version", action="version", version="copilot 0.1.0")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("sim", help="run a batch mission and print the summary")
    p.add_argument("--scenario", default="nominal", help="bundled name or JSON file")
    p.add_argument("--template", help="mission template JSON (default: built-in)")
    p.add_argument("--robots", help="comma-separated roster")
    p.add_argument("--log", help="write the event log (NDJSON) here; overwrites")
    p.add_argument("--max-clock", type=float, default=None, help="stop after N sim seconds")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("serve", help="run the operator-facing mission service")
    p.add_argument("--scenario", default="nominal", help="bundled name or JSON file")
    p.add_argument("--template", help="mission template JSON (default: built-in)")
    p.add_argument("--robots", help="comma-separated roster")
    p.add_argument("--log", help="also write the event log (NDJSON) here")
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-pddl", help="write domain/problem files for a roster")
    p.add_argument("--mission", help="mission template JSON (default: built-in)")
    p.add_argument("--robots", help="comma-separated roster")
    p.add_argument("--out", default="pddl", help="output directory")
    p.add_argument("--horizon", type=float, default=None, help="makespan bound (s)")
    p.add_argument("--name", default="mission", help="problem name")
    p.set_defaults(func=cmd_export_pddl)

    p = sub.add_parser("analyze", help="post-mission tables and cursor heatmap")
    p.add_argument("log", help="event log (NDJSON)")
    p.add_argument("--deployment", action="store_true", help="course-entry table")
    p.add_argument("--usage", action="store_true", help="per-view time shares")
    p.add_argument("--heatmap", action="store_true", help="cursor density grid + image")
    p.add_argument("--dpi", type=float, default=96.0, help="display density for the kernel")
    p.add_argument("--grid", type=_grid, default=(1600, 900), help="WIDTHxHEIGHT")
    p.add_argument("--zero-mean", action="store_true", help="plain Gaussian kernel")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_analyze)

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
