"""Command line entry points: serve, bench, run-task, scenes."""

from __future__ import annotations

import argparse
import sys
import time

from .bench.pipeline import run_scenario
from .bench.report import emit_report, render_table
from .driver import TaskMode, trial_table
from .env.scenes import scene_names
from .netsim import preset_names
from .server import ServerConfig, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sandstream",
        description="Hybrid-control sandbox sessions with adaptive tile streaming",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the control-plane + stream-bridge server")
    p_serve.add_argument("--bind", default="127.0.0.1:7320")
    p_serve.add_argument("--max-sessions", type=int, default=64)
    p_serve.add_argument(
        "--net-preset",
        default="none",
        choices=["none", *preset_names()],
        help="emulate link conditions on the stream bridge",
    )
    p_serve.add_argument("--seed", type=int, default=0)

    p_bench = sub.add_parser("bench", help="run protocol benchmarks on the simulated clock")
    p_bench.add_argument("--scene", required=True, choices=scene_names())
    p_bench.add_argument("--protocol", default="both", choices=["asp", "baseline", "both"])
    p_bench.add_argument("--preset", default="normal", choices=preset_names())
    p_bench.add_argument("--duration", type=int, default=20_000, help="simulated ms")
    p_bench.add_argument("--seed", type=int, default=1)
    p_bench.add_argument("--out", default=None, help="directory for runs.csv / report.txt")
    p_bench.add_argument("--clicks", action="store_true", help="measure click-to-photon")

    p_task = sub.add_parser("run-task", help="agent-only vs hybrid task success rates")
    p_task.add_argument("--scene", default="all",
                        choices=["all", "ad_overlay", "captcha_modal", "login_form"])
    p_task.add_argument("--mode", default="both",
                        choices=["both", "agent_only", "hybrid"])
    p_task.add_argument("--trials", type=int, default=20)
    p_task.add_argument("--seed", type=int, default=0)

    sub.add_parser("scenes", help="list the scene catalog")

    args = parser.parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "run-task":
        return _cmd_run_task(args)
    if args.command == "scenes":
        for name in scene_names():
            print(name)
        return 0
    return 2


def _cmd_serve(args) -> int:
    config = ServerConfig(
        max_sessions=args.max_sessions,
        net_preset=None if args.net_preset == "none" else args.net_preset,
        seed=args.seed,
    )
    server = serve(args.bind, config)
    host, port = server.address
    print(f"sandstream serving on {host}:{port} "
          f"(net emulation: {args.net_preset})", flush=True)
    try:
        while True:
            time.sleep(0.5)
            server.registry.tick()
    except KeyboardInterrupt:
        server.stop()
        return 0


def _cmd_bench(args) -> int:
    protocols = ["asp", "baseline"] if args.protocol == "both" else [args.protocol]
    reports = []
    for protocol in protocols:
        started = time.perf_counter()
        report = run_scenario(
            args.scene,
            protocol,
            args.preset,
            float(args.duration),
            args.seed,
            with_clicks=args.clicks,
        )
        reports.append(report)
        print(
            f"{protocol:9} {args.scene:12} {args.preset:9} "
            f"bandwidth={report.mean_bandwidth_bps / 1e6:7.3f} mbps  "
            f"stutter={report.stutter_rate * 100:6.2f}%  "
            f"ssim={report.ssim_mean:6.4f}  "
            + (
                f"latency={report.click_to_photon_ms:6.1f} ms  "
                if report.click_to_photon_ms is not None
                else ""
            )
            + f"[{time.perf_counter() - started:.1f}s wall]",
            flush=True,
        )
    print()
    print(render_table(reports), end="")
    if args.out:
        csv_path, txt_path = emit_report(reports, args.out)
        print(f"wrote {csv_path} and {txt_path}")
    return 0


def _cmd_run_task(args) -> int:
    scenes = (
        ["ad_overlay", "captcha_modal", "login_form"]
        if args.scene == "all"
        else [args.scene]
    )
    if args.mode == "both":
        print(trial_table(scenes, args.trials, args.seed), end="")
        return 0
    from .driver import run_trials

    mode = TaskMode(args.mode)
    for scene in scenes:
        rate, _ = run_trials(scene, mode, args.trials, args.seed)
        print(f"{scene:<16} {mode.value:<12} {rate * 100:5.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
