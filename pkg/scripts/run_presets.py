"""Run every shipped preset (or a chosen subset) and report exit codes and timings.

    python3 scripts/run_presets.py --out results/ [--threads 4] [fig2a fig6a ...]
"""
import argparse
import contextlib
import io
import json
import time
from pathlib import Path

from eitchain.cli import main
from eitchain.config import preset_names


def run(name, out_dir, threads, extra):
    argv = ["preset", name, "--out", str(out_dir / f"{name}.csv")]
    if threads:
        argv += ["--threads", str(threads)]
    for item in extra:
        argv += ["--set", item]
    buf = io.StringIO()
    t0 = time.perf_counter()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    trailer = json.loads(buf.getvalue()) if code == 0 else {}
    return code, time.perf_counter() - t0, trailer


def main_cli():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="presets to run (default: all)")
    p.add_argument("--out", default="results")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--set", dest="extra", action="append", default=[], help="override applied to every preset")
    args = p.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    for name in args.names or preset_names():
        code, dt, trailer = run(name, out_dir, args.threads, args.extra)
        summary = trailer.get("summary", {})
        extra = ""
        if "fit_r_squared" in summary:
            extra = f" xi={summary['fit_xi']:.4g} R2={summary['fit_r_squared']:.6f}"
        if "excluded" in summary:
            extra += f" excluded={summary['excluded']}"
        print(f"{name:16s} exit={code} {dt:8.2f}s{extra}", flush=True)
        failed += code != 0 or summary.get("excluded", 0) != 0
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main_cli()
