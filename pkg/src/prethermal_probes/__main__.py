#!/usr/bin/env python3
import argparse
import datetime
import os
import sys
from pathlib import Path

try:
    from .config import EXPERIMENTS, load_config, resolve_config
    from .errors import ConfigError, InvariantViolation, NumericalError
    from .experiments import run_experiment
except ImportError:
    from prethermal_probes.config import EXPERIMENTS, load_config, resolve_config
    from prethermal_probes.errors import ConfigError, InvariantViolation, NumericalError
    from prethermal_probes.experiments import run_experiment

# --- 종료 코드 ---
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

OUT_DIR_ENV = "PRETHERMAL_OUT_DIR"


# --- 로그: stdout/stderr 를 파일에도 기록 ---
class TeeStream:
    def __init__(self, primary, secondary):
        self.primary = primary
        self.secondary = secondary

    def write(self, data):
        self.primary.write(data)
        self.secondary.write(data)
        self.flush()

    def flush(self):
        self.primary.flush()
        self.secondary.flush()


def setup_logging(log_file):
    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_handle = open(log_path, "a", encoding="utf-8")
    original_stdout = sys.stdout
    original_stderr = sys.stderr
    sys.stdout = TeeStream(sys.stdout, log_handle)
    sys.stderr = TeeStream(sys.stderr, log_handle)
    return log_path, log_handle, original_stdout, original_stderr


def restore_logging(log_handle, original_stdout, original_stderr):
    sys.stdout = original_stdout
    sys.stderr = original_stderr
    log_handle.close()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prethermal-probes",
        description="Simulate prethermal thermometry with quasidegenerate probes and write CSV results.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "dynamics": "V-model populations/coherence over time vs the closed-form solution.",
        "fisher-sweep": "Time-weighted CFI/QFI over a beta grid (prethermal vs equilibrium).",
        "nlevel": "QFI(t) and time-weighted Fisher information for N-level probes.",
        "xi-bound": "Monte-Carlo check of the conserved-quantity bound on random V-model states.",
        "spectrum": "Generator eigenvalues, relaxation timescales and the prethermal window.",
    }
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument("--config", default=None, help="Path to the YAML config (or a run manifest).")
        sub.add_argument("--out", default=None,
                         help=f"Output directory (default: ${OUT_DIR_ENV} or output.dir/<experiment>).")
        sub.add_argument("--seed", type=int, default=None, help="Sampling seed (unsigned 64-bit).")
        sub.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None,
                         help="Also write SVG figures (needs the 'plots' extra).")
        sub.add_argument("--threads", type=int, default=None, help="Worker threads for grids/shards.")
        sub.add_argument("--log", action=argparse.BooleanOptionalAction, default=True,
                         help="Tee console output into <out>/logs/<experiment>.<timestamp>.log.")
    return parser


def build_overrides(args):
    overrides = {"experiment": args.command}
    if args.seed is not None:
        overrides["sampling"] = {"seed": args.seed}
    if args.plots is not None:
        overrides["output"] = {"plots": args.plots}
    if args.threads is not None:
        overrides["threads"] = args.threads
    return overrides


def resolve_out_dir(args, config):
    if args.out:
        return Path(args.out)
    env_dir = os.environ.get(OUT_DIR_ENV)
    if env_dir:
        return Path(env_dir)
    return Path(config["output"]["dir"]) / config.experiment


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    raw = {}
    if args.config:
        raw = load_config(args.config)
        if raw is None:
            return EXIT_CONFIG
    try:
        config = resolve_config(raw, build_overrides(args))
    except ConfigError as e:
        print("❌ Invalid configuration:", file=sys.stderr)
        for problem in e.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = resolve_out_dir(args, config)
    logging_state = None
    if args.log:
        timestamp = datetime.datetime.now().strftime("%Y%m%d%H%M%S")
        log_path, *handles = setup_logging(out_dir / "logs" / f"{config.experiment}.{timestamp}.log")
        logging_state = handles
        print(f"Logging to {log_path}")

    try:
        print(f"\n🔍 Running {config.experiment} → {out_dir}")
        try:
            result = run_experiment(config, out_dir)
        except NumericalError as e:
            print(f"❌ Numerical failure: {e}", file=sys.stderr)
            return EXIT_NUMERIC
        except InvariantViolation as e:
            print(f"❌ Invariant violated: {e}", file=sys.stderr)
            return EXIT_INVARIANT
        except ValueError as e:
            print(f"❌ Invalid input: {e}", file=sys.stderr)
            return EXIT_CONFIG

        for path in result.outputs:
            print(f"  📦 {path}")
        if result.violations:
            print(f"\n❌ {len(result.violations)} invariant violation(s):", file=sys.stderr)
            for violation in result.violations:
                print(f"  - {violation}", file=sys.stderr)
            return EXIT_INVARIANT
        print(f"\n✅ {config.experiment} finished.")
        return EXIT_OK
    finally:
        if logging_state is not None:
            restore_logging(*logging_state)


if __name__ == "__main__":
    sys.exit(main())
