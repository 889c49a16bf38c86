"""
Command-line entry point for the vectoring simulator

    python scripts/vectorsim.py run --config data/scenarios/rate_reach_equal.cfg
    python scripts/vectorsim.py profiles
    python scripts/vectorsim.py selftest
"""
import argparse
import logging
import sys
import time
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent))

from src.config import APP_NAME, APP_VERSION, DEFAULT_JOBS, LOG_FORMAT, LOG_LEVEL, validate_config
from src.errors import VectorSimError
from src.oracles import run_selftest
from src.profile import active_tones, list_profiles, vectoring_load
from src.scenario import load_scenario
from src.simulator import Simulator

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def cmd_run(args) -> int:
    print(f"\n🚀 Running scenario {args.config}")
    scenario = load_scenario(args.config)

    simulator = Simulator(scenario, jobs=args.jobs, progress=not args.quiet and sys.stdout.isatty())
    start_time = time.time()
    tables = simulator.run()
    paths = simulator.write(tables, Path(args.out) if args.out else None)

    print(f"\n✅ Done in {time.time() - start_time:.2f}s")
    for path in paths:
        print(f"   📄 {path}")
    return EXIT_OK


def cmd_profiles(args) -> int:
    print(f"\n📡 Profiles")
    for profile in list_profiles():
        tones = active_tones(profile)
        print(f"\n   {profile.name}")
        print(f"      Tone grid:     {profile.tone_count} x {profile.tone_width / 1e3:g} kHz")
        print(f"      Active tones:  {tones[0]}..{tones[-1]} ({len(tones)})")
        print(f"      Band:          {profile.start_freq / 1e6:g} - {profile.stop_freq / 1e6:g} MHz")
        print(f"      Symbol rate:   {profile.symbol_rate:g} /s")
        print(f"      Total power:   {profile.total_power_dbm:g} dBm")
        print(f"      Bit cap:       {profile.bit_cap}")
        print(f"      Load (N=10):   {vectoring_load(profile, 10):.3g} MAC/s")
    return EXIT_OK


def cmd_selftest(args) -> int:
    print("\n🧪 Running closed-form self-test...\n")
    checks = run_selftest()
    for check in checks:
        mark = "✅" if check.passed else "❌"
        print(f"   {mark} {check.name}: {check.detail}")

    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"\n❌ {len(failed)} of {len(checks)} checks failed")
        return EXIT_SELFTEST_FAILED
    print(f"\n✅ All {len(checks)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario file and write CSV results")
    run.add_argument("--config", required=True, help="Scenario file (key=value lines)")
    run.add_argument("--out", default=None, help="Output directory (default: scenario out_dir or results/)")
    run.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="Worker processes")
    run.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    run.set_defaults(func=cmd_run)

    profiles = sub.add_parser("profiles", help="List the built-in system profiles")
    profiles.set_defaults(func=cmd_profiles)

    selftest = sub.add_parser("selftest", help="Check cancelers and precoders against closed forms")
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)

    try:
        validate_config()
        if getattr(args, "jobs", 1) < 1:
            raise VectorSimError("--jobs must be >= 1")
        return args.func(args)
    except ValueError as e:
        # VectorSimError and pydantic validation both land here
        print(f"\n❌ {e}")
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logging.getLogger(__name__).exception("Simulation failed")
        print(f"\n❌ Error: {e}")
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
