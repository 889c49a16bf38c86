"""
Configuration management for the vectoring simulator
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Project Root
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"
RESULTS_DIR = Path(os.getenv("VECTORSIM_RESULTS_DIR", str(PROJECT_ROOT / "results")))

# Simulation defaults
DEFAULT_PROFILE = os.getenv("VECTORSIM_PROFILE", "gfast106")
DEFAULT_CABLE = os.getenv("VECTORSIM_CABLE", "cat5")
DEFAULT_JOBS = int(os.getenv("VECTORSIM_JOBS", "1"))

# Logging
LOG_LEVEL = os.getenv("VECTORSIM_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

# Numerics
SINGULAR_COND_LIMIT = 1e12  # condition-number estimate above which H counts as singular

# Output
CSV_FLOAT_FORMAT = "%.6f"

# Application
APP_NAME = os.getenv("APP_NAME", "Vectoring Simulator")
APP_VERSION = os.getenv("APP_VERSION", "1.0.0")

KNOWN_PROFILES = ("gfast106", "gfast212", "vdsl17")
KNOWN_CABLES = ("cat5", "cad55", "generic")
KNOWN_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def validate_config():
    """Validate all process-wide settings"""
    errors = []

    if DEFAULT_JOBS < 1:
        errors.append(f"VECTORSIM_JOBS must be >= 1 (got {DEFAULT_JOBS})")

    if DEFAULT_PROFILE not in KNOWN_PROFILES:
        errors.append(f"VECTORSIM_PROFILE '{DEFAULT_PROFILE}' is not one of {', '.join(KNOWN_PROFILES)}")

    if DEFAULT_CABLE not in KNOWN_CABLES:
        errors.append(f"VECTORSIM_CABLE '{DEFAULT_CABLE}' is not one of {', '.join(KNOWN_CABLES)}")

    if LOG_LEVEL not in KNOWN_LOG_LEVELS:
        errors.append(f"VECTORSIM_LOG_LEVEL '{LOG_LEVEL}' is not a logging level")

    if errors:
        raise ValueError("Configuration errors:\n" + "\n".join(f"- {e}" for e in errors))


if __name__ == "__main__":
    validate_config()
    print("✅ Configuration validated successfully")
    print(f"\n📊 Current Configuration:")
    print(f"  Project Root: {PROJECT_ROOT}")
    print(f"  Scenarios: {SCENARIO_DIR}")
    print(f"  Results: {RESULTS_DIR}")
    print(f"  Default profile: {DEFAULT_PROFILE}")
    print(f"  Default cable: {DEFAULT_CABLE}")
    print(f"  Jobs: {DEFAULT_JOBS}")
