"""
Scenario files for the simulation harness
Parses the flat key=value format into a validated Scenario
"""
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.adaptive import DEFAULT_UPDATE_INSTANTS
from src.canceler import CANCELER_METHODS, CancelerSpec, check_permutation
from src.channel import BinderTopology, CableModel, cable_model, equal_length_binder, spaced_binder
from src.config import DEFAULT_CABLE, DEFAULT_PROFILE
from src.errors import ConfigError, RejectedInputError
from src.precoder import PRECODER_METHODS, PrecoderSpec
from src.profile import PROFILES
from src.rate import BOUND_IDS

logger = logging.getLogger(__name__)

SweepKind = Literal["none", "length", "frequency", "alpha"]

# zf_bounds is shorthand for the lower and upper ZF bound pair
METHOD_ALIASES = {"zf_bounds": ("zf_lower", "zf_upper")}
UPSTREAM_ONLY = set(CANCELER_METHODS) - {"none"}
DOWNSTREAM_ONLY = set(PRECODER_METHODS) - {"none"}
KNOWN_METHODS = set(CANCELER_METHODS) | set(PRECODER_METHODS) | set(BOUND_IDS) | set(METHOD_ALIASES)

LIST_KEYS = ("methods", "seeds", "ordering", "snr_db", "adaptive_updates")
CABLE_OVERRIDE_KEYS = ("il_a0", "il_a1", "il_a2", "sigma_fext_db", "fext_slope_hi")
DIRECTION_NAMES = {"up": "upstream", "down": "downstream", "upstream": "upstream", "downstream": "downstream"}


class Scenario(BaseModel):
    """One simulation run described by a scenario file"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: str = DEFAULT_PROFILE
    cable: Literal["cat5", "cad55", "generic"] = DEFAULT_CABLE
    lines: int = Field(default=10, gt=0)
    length_m: Optional[float] = Field(default=None, gt=0)
    length_min_m: Optional[float] = Field(default=None, gt=0)
    length_max_m: Optional[float] = Field(default=None, gt=0)
    length_step_m: Optional[float] = Field(default=None, gt=0)
    methods: Tuple[str, ...] = ()
    direction: Literal["upstream", "downstream"] = "upstream"
    seeds: Tuple[int, ...] = ()
    sweep: SweepKind = "none"
    sweep_min: Optional[float] = None
    sweep_max: Optional[float] = None
    sweep_step: Optional[float] = Field(default=None, gt=0)
    out_dir: Optional[str] = None

    # cable overrides
    il_a0: Optional[float] = None
    il_a1: Optional[float] = None
    il_a2: Optional[float] = None
    chi_fext_db: Optional[float] = None
    sigma_fext_db: Optional[float] = Field(default=None, ge=0)
    fext_breakpoint_mhz: Optional[float] = Field(default=None, gt=0)
    fext_slope_hi: Optional[float] = Field(default=None, ge=1)

    # method options
    ordering: Optional[Tuple[int, ...]] = None
    scaling: Literal["row_norm", "global"] = "row_norm"
    shaping_loss_db: float = Field(default=0.0, ge=0)
    integer_bits: bool = False
    tone_decimation: int = Field(default=0, ge=0)
    per_tone: bool = False
    snr_db: Tuple[float, ...] = (10.0, 20.0)

    # adaptive run
    adaptive_mode: Literal["none", "lms", "two_stage", "both"] = "none"
    adaptive_mu: float = Field(default=0.1, ge=0)
    adaptive_iterations: int = Field(default=5000, gt=0)
    adaptive_updates: Tuple[int, ...] = DEFAULT_UPDATE_INSTANTS
    adaptive_tone_mhz: Optional[float] = Field(default=None, gt=0)

    @field_validator("direction", mode="before")
    @classmethod
    def _direction_alias(cls, value):
        return DIRECTION_NAMES.get(str(value).strip().lower(), value)

    @field_validator("profile")
    @classmethod
    def _known_profile(cls, name):
        if name not in PROFILES:
            raise ValueError(f"unknown profile '{name}'. Available: {', '.join(PROFILES)}")
        return name

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, methods):
        for name in methods:
            if name not in KNOWN_METHODS:
                raise ValueError(f"unknown method '{name}'. Available: {', '.join(sorted(KNOWN_METHODS))}")
        return methods

    @field_validator("seeds")
    @classmethod
    def _non_negative_seeds(cls, seeds):
        if any(s < 0 for s in seeds):
            raise ValueError("seeds must be non-negative")
        return seeds

    @field_validator("ordering")
    @classmethod
    def _valid_ordering(cls, ordering):
        if ordering is not None:
            try:
                check_permutation(ordering)
            except RejectedInputError as e:
                raise ValueError(str(e)) from e
        return ordering

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        if self.needs_methods and not self.methods:
            raise ValueError("methods must not be empty")
        if self.needs_seeds and not self.seeds:
            raise ValueError("seeds must not be empty")

        for name in self.methods:
            if self.direction == "downstream" and name in UPSTREAM_ONLY:
                raise ValueError(f"method '{name}' is an upstream canceler but direction is downstream")
            if self.direction == "upstream" and name in DOWNSTREAM_ONLY:
                raise ValueError(f"method '{name}' is a downstream precoder but direction is upstream")

        spaced = (self.length_min_m, self.length_max_m, self.length_step_m)
        if any(v is not None for v in spaced):
            if any(v is None for v in spaced):
                raise ValueError("length_min_m, length_max_m and length_step_m go together")
            if self.length_min_m > self.length_max_m:
                raise ValueError("length_min_m must not exceed length_max_m")
            if self.length_m is not None:
                raise ValueError("give either length_m or a length range, not both")
        elif self.needs_length and self.length_m is None:
            raise ValueError("a binder length is required (length_m or length_min_m/length_max_m/length_step_m)")

        if self.sweep in ("length", "alpha"):
            if None in (self.sweep_min, self.sweep_max, self.sweep_step):
                raise ValueError(f"sweep={self.sweep} needs sweep_min, sweep_max and sweep_step")
            if self.sweep_min > self.sweep_max:
                raise ValueError("sweep_min must not exceed sweep_max")
        if self.sweep == "length" and self.sweep_min <= 0:
            raise ValueError("length sweep needs positive lengths")
        if self.sweep == "alpha" and not (0 <= self.sweep_min and self.sweep_max < 1):
            raise ValueError("alpha sweep range must lie in [0, 1)")

        if self.ordering is not None and self.sweep != "alpha" and len(self.ordering) != self.lines:
            raise ValueError(f"ordering has {len(self.ordering)} entries for {self.lines} lines")
        return self

    @property
    def needs_methods(self) -> bool:
        # an adaptive-only run needs no rate methods
        if self.sweep == "none":
            return self.adaptive_mode == "none"
        return self.sweep in ("length", "alpha")

    @property
    def needs_seeds(self) -> bool:
        return self.sweep != "alpha"

    @property
    def needs_length(self) -> bool:
        return self.sweep in ("none", "frequency") or self.adaptive_mode != "none"

    def cable_model(self) -> CableModel:
        overrides = {key: getattr(self, key) for key in CABLE_OVERRIDE_KEYS if getattr(self, key) is not None}
        if self.fext_breakpoint_mhz is not None:
            overrides["fext_breakpoint"] = self.fext_breakpoint_mhz * 1e6
        return cable_model(self.cable, chi_fext_db=self.chi_fext_db, **overrides)

    def topology(self, length_m: Optional[float] = None) -> BinderTopology:
        """Binder for one sweep point (length_m overrides the configured length)"""
        cable = self.cable_model()
        if length_m is not None:
            return equal_length_binder(self.lines, length_m, cable)
        if self.length_m is not None:
            return equal_length_binder(self.lines, self.length_m, cable)
        if self.length_min_m is not None:
            return spaced_binder(self.length_min_m, self.length_max_m, self.length_step_m, cable)
        # length sweeps without a fixed binder start at the shortest point
        return equal_length_binder(self.lines, self.sweep_min, cable)

    def sweep_points(self) -> List[float]:
        if self.sweep not in ("length", "alpha"):
            return []
        count = int(np.floor((self.sweep_max - self.sweep_min) / self.sweep_step + 1e-9)) + 1
        return [round(self.sweep_min + i * self.sweep_step, 10) for i in range(count)]

    def method_specs(self) -> List[Tuple[str, Union[CancelerSpec, PrecoderSpec, str]]]:
        """(label, spec) pairs in configured order with aliases expanded"""
        specs = []
        for name in self.methods:
            for label in METHOD_ALIASES.get(name, (name,)):
                if label in BOUND_IDS:
                    specs.append((label, label))
                elif self.direction == "downstream":
                    specs.append((label, PrecoderSpec(
                        method=label,
                        scaling=self.scaling,
                        ordering=self.ordering,
                        shaping_loss_db=self.shaping_loss_db,
                    )))
                else:
                    specs.append((label, CancelerSpec(method=label, ordering=self.ordering)))
        return specs


def _split_list(key: str, value: str) -> List[str]:
    items = [item.strip() for item in value.split(",") if item.strip()]
    if key != "seeds":
        return items
    seeds = []
    for item in items:
        # "a-b" is an inclusive seed range
        if "-" in item.lstrip("-"):
            start, end = item.split("-", 1)
            seeds.extend(str(s) for s in range(int(start), int(end) + 1))
        else:
            seeds.append(item)
    return seeds


def parse_config(text: str) -> Scenario:
    """
    Parse a scenario file.

    Lines are key=value; '#' starts a comment; lists are comma separated.

    Args:
        text: Scenario file contents

    Returns:
        Validated Scenario

    Raises:
        ConfigError: On syntax errors, unknown keys, missing keys or invalid values
    """
    values: Dict[str, Union[str, List[str]]] = {}
    key_lines: Dict[str, int] = {}
    allowed = set(Scenario.model_fields)

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got '{line}'", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", number)
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'", number)
        if key in values:
            raise ConfigError(f"duplicate key '{key}' (first on line {key_lines[key]})", number)
        try:
            values[key] = _split_list(key, value) if key in LIST_KEYS else value
        except ValueError:
            raise ConfigError(f"bad seed range in '{value}'", number)
        key_lines[key] = number

    if not values:
        raise ConfigError("empty scenario; required keys: methods, seeds, length_m (or length_min_m/length_max_m/length_step_m)")

    try:
        scenario = Scenario(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field = error["loc"][0] if error["loc"] else None
        message = error["msg"].removeprefix("Value error, ")
        if field is not None:
            message = f"{field}: {message}"
        raise ConfigError(message, key_lines.get(field)) from e

    logger.debug("Parsed scenario: profile=%s sweep=%s methods=%s", scenario.profile, scenario.sweep, scenario.methods)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and parse a scenario file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))
