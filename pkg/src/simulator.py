"""
Simulation harness
Expands a Scenario into independent work items, runs them (optionally on a
process pool) and collects the rows of every result table in canonical order
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.adaptive import AdaptiveSchedule, elapsed_ms, run_adaptation
from src.canceler import CancelerSpec, box_channel, canceler_snr, mfb_snr, swp_snr
from src.channel import diag_dominance, dominance_profile, generate_channel, select_tones
from src.config import DEFAULT_JOBS, RESULTS_DIR
from src.precoder import PrecoderSpec, precoder_snr
from src.profile import active_tones, make_profile, tone_tx_power
from src.rate import mac_sum_capacity, method_rate, zf_rate_bounds
from src.results import TABLE_COLUMNS, ResultTable, write_tables
from src.scenario import Scenario

logger = logging.getLogger(__name__)

WorkItem = Tuple
Rows = Dict[str, List[tuple]]


def _rate_rows(scenario: Scenario, length_m: Optional[float], seed: int) -> Rows:
    profile = make_profile(scenario.profile)
    topology = scenario.topology(length_m)
    tensor = generate_channel(
        topology, profile, seed, scenario.direction,
        tones=select_tones(profile, scenario.tone_decimation),
    )

    rates, tones = [], []
    for label, spec in scenario.method_specs():
        report = method_rate(tensor, profile, spec, scenario.integer_bits)
        for user in range(tensor.N):
            rates.append((
                topology.lengths[user], label, seed, user,
                report.rate_bps[user] / 1e6, report.rate_bps_df[user] / 1e6,
            ))
        if scenario.per_tone:
            for t, k in enumerate(report.tones):
                for user in range(tensor.N):
                    tones.append((
                        topology.lengths[user], label, seed, int(k),
                        tensor.frequencies[t] / 1e6, user, report.bits[t, user],
                    ))
    return {"rates": rates, "tones": tones}


def _dominance_rows(scenario: Scenario, seed: int) -> Rows:
    profile = make_profile(scenario.profile)
    tensor = generate_channel(
        scenario.topology(), profile, seed, scenario.direction,
        tones=select_tones(profile, scenario.tone_decimation),
    )
    betas = dominance_profile(tensor)
    rows = [
        (seed, int(k), f / 1e6, b[0], b[1], b[2])
        for k, f, b in zip(tensor.tones, tensor.frequencies, betas)
    ]
    return {"dominance": rows}


def box_bits(H: np.ndarray, label: str, spec, snr: float) -> float:
    """Gap-free, uncapped bits of user 0 on a symmetric box channel with unit noise"""
    if isinstance(spec, CancelerSpec):
        return float(np.log2(1 + canceler_snr(H, spec, snr, 1.0)[0]))
    if isinstance(spec, PrecoderSpec):
        return float(np.log2(1 + precoder_snr(H, spec, snr, 1.0)[0]))
    if label == "swp":
        return float(np.log2(1 + swp_snr(H, 0, snr, 1.0)))
    if label == "mfb":
        return float(np.log2(1 + mfb_snr(H, 0, snr, 1.0)))
    if label in ("zf_lower", "zf_upper"):
        lower, upper = zf_rate_bounds(H[0, 0], diag_dominance(H)[2], snr, 1.0, 0.0)
        return lower if label == "zf_lower" else upper
    if label == "mac_sum":
        return mac_sum_capacity(H, np.full(H.shape[0], snr), 1.0) / H.shape[0]
    raise ValueError(f"no box curve for '{label}'")


def _alpha_rows(scenario: Scenario, alpha: float) -> Rows:
    rows = []
    for snr_db in scenario.snr_db:
        snr = 10 ** (snr_db / 10)
        for users in (2, 3):
            H = box_channel(users, alpha)
            for label, spec in scenario.method_specs():
                if not isinstance(spec, str):
                    # the configured ordering is sized for the binder, not the box
                    spec = spec.model_copy(update={"ordering": None})
                rows.append((alpha, snr_db, users, label, box_bits(H, label, spec, snr)))
    return {"alpha": rows}


def adaptive_tone(scenario: Scenario) -> int:
    """Active tone nearest to adaptive_tone_mhz (middle of the band by default)"""
    profile = make_profile(scenario.profile)
    tones = active_tones(profile)
    if scenario.adaptive_tone_mhz is None:
        return int(tones[len(tones) // 2])
    k = int(round(scenario.adaptive_tone_mhz * 1e6 / profile.tone_width))
    return int(np.clip(k, tones[0], tones[-1]))


def _adaptive_rows(scenario: Scenario, seed: int, mode: str) -> Rows:
    profile = make_profile(scenario.profile)
    k = adaptive_tone(scenario)
    tensor = generate_channel(scenario.topology(), profile, seed, "upstream", tones=[k])
    P_x = tone_tx_power(profile, k)

    schedule = AdaptiveSchedule(
        mode=mode,
        mu_hat=scenario.adaptive_mu,
        iterations=scenario.adaptive_iterations,
        update_instants=scenario.adaptive_updates,
        seed=seed,
    )
    _, curve = run_adaptation(tensor.H[0], P_x, profile.noise_power, schedule)
    # MSE relative to the symbol power
    mse_db = 10 * np.log10(np.maximum(curve / P_x, 1e-300))
    rows = [
        (mode, seed, i + 1, mse_db[i], elapsed_ms(i + 1, profile.symbol_rate))
        for i in range(len(curve))
    ]
    return {"learning": rows}


def _run_item(args: Tuple[Scenario, WorkItem]) -> Rows:
    scenario, item = args
    kind = item[0]
    if kind == "rate":
        return _rate_rows(scenario, item[1], item[2])
    if kind == "dominance":
        return _dominance_rows(scenario, item[1])
    if kind == "alpha":
        return _alpha_rows(scenario, item[1])
    if kind == "adaptive":
        return _adaptive_rows(scenario, item[1], item[2])
    raise ValueError(f"unknown work item '{kind}'")


class Simulator:
    """Runs one scenario and collects its result tables"""

    def __init__(self, scenario: Scenario, jobs: int = DEFAULT_JOBS, progress: bool = True):
        if jobs < 1:
            raise ValueError("jobs must be >= 1")
        self.scenario = scenario
        self.jobs = jobs
        self.progress = progress

    def work_items(self) -> List[WorkItem]:
        """Independent work items in the canonical output order"""
        s = self.scenario
        items: List[WorkItem] = []
        if s.sweep == "none" and s.methods:
            items += [("rate", None, seed) for seed in s.seeds]
        elif s.sweep == "length":
            items += [("rate", length, seed) for length in s.sweep_points() for seed in s.seeds]
        elif s.sweep == "frequency":
            items += [("dominance", seed) for seed in s.seeds]
        elif s.sweep == "alpha":
            items += [("alpha", alpha) for alpha in s.sweep_points()]

        if s.adaptive_mode != "none":
            modes = ("lms", "two_stage") if s.adaptive_mode == "both" else (s.adaptive_mode,)
            items += [("adaptive", seed, mode) for seed in s.seeds for mode in modes]
        return items

    def run(self) -> Dict[str, ResultTable]:
        """
        Execute every work item.

        Returns:
            Result tables keyed by name; tables the scenario does not
            produce stay empty
        """
        items = self.work_items()
        tables = {name: ResultTable(name) for name in TABLE_COLUMNS}
        logger.info(
            "Running %d work item(s) for %s (%s sweep) with %d job(s)",
            len(items), self.scenario.profile, self.scenario.sweep, self.jobs,
        )
        start_time = time.time()

        payload = [(self.scenario, item) for item in items]
        bar = dict(total=len(items), desc="📈 Simulating", disable=not self.progress)
        if self.jobs > 1 and len(items) > 1:
            # map keeps submission order, so output stays deterministic
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                for rows in tqdm(pool.map(_run_item, payload), **bar):
                    self._collect(tables, rows)
        else:
            for args in tqdm(payload, **bar):
                self._collect(tables, _run_item(args))

        logger.info("Finished in %.2fs", time.time() - start_time)
        return tables

    @staticmethod
    def _collect(tables: Dict[str, ResultTable], rows: Rows):
        for name, table_rows in rows.items():
            tables[name].extend(table_rows)

    def write(self, tables: Dict[str, ResultTable], out_dir: Optional[Path] = None) -> List[Path]:
        """Write the non-empty tables to out_dir (scenario out_dir, then RESULTS_DIR)"""
        if out_dir is None:
            out_dir = Path(self.scenario.out_dir) if self.scenario.out_dir else RESULTS_DIR
        return write_tables(tables, out_dir)


def run_scenario(scenario: Scenario, jobs: int = DEFAULT_JOBS, progress: bool = False) -> Dict[str, ResultTable]:
    """Run a scenario and return its result tables"""
    return Simulator(scenario, jobs=jobs, progress=progress).run()
