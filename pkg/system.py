import copy
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

import checks
import plotting
import results
import suites
from errors import ConfigurationError
from pdesolve import PotentialField, standard_bump

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

RESOLVED_FILE = "config.resolved.yaml"
EXPERIMENTS = list(suites.SUITE_ORDER) + ["all"]

DEFAULTS = {
    "experiment": "all",
    "grid": {"y_min": -8.0, "y_max": 8.0, "n_y": 801, "n_t": 500, "t_final": 1.0, "init_epsilon": None},
    "lattice": {
        "y_min": -7.0, "y_max": 7.0, "n_y": 281, "n_t": 2000, "t_final": 1.0,
        "realizations": 1000, "shift_realizations": 10000, "ratio_realizations": 200, "line_realizations": 100,
    },
    "potential": standard_bump().to_config(),
    "mc": {"samples": 100000, "master_seed": 20240601, "steps": 200, "delta": 0.4},
    "layers": {"n_max": 3},
    "polymer": {"levels": 3, "steps": 400, "t_final": 1.0, "seeds": 50, "positivity_seeds": 1000},
    "tolerances": {},
    "output": {"directory": "results"},
}

INTEGER_KEYS = {
    "grid": ("n_y", "n_t"),
    "lattice": ("n_y", "n_t", "realizations", "shift_realizations", "ratio_realizations", "line_realizations"),
    "mc": ("samples", "master_seed", "steps"),
    "layers": ("n_max",),
    "polymer": ("levels", "steps", "seeds", "positivity_seeds"),
}


def _load_yaml(path):
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"Config file {path} not found")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Config file {path} is not valid YAML: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a mapping of sections")
    return data


def merge_config(base, overrides, source="config"):
    """Section-wise merge; unknown sections or keys raise ConfigurationError"""
    merged = copy.deepcopy(base)
    for section, value in (overrides or {}).items():
        if section not in DEFAULTS:
            raise ConfigurationError(f"Unknown section '{section}' in {source}")
        if section == "tolerances":
            if not isinstance(value, dict):
                raise ConfigurationError("Section 'tolerances' must be a mapping")
            unknown = set(value) - checks.known_tolerances()
            if unknown:
                raise ConfigurationError(f"Unknown tolerances in {source}: {sorted(unknown)}")
            merged[section].update(value)
        elif isinstance(DEFAULTS[section], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"Section '{section}' must be a mapping")
            unknown = set(value) - set(DEFAULTS[section])
            if unknown:
                raise ConfigurationError(f"Unknown keys in section '{section}' of {source}: {sorted(unknown)}")
            merged[section].update(value)
        else:
            merged[section] = value
    return merged


def validate_config(config):
    if config["experiment"] not in EXPERIMENTS:
        raise ConfigurationError(f"Unknown experiment '{config['experiment']}', expected one of {EXPERIMENTS}")
    for section, keys in INTEGER_KEYS.items():
        for key in keys:
            value = config[section][key]
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigurationError(f"{section}.{key} must be a non-negative integer, got {value!r}")
    n_max = config["layers"]["n_max"]
    if not 2 <= n_max <= 5:
        raise ConfigurationError(f"layers.n_max must lie in 2..5, got {n_max}")
    if config["mc"]["samples"] < 2:
        raise ConfigurationError("mc.samples must be at least 2")
    PotentialField.from_config(config["potential"])
    suites.smooth_grid(config).validate()
    suites._lattice_grid(config).validate()
    return config


class LabSystem:
    def __init__(self, config_path=None, threads=1, out_dir=None, seed=None):
        logger.info("Initializing LabSystem...")
        # Load settings
        self._settings = {}
        try:
            self._settings = merge_config(DEFAULTS, _load_yaml(os.path.join(os.path.dirname(__file__), "settings.yaml")),
                                          source="settings.yaml")
            logger.debug("Default settings loaded")
        except ConfigurationError as e:
            logger.error(f"Error loading settings: {e}")
            self._settings = copy.deepcopy(DEFAULTS)

        config = self._settings
        if config_path is not None:
            config = merge_config(config, _load_yaml(config_path), source=str(config_path))
        if seed is not None:
            config["mc"]["master_seed"] = int(seed)
        if out_dir is not None:
            config["output"]["directory"] = str(out_dir)
        self.settings = config

        if threads < 1:
            raise ConfigurationError(f"Thread count must be at least 1, got {threads}")
        self.threads = threads
        self._executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        self._status = {"experiment": self._settings["experiment"], "suites": {}, "rows": 0, "failing": 0}

    @property
    def settings(self):
        """Get the resolved configuration"""
        return self._settings

    @settings.setter
    def settings(self, value):
        """Validate and replace the resolved configuration"""
        if not isinstance(value, dict):
            raise ValueError("Settings must be a dictionary")
        self._settings = validate_config(value)

    @property
    def out_dir(self):
        return Path(self._settings["output"]["directory"])

    @property
    def status(self):
        return self._status

    def update_status(self, status):
        try:
            assert isinstance(status, dict)
            self._status.update(status)
            logger.debug(f"Status updated: {status}")
        except AssertionError:
            logger.error("Invalid status update - must be a dictionary")

    def save_settings(self):
        path = self.out_dir / RESOLVED_FILE
        with open(path, "w") as f:
            yaml.safe_dump(self._settings, f, default_flow_style=False, sort_keys=True)
        return path

    def run(self):
        """Run the configured experiment and write every output file; returns the Summary"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.save_settings()
        experiment = self._settings["experiment"]
        names = suites.SUITE_ORDER if experiment == "all" else [experiment]
        rows, ledger = [], []
        for name in names:
            start = time.perf_counter()
            suite_rows, suite_ledger = suites.run_suite(name, self._settings, self._executor)
            rows.extend(suite_rows)
            ledger.extend(suite_ledger)
            failing = [r.check_id for r in suite_rows if r.failing]
            self._status["suites"][name] = {
                "checks": len(suite_rows), "failing": failing, "wall_time": time.perf_counter() - start,
            }
        results.write_results(rows, self.out_dir)
        results.write_timings(rows, self.out_dir)
        results.write_ledger(ledger, self.out_dir)
        plotting.write_plot_scripts(self.out_dir)
        summary = results.summarize(rows)
        self.update_status({"rows": len(rows), "failing": len(summary.failing)})
        return summary

    def cleanup(self):
        """Shut the worker pool down"""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
            logger.debug("Worker pool shut down")
