import logging
import math
import os

import numpy as np
import yaml

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

try:
    with open(os.path.join(os.path.dirname(__file__), "tolerances.yaml"), "r") as f:
        tolerance_settings = yaml.safe_load(f)
except Exception as e:
    logger.error(f"Could not load tolerances.yaml: {e}")
    tolerance_settings = {
        "free_field": 1e-4,
        "layers_free_field": 5e-3,
        "s_free_field": 1e-2,
        "calibration_spread": 5e-3,
        "confluent_constant": 1e-3,
        "gt_constancy": 2e-2,
        "gt_free_field": 1e-2,
        "exact_identity": 1e-10,
        "difference_chain": 1e-8,
        "gt_factorization": 1e-8,
        "convergence_band": [3.0, 5.0],
        "mc_sigma": 3.0,
        "stderr_scaling": 0.2,
        "exchangeability_p": 0.01,
        "reflection": 1e-3,
        "rayleigh_ks": 0.02,
        "second_moment": 5e-2,
        "flow": 2e-2,
        "flow_free_field": 1e-8,
        "flow_refinement": 1.2,
        "ratio_free_field": 1e-6,
        "ratio_refinement": 1.5,
        "km_free_field": 1e-6,
        "lattice_parity": 1e-10,
        "polymer_brute_force": 1e-3,
        "polymer_closed_form": 1e-10,
        "positivity_fraction": 0.99,
        "mass": 1e-6,
    }


def tolerance(name, overrides=None):
    """Registry value for name, taking a per-run override first"""
    if overrides and name in overrides:
        return overrides[name]
    if name not in tolerance_settings:
        raise KeyError(f"Unknown tolerance '{name}'")
    return tolerance_settings[name]


def known_tolerances():
    return set(tolerance_settings)


### Check predicates ###
# Every predicate answers False when it cannot decide.

def relative_error(value, reference):
    value = np.asarray(value, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.max(np.abs(value - reference) / np.abs(reference)))


def check_relative(value, reference, tol):
    try:
        error = relative_error(value, reference)
        if not math.isfinite(error):
            logger.warning(f"Non-finite relative error for value {value} against {reference}")
            return False
        return error <= tol
    except Exception as e:
        logger.error(f"Error in check_relative: {e}")
        return False


def check_absolute(value, reference, tol):
    try:
        error = float(np.max(np.abs(np.asarray(value, dtype=float) - np.asarray(reference, dtype=float))))
        return math.isfinite(error) and error <= tol
    except Exception as e:
        logger.error(f"Error in check_absolute: {e}")
        return False


def check_within_sigma(value, reference, stderr, n_sigma, reference_error=0.0):
    """|value - reference| <= n_sigma * combined standard error"""
    try:
        combined = math.hypot(float(stderr), float(reference_error))
        if not math.isfinite(combined) or combined <= 0:
            logger.warning(f"Cannot judge {value} against {reference}: combined error {combined}")
            return False
        return abs(float(value) - float(reference)) <= n_sigma * combined
    except Exception as e:
        logger.error(f"Error in check_within_sigma: {e}")
        return False


def check_all_within_sigma(values, references, stderrs, n_sigma):
    try:
        z = np.abs(np.asarray(values) - np.asarray(references)) / np.asarray(stderrs)
        return bool(np.all(np.isfinite(z)) and np.all(z <= n_sigma))
    except Exception as e:
        logger.error(f"Error in check_all_within_sigma: {e}")
        return False


def check_band(value, band):
    try:
        lo, hi = band
        return bool(np.all(np.isfinite(value)) and np.all(np.asarray(value) >= lo) and np.all(np.asarray(value) <= hi))
    except Exception as e:
        logger.error(f"Error in check_band: {e}")
        return False


def check_at_most(value, bound):
    try:
        value = np.asarray(value, dtype=float)
        return bool(np.all(np.isfinite(value)) and np.all(value <= bound))
    except Exception as e:
        logger.error(f"Error in check_at_most: {e}")
        return False


def check_at_least(value, bound):
    try:
        value = np.asarray(value, dtype=float)
        return bool(np.all(np.isfinite(value)) and np.all(value >= bound))
    except Exception as e:
        logger.error(f"Error in check_at_least: {e}")
        return False


def spread(values):
    """max/min - 1 over a set of same-sign values"""
    values = np.abs(np.asarray(values, dtype=float))
    return float(values.max() / values.min() - 1.0)


def check_spread(values, tol):
    try:
        return spread(values) <= tol
    except Exception as e:
        logger.error(f"Error in check_spread: {e}")
        return False
