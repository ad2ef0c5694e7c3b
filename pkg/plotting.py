import logging
from pathlib import Path

from results import LEDGER_FILE, RESULTS_FILE

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

PLOT_DIR = "plots"

# Scripts are standalone: they read the CSV/JSON next to them and need only matplotlib
CHECKS_SCRIPT = '''"""Pass/fail overview of {results}, one bar group per claim."""
import csv
import os
from collections import Counter

from matplotlib import pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def main():
    rows = load_rows(os.path.join(HERE, "..", "{results}"))
    counts = {{}}
    for row in rows:
        key = "diagnostic" if row["diagnostic"] == "true" else ("pass" if row["passed"] == "true" else "fail")
        counts.setdefault(row["claim"], Counter())[key] += 1
    claims = sorted(counts)
    fig, ax = plt.subplots(figsize=(10, 0.4 * len(claims) + 2))
    left = [0] * len(claims)
    for key, color in (("pass", "tab:green"), ("fail", "tab:red"), ("diagnostic", "tab:gray")):
        widths = [counts[c][key] for c in claims]
        ax.barh(claims, widths, left=left, color=color, label=key)
        left = [a + b for a, b in zip(left, widths)]
    ax.set_xlabel("checks")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "checks.png"), dpi=150)


if __name__ == "__main__":
    main()
'''

LEDGER_SCRIPT = '''"""Calibrated against printed constants from {ledger}."""
import json
import os

from matplotlib import pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    with open(os.path.join(HERE, "..", "{ledger}"), encoding="utf-8") as f:
        entries = json.load(f)
    fig, ax = plt.subplots(figsize=(8, 5))
    names = sorted({{e["name"] for e in entries}})
    for name in names:
        picked = [e for e in entries if e["name"] == name]
        ratios = [e["calibrated_constant"] / e["printed_constant"] for e in picked]
        ax.plot([e["n"] for e in picked], ratios, "o-", label=name)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("calibrated / printed")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "ledger.png"), dpi=150)


if __name__ == "__main__":
    main()
'''


def write_plot_scripts(out_dir):
    """plots/plot_checks.py and plots/plot_ledger.py next to the results"""
    plot_dir = Path(out_dir) / PLOT_DIR
    plot_dir.mkdir(parents=True, exist_ok=True)
    scripts = {
        "plot_checks.py": CHECKS_SCRIPT.format(results=RESULTS_FILE),
        "plot_ledger.py": LEDGER_SCRIPT.format(ledger=LEDGER_FILE),
    }
    paths = []
    for name, text in scripts.items():
        path = plot_dir / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    logger.info(f"Wrote {len(paths)} plot scripts to {plot_dir}")
    return paths
