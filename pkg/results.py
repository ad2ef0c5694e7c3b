import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
TIMINGS_FILE = "timings.csv"
LEDGER_FILE = "ledger.json"

PROVENANCE = ("closed-form", "cross-method", "refinement", "diagnostic")

# Column order of results.csv; wall_time lives in timings.csv so results stay byte-identical
COLUMNS = [
    "experiment", "check_id", "claim", "quantity", "value", "error", "reference",
    "provenance", "tolerance", "passed", "diagnostic", "seed",
]

### Claim registry ###

CLAIMS = {
    "kernel-basics": "Heat kernel, killed density and bridge sampler sanity",
    "confluent-wronskian": "Z_n = c * W_n with the calibrated constant; confluent limit of p*_n",
    "karlin-mcgregor-potential": "tilde-Z_n = det[Z(t, x_i, y_j)] for a smooth potential",
    "darboux-hierarchy": "u_n solve the coupled heat equations of the layer hierarchy",
    "s-evolution": "Evolution equation of the S_n fields",
    "gelfand-tsetlin": "det[d_x^{i-1} Z(t,x,y_j)] as a Gelfand-Tsetlin integral of S",
    "interlacing-integral": "Interlacing integral of det[f'_{i+1}(z_j)] reduces to det[f_i(y_j)]",
    "sylvester-chain": "T_n = W_{n-1}W_{n+1}/W_n^2 = d_xy log W_n",
    "rsk-symmetry": "u_n under the reflected potential mirrors u_n in y",
    "local-time-rayleigh": "Bridge-pair intersection local time is Rayleigh",
    "second-moment": "E[Z^2]/p^2 equals E exp(intersection local time)",
    "s-transform": "Noise-shifted lattice mean equals the smooth-potential solution",
    "flow-property": "Z(s+t) composes from Z(s) and the shifted-noise Z'(t)",
    "ratio-identity": "n = 2 ratio identity for the confluent lattice determinant",
    "line-ensemble": "Positivity of the lattice line-ensemble ratios",
    "lgv-polymer": "Multilayer polymer partition functions by path determinants",
}

# The identity each claim's rows verify, printed with the report
CLAIM_STATEMENTS = {
    "kernel-basics": "p(t,x,y) = exp(-(x-y)^2/2t)/sqrt(2 pi t); p*_n(t,x,y) = det[p(t,x_i,y_j)]",
    "confluent-wronskian": "Z_n(t,x,y) = c_{n,t} W_n, c_{n-1,t} c_{n+1,t}/c_{n,t}^2 = n t",
    "karlin-mcgregor-potential": "tilde-Z_n(t,x,y) = det[Z(t,x_i,y_j)] = p*_n E[exp(sum_i int phi(s,X_i(s)) ds)]",
    "darboux-hierarchy": "d_t u_n = 1/2 d_y^2 u_n + [phi + d_y^2 log(Z_{n-1}/p^{n-1})] u_n",
    "s-evolution": "d_t S_n = 1/2 d_y^2 S_n + d_y[S_n d_y log u_n]",
    "gelfand-tsetlin": "det[d_x^{i-1} Z(t,x,y_j)] = prod_i Z(t,x,y_i) int_{GT(y)} prod_k prod_i S_k",
    "interlacing-integral": "int_{z interlacing y} det[f'_{i+1}(z_j)] dz = det[f_i(y_j)]",
    "sylvester-chain": "T_n = W_{n-1} W_{n+1}/W_n^2 = d_xy log W_n",
    "rsk-symmetry": "u_n^{phi(s,-y)}(t,0,x) = u_n^{phi}(t,0,-x)",
    "local-time-rayleigh": "sqrt(2) L for a standard bridge pair has P(R > r) = exp(-r^2/2)",
    "second-moment": "E[Z(t,x,y)^2]/p(t,x,y)^2 = E exp(L_t) over two independent bridges",
    "s-transform": "E[Z^{xi + phi}] = Z^phi for the shifted lattice noise",
    "flow-property": "Z(s+t,x,y) = int Z(s,x,z) Z'(t,z,y) dz with Z' on the shifted noise",
    "ratio-identity": "hatZ_2(x,(y1,y2))/(Z(y1)Z(y2)) = (y1-y2)^{-1} int_{y2}^{y1} hatZ_2(x,(z,z))/Z(z)^2 dz",
    "line-ensemble": "U_n = hatZ_n/hatZ_{n-1} > 0 on the trust region",
    "lgv-polymer": "Z_n^N(t) = det[Z_1 between starts i and ends j], X_n^N = log(Z_n^N/Z_{n-1}^N)",
}

SUITE_CLAIMS = {
    "calibrate": ["confluent-wronskian", "interlacing-integral", "sylvester-chain"],
    "smooth-suite": ["kernel-basics", "confluent-wronskian", "darboux-hierarchy", "s-evolution",
                     "gelfand-tsetlin", "rsk-symmetry"],
    "bridges-suite": ["kernel-basics", "confluent-wronskian", "karlin-mcgregor-potential",
                      "local-time-rayleigh", "second-moment"],
    "lattice-suite": ["kernel-basics", "karlin-mcgregor-potential", "s-transform", "flow-property",
                      "ratio-identity", "line-ensemble"],
    "polymer-suite": ["lgv-polymer"],
}


@dataclass
class ResultRow:
    experiment: str
    check_id: str
    claim: str
    quantity: str
    value: float
    error: float = None
    reference: float = None
    provenance: str = "closed-form"
    tolerance: float = None
    passed: bool = False
    diagnostic: bool = False
    seed: int = None
    wall_time: float = 0.0

    def __post_init__(self):
        if self.claim not in CLAIMS:
            raise ValueError(f"Unknown claim '{self.claim}'")
        if self.provenance not in PROVENANCE:
            raise ValueError(f"Unknown provenance '{self.provenance}'")
        self.passed = bool(self.passed)

    @property
    def failing(self):
        return not self.passed and not self.diagnostic

    def to_csv(self):
        return {name: _format(getattr(self, name)) for name in COLUMNS}


def _format(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def _parse(name, text):
    if text == "":
        return None
    if name in ("passed", "diagnostic"):
        return text == "true"
    if name == "seed":
        return int(text)
    if name in ("value", "error", "reference", "tolerance"):
        return float(text)
    return text


def missing_claims(experiment, rows):
    """Claims the suite covers with no row written"""
    seen = {row.claim for row in rows}
    return [c for c in SUITE_CLAIMS.get(experiment, []) if c not in seen]


### Writers ###

def write_results(rows, out_dir):
    path = Path(out_dir) / RESULTS_FILE
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_csv())
    logger.info(f"Wrote {len(rows)} result rows to {path}")
    return path


def write_timings(rows, out_dir):
    path = Path(out_dir) / TIMINGS_FILE
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["experiment", "check_id", "wall_time"])
        for row in rows:
            writer.writerow([row.experiment, row.check_id, f"{row.wall_time:.3f}"])
    return path


def write_ledger(entries, out_dir):
    """ledger.json: name, n, t, printed and calibrated values, sign, probe count, note"""
    path = Path(out_dir) / LEDGER_FILE
    payload = [
        {
            "name": e.name,
            "n": int(e.n),
            "t": float(e.t),
            "printed_constant": float(e.printed_constant),
            "calibrated_constant": float(e.calibrated_constant),
            "orientation_sign": int(e.orientation_sign),
            "probe_count": int(e.probe_count),
            "note": e.note,
        }
        for e in entries
    ]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(payload)} ledger entries to {path}")
    return path


### Reading and summary ###

def load_results(in_dir):
    path = Path(in_dir) / RESULTS_FILE
    if not path.is_file():
        raise FileNotFoundError(f"No {RESULTS_FILE} in {in_dir}")
    rows = []
    with path.open("r", newline="", encoding="utf-8") as f:
        for record in csv.DictReader(f):
            rows.append(ResultRow(**{name: _parse(name, record[name]) for name in COLUMNS}))
    return rows


@dataclass
class Summary:
    rows: list
    failing: list = field(default_factory=list)
    by_claim: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failing

    def render(self):
        lines = []
        if self.failing:
            lines.append(f"FAILING ({len(self.failing)}):")
            lines.extend(f"  {row.check_id}  [{row.claim}]  {row.quantity} = {row.value!r}"
                         f" (reference {row.reference!r}, tolerance {row.tolerance!r})"
                         for row in self.failing)
            lines.append("")
        lines.append(f"{'claim':<28}{'pass':>6}{'fail':>6}{'diag':>6}")
        for claim, counts in self.by_claim.items():
            lines.append(f"{claim:<28}{counts['pass']:>6}{counts['fail']:>6}{counts['diag']:>6}")
        lines.append("")
        for claim in self.by_claim:
            lines.append(f"{claim:<28}{CLAIM_STATEMENTS[claim]}")
        lines.append("")
        lines.append(f"{len(self.rows)} checks, {len(self.failing)} failing")
        return "\n".join(lines)


def summarize(rows):
    counts = defaultdict(lambda: {"pass": 0, "fail": 0, "diag": 0})
    for row in rows:
        key = "diag" if row.diagnostic else ("pass" if row.passed else "fail")
        counts[row.claim][key] += 1
    ordered = {claim: counts[claim] for claim in CLAIMS if claim in counts}
    return Summary(rows=list(rows), failing=[r for r in rows if r.failing], by_claim=ordered)


def report(in_dir):
    """Summary of a results directory; raises FileNotFoundError when results are missing"""
    summary = summarize(load_results(in_dir))
    logger.info(f"Report for {in_dir}: {len(summary.rows)} checks, {len(summary.failing)} failing")
    return summary
