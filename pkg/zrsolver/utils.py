import json
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

logging.basicConfig(format="%(asctime)s - %(message)s", level=logging.INFO)

CSV_FORMAT = "%.16e"


def convergence_rates(errors: Sequence[float]) -> List[float]:
    """
    Observed orders log2(e_k / e_{k+1}) for a ladder halving the step each time.
    The first entry is NaN (no coarser level).

    Args:
        errors (Sequence[float]): Errors ordered from coarsest to finest.

    Returns:
        List[float]: One rate per error.
    """
    rates = [float("nan")]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        if coarse > 0 and fine > 0:
            rates.append(float(np.log2(coarse / fine)))
        else:
            rates.append(float("nan"))
    return rates


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(path: str, header: Sequence[str], rows) -> str:
    """Numeric table with a header line, comma separated, 17 significant digits."""
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        data = data.reshape(0, len(header))
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")
    logging.info(f"Wrote {data.shape[0]} rows to {path}")
    return path


def write_table(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Mixed text/number table; numbers use the same format as write_csv."""

    def fmt(value) -> str:
        if isinstance(value, (float, np.floating)):
            return CSV_FORMAT % value
        return str(value)

    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")
    logging.info(f"Wrote {len(rows)} rows to {path}")
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path: str, payload: Dict) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


_INVARIANTS_GP = """set datafile separator ","
set key autotitle columnhead
set xlabel "t"
set ylabel "relative drift"
set logscale y
set format y "%.0e"
set terminal pngcairo size 1000,600
set output "invariants.png"
plot for [col in "rel_drift_mass rel_drift_energyQ rel_drift_hamiltonian"] \\
    "invariants.csv" using "t":(column(col) > 0 ? column(col) : 1e-18) with lines title col
"""

_SNAPSHOTS_GP = """set datafile separator ","
set xlabel "x"
set ylabel "t"
set zlabel "|B|"
set hidden3d
set terminal pngcairo size 1000,700
set output "snapshots_absB.png"
splot "snapshots.csv" using "x":"t":"abs_B" with lines notitle
set output "snapshots_rho.png"
set zlabel "rho"
splot "snapshots.csv" using "x":"t":"rho" with lines notitle
set output "snapshots_u.png"
set zlabel "u"
splot "snapshots.csv" using "x":"t":"u" with lines notitle
"""

_CONVERGENCE_GP = """set datafile separator ","
set key autotitle columnhead
set logscale xy
set format y "%.0e"
set xlabel "{step}"
set ylabel "max-norm error"
set terminal pngcairo size 800,600
set output "{stem}.png"
plot "{table}" using "{step}":"e_B" with linespoints title "e_B", \\
     "{table}" using "{step}":"e_rho" with linespoints title "e_rho", \\
     "{table}" using "{step}":"e_u" with linespoints title "e_u"
"""


def emit_plot_scripts(out_dir: str, kind: str, table: Optional[str] = None, step: str = "tau") -> List[str]:
    """
    Writes gnuplot scripts next to the data files of a run.

    Args:
        out_dir (str): Output directory holding the CSV files.
        kind (str): "run" (invariants and snapshots) or "convergence".
        table (str): Convergence table file name, for kind "convergence".
        step (str): Column used on the x axis, "tau" or "h".
    """
    written = []
    if kind == "run":
        for name, body in (("invariants.gp", _INVARIANTS_GP), ("snapshots.gp", _SNAPSHOTS_GP)):
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8") as f:
                f.write(body)
            written.append(path)
    elif kind == "convergence":
        if table is None:
            raise ValueError("table must be given for convergence plot scripts")
        stem = os.path.splitext(table)[0]
        path = os.path.join(out_dir, "convergence.gp")
        with open(path, "w", encoding="utf-8") as f:
            f.write(_CONVERGENCE_GP.format(step=step, stem=stem, table=table))
        written.append(path)
    else:
        raise ValueError("kind must be 'run' or 'convergence'")
    logging.info(f"Wrote plot scripts {written}")
    return written
