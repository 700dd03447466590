"""
Plot-ready output. Every file starts with a ``# config_hash=<hex> seed=<n>``
line; floats are written with 17 significant digits.
"""

import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .dmft import DmftState, PhaseRow
from .spectral import GreensSeries, PeakPair, Spectrum
from .trotter import Landscape

logger = logging.getLogger(__name__)

PLOT_SCRIPT = 'plot_results.py'


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return '' if value is None else str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], config_hash: str, seed: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        f.write(run_header(config_hash, seed))
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path


def write_series(out_dir: Path, series: GreensSeries, config_hash: str, seed: int) -> Path:
    return write_csv(Path(out_dir) / f"series_{series.rate_tag}.csv", ('t', 'iG'),
                     zip(series.times, series.values), config_hash, seed)


def write_spectrum(out_dir: Path, spec: Spectrum, rate_tag: str, config_hash: str, seed: int) -> Path:
    return write_csv(Path(out_dir) / f"spectrum_{rate_tag}.csv", ('omega', 'magnitude'),
                     zip(spec.frequencies, spec.magnitudes), config_hash, seed)


def write_peaks(out_dir: Path, peaks: PeakPair, config_hash: str, seed: int) -> Path:
    return write_csv(Path(out_dir) / 'peaks.csv', ('omega1', 'omega2', 'found1', 'amp1_rel', 'amp2_rel'),
                     [(peaks.omega1, peaks.omega2, peaks.found1, peaks.amp1_rel, peaks.amp2_rel)],
                     config_hash, seed)


def _u_tag(U: float) -> str:
    return format(U, 'g')


def write_dmft_history(out_dir: Path, state: DmftState, config_hash: str, seed: int) -> Path:
    rows = [(r.iteration, r.V, r.omega1, r.omega2, r.Z, r.V_new, r.found1, r.z_clamped) for r in state.history]
    return write_csv(Path(out_dir) / f"dmft_U{_u_tag(state.U)}.csv",
                     ('iteration', 'V', 'omega1', 'omega2', 'Z', 'V_new', 'found1', 'z_clamped'),
                     rows, config_hash, seed)


def write_phase_diagram(out_dir: Path, rows: List[PhaseRow], config_hash: str, seed: int) -> Path:
    return write_csv(Path(out_dir) / 'phase_diagram.csv',
                     ('U', 'Z_final', 'Z_exact', 'iterations', 'terminated_reason'),
                     [(r.U, r.Z_final, r.Z_exact, r.iterations, r.terminated_reason) for r in rows],
                     config_hash, seed)


def write_spectral_function(out_dir: Path, U: float, omega: np.ndarray, curve: np.ndarray,
                            config_hash: str, seed: int) -> Path:
    return write_csv(Path(out_dir) / f"spectral_function_U{_u_tag(U)}.csv", ('omega', 'A'),
                     zip(omega, curve), config_hash, seed)


def write_landscape(out_dir: Path, landscape: Landscape, config_hash: str, seed: int) -> List[Path]:
    grid = write_csv(Path(out_dir) / 'landscape.csv', ('t', 'r', 'F_trotter', 'F_runtime', 'F_total'),
                     [(r.t, r.r, r.f_trotter, r.f_runtime, r.f_total) for r in landscape.rows],
                     config_hash, seed)
    curve = write_csv(Path(out_dir) / 'fidelity_curve.csv', ('t', 'F_max', 'r_opt'),
                      [(p.t, p.f_max, p.r_opt) for p in landscape.curve], config_hash, seed)
    return [grid, curve]


def run_header(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}\n"


def write_text(path: Path, text: str, config_hash: str, seed: int) -> Path:
    """Write ``text`` below the run header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(run_header(config_hash, seed) + text, encoding='utf-8')
    logger.debug(f"Wrote {path}")
    return path


_PLOT_STUB = '''"""Plot the CSV files in this directory. Requires matplotlib."""

import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt


def read(path):
    with open(path) as f:
        rows = [line for line in f if not line.startswith('#')]
    reader = csv.reader(rows)
    header = next(reader)
    columns = list(zip(*[[float(v) if v not in ('true', 'false', '') else v for v in row] for row in reader]))
    return dict(zip(header, columns))


def main(directory='.'):
    here = Path(directory)
    for name, x, y in (('series_high.csv', 't', 'iG'), ('series_low.csv', 't', 'iG'),
                       ('spectrum_high.csv', 'omega', 'magnitude'), ('spectrum_low.csv', 'omega', 'magnitude'),
                       ('fidelity_curve.csv', 't', 'F_max')):
        if (here / name).exists():
            data = read(here / name)
            plt.figure()
            plt.plot(data[x], data[y])
            plt.xlabel(x)
            plt.ylabel(y)
            plt.title(name)
    if (here / 'phase_diagram.csv').exists():
        data = read(here / 'phase_diagram.csv')
        plt.figure()
        plt.plot(data['U'], data['Z_exact'], 'k-', label='exact')
        plt.plot(data['U'], data['Z_final'], 'o', label='DMFT')
        plt.xlabel('U')
        plt.ylabel('Z')
        plt.legend()
    for path in sorted(here.glob('spectral_function_U*.csv')):
        data = read(path)
        plt.figure()
        plt.plot(data['omega'], data['A'])
        plt.title(path.name)
    plt.show()


if __name__ == '__main__':
    main(*sys.argv[1:])
'''


def write_plot_script(out_dir: Path, config_hash: str, seed: int) -> Path:
    return write_text(Path(out_dir) / PLOT_SCRIPT, _PLOT_STUB, config_hash, seed)
