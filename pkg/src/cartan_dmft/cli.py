#!/usr/bin/env python3
"""
Command-line front end: algebra decomposition, Green's-function measurement,
the DMFT loop, the phase-diagram sweep and the Trotter comparison.

Exit codes: 0 success, 2 convergence failure, 3 detection failure, 4 config error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from . import DB_NAME, __version__
from .cartan import CartanSolveError, derive_seed, solve_randomized
from .circuit import cnot_report
from .config import ConfigError, RunConfig, load_config
from .database import ResultStore
from .dmft import (MAX_ITER, InvalidGeometry, dmft_iterate, initial_estimate, measure_peaks,
                   phase_diagram, spectral_function)
from .lie import ClosureCapError, decompose
from .output import (write_dmft_history, write_landscape, write_peaks, write_phase_diagram,
                     write_plot_script, write_series, write_spectral_function, write_spectrum, write_text)
from .pauli import AimParameters, PauliSum, jw_aim_hamiltonian
from .spectral import PeakNotFound
from .trotter import cartan_reference, fidelity_landscape, select_norm_convention
from .validation import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONVERGENCE = 2
EXIT_DETECTION = 3
EXIT_CONFIG = 4


def setup_logging(log_file: Optional[str] = None, verbose: bool = False) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )


def _parse_u_list(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigError(f"Invalid U list {text!r}")


def _overrides(args: argparse.Namespace) -> Dict:
    overrides = {
        'seed': args.seed,
        'jobs': args.jobs,
        'output_dir': args.output,
        'U': getattr(args, 'U', None),
        'V': getattr(args, 'V', None),
        'U_list': _parse_u_list(getattr(args, 'U_list', None)),
        'n_points': getattr(args, 'n_points', None),
        'rate_multiplier': getattr(args, 'rate_multiplier', None),
    }
    if args.noise:
        overrides['noise'] = True
    if args.shots is not None:
        overrides['shots'] = args.shots
        overrides['exact'] = False
    if args.exact:
        overrides['exact'] = True
    return overrides


def _open_store(config: RunConfig) -> ResultStore:
    return ResultStore(str(config.output_path / DB_NAME))


def cmd_decompose(config: RunConfig, args: argparse.Namespace) -> int:
    """Closure, involution split, Cartan subalgebra, k partition and Cartan solves."""
    if args.hamiltonian:
        try:
            hamiltonian = PauliSum.parse(args.hamiltonian)
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"Invalid Hamiltonian: {e}") from e
        logger.info(f"Decomposing a user-supplied {hamiltonian.n}-qubit Hamiltonian")
    else:
        hamiltonian = jw_aim_hamiltonian(AimParameters.half_filled(config.U, config.V))
    decomposition = decompose(hamiltonian)
    out = config.output_path
    for basis in decomposition.bases():
        write_text(out / f"algebra_{basis.role}.txt", basis.dumps(), config.config_hash(), config.seed)
    print(f"dim g = {len(decomposition.g)}")
    print(f"dim k = {len(decomposition.k)}, dim m = {len(decomposition.m)}, dim h = {len(decomposition.h)}")

    if len(decomposition.k) == 0:
        print("k is empty; exp(-itH) is already a product of commuting exponentials")
        return EXIT_OK

    solutions = solve_randomized(hamiltonian, decomposition, config.n_solutions, config.seed)
    store = _open_store(config)
    try:
        store.set_meta(config.config_hash(), config.seed, 'decompose')
        for i, solution in enumerate(solutions):
            write_text(out / f"solution_{i}.txt", solution.dumps(), config.config_hash(), config.seed)
            store.add_solution(solution, config.U, config.V, config.config_hash())
            print(f"solution {i}: residual {solution.residual:.3e}")
    finally:
        store.close()
    return EXIT_OK


def cmd_greens(config: RunConfig, args: argparse.Namespace) -> int:
    """Two-rate series, spectra and detected peaks at fixed (U, V)."""
    U, V = config.U, config.V
    decomposition = decompose(jw_aim_hamiltonian(AimParameters.half_filled(U, V)))
    measurement = measure_peaks(U, V, decomposition, config.measurement(), initial_estimate(U, V),
                                derive_seed(config.seed, 1))
    out, digest = config.output_path, config.config_hash()
    for tag, series in measurement.series.items():
        write_series(out, series, digest, config.seed)
    for tag, spec in measurement.spectra.items():
        write_spectrum(out, spec, tag, digest, config.seed)
    write_peaks(out, measurement.peaks, digest, config.seed)
    write_plot_script(out, digest, config.seed)

    report = cnot_report(measurement.solutions[0], measurement.theta_gs)
    peaks = measurement.peaks
    print(f"omega2 = {peaks.omega2:.6f}")
    if not peaks.found1:
        print("omega1 not found")
        return EXIT_DETECTION
    print(f"omega1 = {peaks.omega1:.6f}")
    print(f"CNOTs: {report.all_to_all} raw, {report.optimized} optimized, "
          f"{report.linear} on the linear chain (reference {report.reference})")
    return EXIT_OK


def _write_run(config: RunConfig, state, store: ResultStore) -> None:
    out, digest = config.output_path, config.config_hash()
    write_dmft_history(out, state, digest, config.seed)
    model = state.final_model()
    if model is not None:
        omega, curve = spectral_function(model, config.eta)
        write_spectral_function(out, state.U, omega, curve, digest, config.seed)
    store.add_dmft_run(state, digest, config.seed)


def cmd_dmft(config: RunConfig, args: argparse.Namespace) -> int:
    """DMFT loop at a single U."""
    state = dmft_iterate(config.U, config.V0, config.tolerance, config.max_iter, config.measurement(),
                         config.settle_steps, config.mixing)
    store = _open_store(config)
    try:
        store.set_meta(config.config_hash(), config.seed, 'dmft')
        _write_run(config, state, store)
    finally:
        store.close()
    write_plot_script(config.output_path, config.config_hash(), config.seed)
    print(f"U = {state.U}: {state.terminated_reason} after {state.iterations} iterations, "
          f"V = {state.V:.6f}, Z_final = {state.z_final:.6f}")
    return EXIT_CONVERGENCE if state.terminated_reason == MAX_ITER else EXIT_OK


def cmd_phase_diagram(config: RunConfig, args: argparse.Namespace) -> int:
    """DMFT sweep over U against the exact self-consistent weight."""
    rows = phase_diagram(config.U_list, config.measurement(), config.jobs, config.V0, config.tolerance,
                         config.max_iter, config.settle_steps, config.mixing)
    digest = config.config_hash()
    store = _open_store(config)
    try:
        store.set_meta(digest, config.seed, 'phase-diagram')
        for row in rows:
            if row.state is not None:
                _write_run(config, row.state, store)
        store.add_phase_rows(rows, digest)
    finally:
        store.close()
    write_phase_diagram(config.output_path, rows, digest, config.seed)
    write_plot_script(config.output_path, config.config_hash(), config.seed)

    print(f"{'U':>6} {'Z_final':>10} {'Z_exact':>10} {'iter':>5}  reason")
    for row in rows:
        print(f"{row.U:6.2f} {row.Z_final:10.5f} {row.Z_exact:10.5f} {row.iterations:5d}  {row.terminated_reason}")
    failed = [row for row in rows if row.error is not None or row.terminated_reason == MAX_ITER]
    return EXIT_CONVERGENCE if failed else EXIT_OK


def cmd_trotter(config: RunConfig, args: argparse.Namespace) -> int:
    """Trotter error fit, fidelity landscape and the fixed-depth reference."""
    U, V = config.trotter_U, config.trotter_V
    chosen, fits = select_norm_convention(U, V, config.t_grid, config.r_grid)
    landscape = fidelity_landscape(U, V, config.t_grid, config.landscape_r, config.f_cnot, chosen.coefficient)
    write_landscape(config.output_path, landscape, config.config_hash(), config.seed)
    write_plot_script(config.output_path, config.config_hash(), config.seed)
    for flag, fit in sorted(fits.items()):
        print(f"{'normalized' if flag else 'unnormalized'} Frobenius fit: c = {fit.coefficient:.4f}")
    print(f"selected c = {chosen.coefficient:.4f}")
    print(f"fixed-depth reference F_runtime = {cartan_reference(config.f_cnot):.4f} "
          f"(band {landscape.cartan_band[0]:.2f}-{landscape.cartan_band[1]:.3f})")
    for point in landscape.curve:
        print(f"t = {point.t:g}: F_max = {point.f_max:.4f} at r = {point.r_opt}")
    return EXIT_OK


COMMANDS = {
    'decompose': cmd_decompose,
    'greens': cmd_greens,
    'dmft': cmd_dmft,
    'phase-diagram': cmd_phase_diagram,
    'trotter': cmd_trotter,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='cartan-dmft',
                                     description='Cartan fast-forwarded two-site DMFT')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', help='JSON config file')
    parser.add_argument('--output', help='Output directory (default: results)')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--jobs', type=int, help='Parallel workers for the phase diagram')
    parser.add_argument('--noise', action='store_true', help='Enable the depolarizing and readout noise model')
    parser.add_argument('--shots', type=int, help='Shots per circuit (implies sampled expectations)')
    parser.add_argument('--exact', action='store_true', help='Exact expectations (no shot sampling)')
    parser.add_argument('--log-file', help='Also write the log to this file')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')

    sub = parser.add_subparsers(dest='command', required=True)
    p = sub.add_parser('decompose', help='Generate the algebra and Cartan solutions')
    p.add_argument('--U', type=float)
    p.add_argument('--V', type=float)
    p.add_argument('--hamiltonian', help='Pauli sum such as "0.5*XXII + 0.5*YYII + 0.5*ZIZI"')

    p = sub.add_parser('greens', help='Measure the two-rate Green\'s function and its peaks')
    p.add_argument('--U', type=float)
    p.add_argument('--V', type=float)
    p.add_argument('--n-points', dest='n_points', type=int,
                   help='Samples per series; the time range is n_points * dt')
    p.add_argument('--rate-multiplier', dest='rate_multiplier', type=float,
                   help='Sampling rate over the tracked frequency; dt = 2 pi / (multiplier * omega)')

    p = sub.add_parser('dmft', help='Run the DMFT loop at one U')
    p.add_argument('--U', type=float)

    p = sub.add_parser('phase-diagram', help='Sweep the DMFT loop over U')
    p.add_argument('--U-list', dest='U_list', help='Comma-separated U values')

    sub.add_parser('trotter', help='Trotter error fit and fidelity landscape')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_file, args.verbose)
    try:
        config = load_config(args.config, _overrides(args))
        logger.info(f"{args.command}: config hash {config.config_hash()}")
        return COMMANDS[args.command](config, args)
    except (ConfigError, ValidationError, ClosureCapError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except PeakNotFound as e:
        logger.error(f"Detection failed: {e}")
        return EXIT_DETECTION
    except (InvalidGeometry, CartanSolveError) as e:
        logger.error(f"Convergence failed: {e}")
        return EXIT_CONVERGENCE


if __name__ == '__main__':
    sys.exit(main())
