#!/usr/bin/env python3
"""
Tests for the cartan-dmft command line: exit codes and written files
"""
import json
import sys
import tempfile
from pathlib import Path

# Add the src directory to Python path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from cartan_dmft.cli import EXIT_CONFIG, EXIT_OK, main
from cartan_dmft.lie import AlgebraBasis


def _config(tmp, **values):
    path = Path(tmp) / 'run.json'
    path.write_text(json.dumps(values))
    return str(path)


def test_unknown_config_key_exits_4():
    print("Testing an unknown config key...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--config', _config(tmp, bogus=1), '--output', tmp, 'dmft'])
    assert code == EXIT_CONFIG, f"Exit code {code}"
    print("   ✓ Exit 4")


def test_bad_hamiltonian_exits_4():
    print("Testing malformed Hamiltonians...")
    for text in ("0.5*XQ", "0.5*XX + 0.5*XXX", "half*XX"):
        with tempfile.TemporaryDirectory() as tmp:
            code = main(['--output', tmp, 'decompose', '--hamiltonian', text])
        assert code == EXIT_CONFIG, f"{text!r}: exit code {code}"
    print("   ✓ Exit 4 for each")


def test_decompose_writes_algebra_and_solution():
    print("Testing decompose...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--config', _config(tmp, n_solutions=1), '--output', tmp, 'decompose'])
        out = Path(tmp)
        g_lines = [l for l in (out / 'algebra_g.txt').read_text().splitlines() if not l.startswith('#')]
        assert (out / 'solution_0.txt').exists()
        assert (out / 'results.json').exists()
    assert code == EXIT_OK, f"Exit code {code}"
    assert len(g_lines) == 24, f"dim g = {len(g_lines)}"
    print("   ✓ algebra_g.txt and solution_0.txt written")


def test_noninteracting_dmft():
    print("Testing dmft at U = 0...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--output', tmp, 'dmft', '--U', '0'])
        history = (Path(tmp) / 'dmft_U0.csv').read_text()
    assert code == EXIT_OK, f"Exit code {code}"
    assert history.startswith('# config_hash='), history[:40]
    print("   ✓ dmft_U0.csv written with its config hash")


def test_greens_writes_peaks():
    print("Testing greens...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--config', _config(tmp, n_solutions=1), '--output', tmp, 'greens'])
        out = Path(tmp)
        peaks = (out / 'peaks.csv').read_text().splitlines()
        written = sorted(p.name for p in out.glob('*.csv'))
    assert code == EXIT_OK, f"Exit code {code}"
    assert peaks[1] == 'omega1,omega2,found1,amp1_rel,amp2_rel', peaks[1]
    for name in ('series_high.csv', 'series_low.csv', 'spectrum_high.csv', 'spectrum_low.csv'):
        assert name in written, f"Missing {name}"
    print(f"   ✓ {len(written)} CSV files")


def test_phase_diagram_identical_across_jobs():
    """Worker count changes neither the exit code nor the CSV bytes"""
    print("Testing phase-diagram determinism...")
    results = []
    for jobs in ('1', '2'):
        with tempfile.TemporaryDirectory() as tmp:
            config = _config(tmp, n_solutions=1, max_iter=3)
            code = main(['--config', config, '--output', tmp, '--jobs', jobs,
                         'phase-diagram', '--U-list', '0,1'])
            results.append((code, (Path(tmp) / 'phase_diagram.csv').read_bytes()))
    assert results[0] == results[1], "Output depends on --jobs"
    print("   ✓ Byte-identical phase_diagram.csv")


def test_every_output_file_has_run_header():
    """Text dumps and the plotting script start with the config hash and seed"""
    print("Testing output headers...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--config', _config(tmp, n_solutions=1), '--output', tmp, '--seed', '7', 'decompose'])
        out = Path(tmp)
        texts = {p.name: p.read_text() for p in out.glob('*.txt')}
        basis = AlgebraBasis.loads(texts['algebra_h.txt'])
    assert code == EXIT_OK, f"Exit code {code}"
    assert 'solution_0.txt' in texts and 'algebra_g.txt' in texts
    for name, text in texts.items():
        assert text.startswith('# config_hash=') and ' seed=7\n' in text.splitlines(True)[0], \
            f"{name}: {text.splitlines()[0]}"
    assert len(basis) == 8, "Header line breaks the basis reader"

    with tempfile.TemporaryDirectory() as tmp:
        main(['--config', _config(tmp, n_solutions=1), '--output', tmp, 'greens'])
        script = (Path(tmp) / 'plot_results.py').read_text()
    assert script.startswith('# config_hash='), script[:40]
    print(f"   ✓ {len(texts)} text files and plot_results.py headed")


def test_greens_time_range_options():
    """--n-points sets the series length; an invalid value exits 4"""
    print("Testing greens time-range options...")
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--config', _config(tmp, n_solutions=1), '--output', tmp,
                     'greens', '--n-points', '96', '--rate-multiplier', '4'])
        rows = [l for l in (Path(tmp) / 'series_high.csv').read_text().splitlines()
                if not l.startswith('#')][1:]
    assert code == EXIT_OK, f"Exit code {code}"
    assert len(rows) == 96, f"{len(rows)} samples"
    with tempfile.TemporaryDirectory() as tmp:
        code = main(['--output', tmp, 'greens', '--n-points', '4'])
    assert code == EXIT_CONFIG, f"Exit code {code}"
    print("   ✓ 96 samples written; n_points=4 rejected")


ALL_TESTS = [test_unknown_config_key_exits_4, test_bad_hamiltonian_exits_4,
             test_decompose_writes_algebra_and_solution, test_noninteracting_dmft, test_greens_writes_peaks,
             test_phase_diagram_identical_across_jobs, test_every_output_file_has_run_header,
             test_greens_time_range_options]


if __name__ == '__main__':
    failed = 0
    for test in ALL_TESTS:
        try:
            test()
        except AssertionError as e:
            print(f"   ✗ {test.__name__}: {e}")
            failed += 1
    print(f"\n{len(ALL_TESTS) - failed}/{len(ALL_TESTS)} tests passed")
    sys.exit(0 if failed == 0 else 1)
