"""
Result store for Cartan solutions, DMFT runs and phase-diagram rows.
Provides a unified interface for run persistence using TinyDB.
"""

import logging
import math
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional

from tinydb import Query, TinyDB
from tinydb.middlewares import CachingMiddleware
from tinydb.storages import JSONStorage

from .cartan import CartanSolution
from .dmft import DmftState, PhaseRow

logger = logging.getLogger(__name__)


def _finite_or_none(value: float) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


class ResultStore:
    """
    Database abstraction layer using TinyDB for JSON storage.
    Thread-safe; every write is flushed so separate instances see it.

    Records carry the config hash and seed instead of wall-clock times, so a
    rerun with the same configuration writes an identical file.
    """

    def __init__(self, db_path: str):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

        self.db = TinyDB(
            str(self.db_path),
            storage=CachingMiddleware(JSONStorage),
            indent=2,
            sort_keys=True
        )

        self._lock = threading.RLock()
        self._init_tables()

    def _init_tables(self):
        """Initialize all required tables."""
        self.cartan_solutions = self.db.table('cartan_solutions')
        self.dmft_runs = self.db.table('dmft_runs')
        self.phase_diagram = self.db.table('phase_diagram')
        self.meta = self.db.table('meta')

    def close(self):
        """Flush and close the database."""
        with self._lock:
            self.db.close()

    def _flush(self):
        self.db.storage.flush()

    # Run metadata
    def set_meta(self, config_hash: str, seed: int, command: str, **details) -> None:
        """Record (or replace) the metadata of a run."""
        with self._lock:
            Meta = Query()
            self.meta.upsert({'config_hash': config_hash, 'seed': seed, 'command': command,
                              'details': details},
                             (Meta.config_hash == config_hash) & (Meta.command == command))
            self._flush()

    def get_meta(self, config_hash: Optional[str] = None) -> List[Dict]:
        with self._lock:
            if config_hash is None:
                return self.meta.all()
            Meta = Query()
            return self.meta.search(Meta.config_hash == config_hash)

    # Cartan solutions
    def add_solution(self, solution: CartanSolution, U: float, V: float, config_hash: str) -> int:
        """Store a solution in its text form, replacing one with the same (U, V, hash, seed); returns the document id."""
        with self._lock:
            Solution = Query()
            doc_ids = self.cartan_solutions.upsert({
                'U': U,
                'V': V,
                'seed': solution.seed,
                'residual': solution.residual,
                'config_hash': config_hash,
                'text': solution.dumps()
            }, (Solution.U == U) & (Solution.V == V) & (Solution.config_hash == config_hash)
                & (Solution.seed == solution.seed))
            self._flush()
            return doc_ids[0]

    def get_solutions(self, U: Optional[float] = None, V: Optional[float] = None) -> List[Dict]:
        with self._lock:
            Solution = Query()
            if U is None and V is None:
                return self.cartan_solutions.all()
            condition = Solution.U.exists()
            if U is not None:
                condition &= Solution.U == U
            if V is not None:
                condition &= Solution.V == V
            return self.cartan_solutions.search(condition)

    # DMFT runs
    def add_dmft_run(self, state: DmftState, config_hash: str, seed: int) -> bool:
        """Store a DMFT history; an existing run with the same U and config hash is replaced."""
        with self._lock:
            try:
                Run = Query()
                self.dmft_runs.upsert({
                    'U': state.U,
                    'config_hash': config_hash,
                    'seed': seed,
                    'converged': state.converged,
                    'terminated_reason': state.terminated_reason,
                    'Z_final': _finite_or_none(state.z_final),
                    'history': [{
                        'iteration': r.iteration,
                        'V': r.V,
                        'omega1': r.omega1,
                        'omega2': r.omega2,
                        'Z': r.Z,
                        'V_new': _finite_or_none(r.V_new),
                        'found1': r.found1,
                        'z_clamped': r.z_clamped
                    } for r in state.history]
                }, (Run.U == state.U) & (Run.config_hash == config_hash))
                self._flush()
                return True
            except Exception as e:
                logger.error(f"Error storing DMFT run for U={state.U}: {e}")
                return False

    def get_dmft_runs(self, U: Optional[float] = None) -> List[Dict]:
        with self._lock:
            if U is None:
                return self.dmft_runs.all()
            Run = Query()
            return self.dmft_runs.search(Run.U == U)

    # Phase diagram
    def add_phase_rows(self, rows: List[PhaseRow], config_hash: str) -> int:
        """Replace the phase-diagram rows of ``config_hash``; returns the number stored."""
        with self._lock:
            Row = Query()
            self.phase_diagram.remove(Row.config_hash == config_hash)
            self.phase_diagram.insert_multiple([{
                'U': row.U,
                'Z_final': _finite_or_none(row.Z_final),
                'Z_exact': row.Z_exact,
                'iterations': row.iterations,
                'terminated_reason': row.terminated_reason,
                'error': row.error,
                'config_hash': config_hash
            } for row in rows])
            self._flush()
            return len(rows)

    def get_phase_rows(self, config_hash: Optional[str] = None) -> List[Dict[str, Any]]:
        with self._lock:
            Row = Query()
            rows = (self.phase_diagram.all() if config_hash is None
                    else self.phase_diagram.search(Row.config_hash == config_hash))
            return sorted(rows, key=lambda r: r['U'])

    def get_statistics(self) -> Dict[str, int]:
        """Document counts per table."""
        with self._lock:
            return {
                'cartan_solutions': len(self.cartan_solutions),
                'dmft_runs': len(self.dmft_runs),
                'phase_diagram': len(self.phase_diagram),
                'meta': len(self.meta)
            }
