# src/cartan_dmft/__init__.py
from pathlib import Path

# Global configuration
OUTPUT_DIR = Path('results')

# Result store file name (inside the output directory)
DB_NAME = 'results.json'

# DMFT loop defaults
DEFAULT_V0 = 0.5
DEFAULT_TOLERANCE = 0.02
DEFAULT_MAX_ITER = 25
DEFAULT_SETTLE_STEPS = 3

# Measurement defaults
DEFAULT_SHOTS = 8192
DEFAULT_SOLUTIONS = 2
DEFAULT_TIME_POINTS = 150
DEFAULT_RATE_MULTIPLIER = 5.0
RATE_BAND = (3.0, 10.0)
DEFAULT_MAX_RERUNS = 3

# Noise defaults (mean two-qubit error of the reference device)
DEFAULT_CNOT_ERROR = 0.0079
DEFAULT_F_CNOT = 0.9921

# Spectral function broadening
DEFAULT_ETA = 0.2

# Version
__version__ = '1.0.0'
