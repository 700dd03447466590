"""
Input validation for run parameters of the Cartan DMFT pipeline.
"""

import math
import re
import logging
from typing import List, Optional, Sequence

logger = logging.getLogger(__name__)


class ValidationError(Exception):
    """Custom exception for validation errors."""
    pass


class InputValidator:
    """Validates and normalizes numeric and textual run parameters."""

    # Pauli label pattern (qubit 0 leftmost)
    PAULI_LABEL_PATTERN = re.compile(r'^[IXYZ]+$')

    # Largest seed accepted by numpy's SeedSequence-based generators
    MAX_SEED = 2 ** 64 - 1

    @staticmethod
    def validate_integer(value, min_val: int = None, max_val: int = None) -> int:
        """Validate an integer value."""
        if isinstance(value, bool):
            raise ValidationError("Invalid integer value")
        try:
            if isinstance(value, str):
                value = value.strip()
            int_val = int(value)
        except (ValueError, TypeError):
            raise ValidationError("Invalid integer value")

        if isinstance(value, float) and int_val != value:
            raise ValidationError("Invalid integer value")

        if min_val is not None and int_val < min_val:
            raise ValidationError(f"Value must be at least {min_val}")

        if max_val is not None and int_val > max_val:
            raise ValidationError(f"Value must be at most {max_val}")

        return int_val

    @staticmethod
    def validate_float(value, name: str = "Value", min_val: float = None,
                       max_val: float = None, allow_min: bool = True) -> float:
        """Validate a finite real number within optional bounds."""
        if isinstance(value, bool):
            raise ValidationError(f"{name} must be a number")
        try:
            if isinstance(value, str):
                value = value.strip()
            float_val = float(value)
        except (ValueError, TypeError):
            raise ValidationError(f"{name} must be a number")

        if not math.isfinite(float_val):
            raise ValidationError(f"{name} must be finite")

        if min_val is not None:
            if float_val < min_val or (not allow_min and float_val == min_val):
                relation = "at least" if allow_min else "greater than"
                raise ValidationError(f"{name} must be {relation} {min_val}")

        if max_val is not None and float_val > max_val:
            raise ValidationError(f"{name} must be at most {max_val}")

        return float_val

    @staticmethod
    def validate_probability(value, name: str = "Probability") -> float:
        """Validate a probability in [0, 1]."""
        return InputValidator.validate_float(value, name, 0.0, 1.0)

    @staticmethod
    def validate_bath_sites(n_bath) -> int:
        """Validate the number of bath sites of the impurity model."""
        try:
            return InputValidator.validate_integer(n_bath, min_val=1)
        except ValidationError:
            raise ValidationError("The impurity model needs at least one bath site")

    @staticmethod
    def validate_interaction(U) -> float:
        """Validate the on-site interaction strength."""
        return InputValidator.validate_float(U, "Interaction U", min_val=0.0)

    @staticmethod
    def validate_hybridization(V, allow_zero: bool = False) -> float:
        """Validate a hybridization strength."""
        value = InputValidator.validate_float(V, "Hybridization V", min_val=0.0, allow_min=allow_zero)
        return value

    @staticmethod
    def validate_u_list(values: Sequence) -> List[float]:
        """Validate a list of interaction strengths, dropping duplicates."""
        if isinstance(values, (str, bytes)) or not isinstance(values, (list, tuple)):
            raise ValidationError("U values must be a list")

        if not values:
            raise ValidationError("At least one U value must be given")

        # Remove duplicates while preserving order
        seen = set()
        unique = []
        for value in values:
            u = InputValidator.validate_interaction(value)
            if u not in seen:
                seen.add(u)
                unique.append(u)

        return unique

    @staticmethod
    def validate_seed(seed) -> int:
        """Validate a 64-bit non-negative seed."""
        try:
            return InputValidator.validate_integer(seed, 0, InputValidator.MAX_SEED)
        except ValidationError:
            raise ValidationError("Seed must be an integer in [0, 2^64)")

    @staticmethod
    def validate_shots(shots) -> Optional[int]:
        """Validate a shot budget; None selects exact expectations."""
        if shots is None:
            return None
        try:
            return InputValidator.validate_integer(shots, min_val=1)
        except ValidationError:
            raise ValidationError("Shot count must be a positive integer")

    @staticmethod
    def validate_rate_multiplier(multiplier, band=(3.0, 10.0)) -> float:
        """Validate a sampling-rate multiplier inside the allowed band."""
        return InputValidator.validate_float(multiplier, "Rate multiplier", band[0], band[1])

    @staticmethod
    def validate_layout(layout: str) -> str:
        """Validate a qubit-connectivity layout name."""
        valid_layouts = ['all-to-all', 'linear']

        if not isinstance(layout, str):
            raise ValidationError("Layout must be a string")

        layout = layout.strip().lower()

        if layout not in valid_layouts:
            raise ValidationError(f"Invalid layout. Must be one of: {', '.join(valid_layouts)}")

        return layout

    @staticmethod
    def validate_pauli_label(label: str, n_qubits: int = None) -> str:
        """Validate a Pauli string label such as 'XXIZ'."""
        if not isinstance(label, str):
            raise ValidationError("Pauli label must be a string")

        label = label.strip().upper()

        if not InputValidator.PAULI_LABEL_PATTERN.match(label):
            raise ValidationError(f"Invalid Pauli label {label!r}")

        if n_qubits is not None and len(label) != n_qubits:
            raise ValidationError(f"Pauli label {label!r} does not act on {n_qubits} qubits")

        return label
