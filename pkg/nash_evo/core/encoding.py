"""
encoding.py
Base-10 chromosome encoding of real strategy vectors.

Each variable takes 1 + magnitude_digits digits: a sign digit (0-4 positive,
5-9 negative) followed by the magnitude, with the decimal point after
decimal_position magnitude digits. Example with (3, 1): [2, 1, 5, 0] -> +1.50.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nash_evo.core.errors import EncodingRangeError

# A chromosome is a 1-D int8 array of digits 0..9.
Chromosome = np.ndarray


@dataclass(frozen=True)
class EncodingScheme:
    magnitude_digits: int
    decimal_position: int
    variable_count: int
    player_slices: tuple[slice, ...] = ()

    def __post_init__(self):
        if not 1 <= self.magnitude_digits <= 15:
            # beyond 15 digits the integer magnitude no longer maps exactly onto a float
            raise ValueError("magnitude_digits must lie in 1..15")
        if not 0 <= self.decimal_position <= self.magnitude_digits:
            raise ValueError(f"decimal_position must lie in 0..{self.magnitude_digits}")
        if self.variable_count < 0:
            raise ValueError("variable_count must be >= 0")
        slices = self.player_slices or (slice(0, self.variable_count),)
        expected = 0
        for s in slices:
            if s.start != expected or s.stop < s.start:
                raise ValueError(f"player slices must partition 0..{self.variable_count} without gaps")
            expected = s.stop
        if expected != self.variable_count:
            raise ValueError(f"player slices cover 0..{expected}, expected 0..{self.variable_count}")
        object.__setattr__(self, "player_slices", tuple(slices))

    @property
    def digits_per_variable(self) -> int:
        return 1 + self.magnitude_digits

    @property
    def length(self) -> int:
        return self.variable_count * self.digits_per_variable

    @property
    def step(self) -> float:
        """Quantization step 10^(decimal_position - magnitude_digits)."""
        return 1.0 / self._scale

    @property
    def max_magnitude(self) -> float:
        return (10 ** self.magnitude_digits - 1) / self._scale

    @property
    def _scale(self) -> int:
        return 10 ** (self.magnitude_digits - self.decimal_position)

    def gene_slice(self, variables: slice) -> slice:
        """Digit positions holding the given range of variables."""
        d = self.digits_per_variable
        return slice(variables.start * d, variables.stop * d)

    def player_genes(self, player: int) -> slice:
        return self.gene_slice(self.player_slices[player])


def validate_chromosome(chromosome: Chromosome, scheme: EncodingScheme):
    if chromosome.shape != (scheme.length,):
        raise ValueError(f"chromosome has {chromosome.size} digits, scheme needs {scheme.length}")
    if chromosome.size and (chromosome.min() < 0 or chromosome.max() > 9):
        raise ValueError("chromosome digits must lie in 0..9")


def decode(chromosome: Chromosome, scheme: EncodingScheme) -> np.ndarray:
    """Digit string -> real vector. Total on valid chromosomes."""
    digits = np.asarray(chromosome, dtype=np.int64).reshape(scheme.variable_count, scheme.digits_per_variable)
    sign = np.where(digits[:, 0] <= 4, 1.0, -1.0)
    place = 10 ** np.arange(scheme.magnitude_digits - 1, -1, -1, dtype=np.int64)
    steps = digits[:, 1:] @ place
    # exact integer magnitude, one correctly rounded division
    return sign * (steps / scheme._scale)


def encode(values: np.ndarray, scheme: EncodingScheme) -> Chromosome:
    """Real vector -> canonical digit string (sign digit 0 or 5).

    Magnitudes are rounded half away from zero onto the quantization grid.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != scheme.variable_count:
        raise ValueError(f"{values.size} values for a scheme of {scheme.variable_count} variables")
    limit = 10 ** scheme.magnitude_digits
    steps = np.floor(np.abs(values) * scheme._scale + 0.5)
    over = np.flatnonzero(~np.isfinite(values) | (steps >= limit))
    if over.size:
        i = int(over[0])
        raise EncodingRangeError(
            f"variable {i} = {values[i]!r} exceeds the representable magnitude {scheme.max_magnitude}",
            index=i,
        )

    steps = steps.astype(np.int64)
    out = np.empty((scheme.variable_count, scheme.digits_per_variable), dtype=np.int8)
    out[:, 0] = np.where((values < 0) & (steps > 0), 5, 0)
    place = 10 ** np.arange(scheme.magnitude_digits - 1, -1, -1, dtype=np.int64)
    out[:, 1:] = (steps[:, None] // place) % 10
    return out.reshape(-1)


def random_chromosome(scheme: EncodingScheme, lower: np.ndarray, upper: np.ndarray,
                      rng: np.random.Generator) -> Chromosome:
    """Encode a vector drawn uniformly inside [lower, upper]."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (scheme.variable_count,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (scheme.variable_count,))
    empty = np.flatnonzero(lower > upper)
    if empty.size:
        i = int(empty[0])
        raise ValueError(f"empty bounds interval for variable {i}: [{lower[i]}, {upper[i]}]")
    reach = np.maximum(np.abs(lower), np.abs(upper))
    too_wide = np.flatnonzero(reach > scheme.max_magnitude)
    if too_wide.size:
        i = int(too_wide[0])
        raise EncodingRangeError(
            f"bounds of variable {i} exceed the representable magnitude {scheme.max_magnitude}", index=i
        )
    return encode(rng.uniform(lower, upper), scheme)
