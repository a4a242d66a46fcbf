"""Splitmix64 generator used wherever reproducibility across languages matters.

The exact sequence is documented in FORMATS.md: state advances by the 64-bit
constant 0x9E3779B97F4A7C15 and the output is the finalized mix of the new
state.  Floats in [0, 1) take the top 53 bits of an output word.
"""

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance the state once; returns (new_state, output_word)."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    z = z ^ (z >> 31)
    return state, z


class SplitMix64:
    """Tiny deterministic stream; not for cryptography."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state, word = splitmix64_next(self._state)
        return word

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def substream_seed(seed: int, index: int) -> int:
    """Decorrelated seed for element ``index`` of a logical stream."""
    _, word = splitmix64_next((seed ^ (index * _GOLDEN)) & _MASK)
    return word
