"""splitmix64 - the PRNG that drives chain shuffles."""

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def prng_next(state: int) -> tuple[int, int]:
    """One step: returns (value, new state)."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), state


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next(self) -> int:
        value, self.state = prng_next(self.state)
        return value
