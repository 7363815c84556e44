"""
Counter-based random draws for reproducible trials.

Draw ``i`` of the stream ``seed`` is

    bits = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15  mod 2^64)

with the splitmix64 finalizer ``mix64``, mapped to [0, 1) as
``(bits >> 11) * 2^-53``. Trial ``k`` reads counters ``k * 2^20 + j``, so
any trial can be regenerated on its own and in any order.
"""

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
TRIAL_STRIDE = 1 << 20
UNIT = 2.0 ** -53


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class CounterRandom:
    """Stateless generator: every draw is a pure function of (seed, counter)."""

    def __init__(self, seed=0):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise ValueError(f'Seed must be an unsigned 64-bit integer, got {seed}')
        self.seed = seed

    def __repr__(self):
        return f'CounterRandom(seed={self.seed})'

    def bits(self, counter):
        if counter < 0:
            raise ValueError('Counters are non-negative')
        return mix64(self.seed + (counter + 1) * GOLDEN_GAMMA)

    def random(self, counter):
        return (self.bits(counter) >> 11) * UNIT

    def uniform(self, low, high, counter):
        return low + (high - low) * self.random(counter)

    def trial(self, index):
        return TrialStream(self, index)


class TrialStream:
    """The counters k * 2^20 + j of trial k."""

    def __init__(self, generator, index):
        if index < 0:
            raise ValueError('Trial indices are non-negative')
        self.generator = generator
        self.index = index

    def random(self, j):
        if not 0 <= j < TRIAL_STRIDE:
            raise ValueError(f'Trial draws are limited to {TRIAL_STRIDE} per trial')
        return self.generator.random(self.index * TRIAL_STRIDE + j)

    def uniforms(self, count, low=0.0, high=1.0):
        return [low + (high - low) * self.random(j) for j in range(count)]
