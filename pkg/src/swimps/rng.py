"""Counter-based deterministic noise for the simulation.

All randomness in the simulator is derived from (seed, stream, counter)
triples through the SplitMix64 finalizer, so any sample can be recomputed
in isolation: there is no hidden RNG state, and two runs with the same
seed produce bit-identical noise regardless of call order. Gaussians come
from a Box-Muller transform over two consecutive counter values.
"""

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15

# Stream tags keep independent noise channels from colliding on one seed.
STREAM_TEMP = 0x01
STREAM_HUMIDITY = 0x02
STREAM_SENSOR = 0x100


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden gamma and finalize."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def word64(seed: int, stream: int, counter: int) -> int:
    """Pseudo-random 64-bit word for a (seed, stream, counter) triple."""
    x = splitmix64(seed & _MASK64)
    x = splitmix64(x ^ (stream & _MASK64))
    return splitmix64(x ^ (counter & _MASK64))


def uniform(seed: int, stream: int, counter: int) -> float:
    """Uniform float in (0, 1]; never returns 0 so log() is safe."""
    return ((word64(seed, stream, counter) >> 11) + 1) * 2.0 ** -53


def gauss(seed: int, stream: int, counter: int) -> float:
    """Standard-normal draw via Box-Muller on counters 2k and 2k+1."""
    u1 = uniform(seed, stream, 2 * counter)
    u2 = uniform(seed, stream, 2 * counter + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
