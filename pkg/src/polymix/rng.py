"""Counter-based random streams: one independent generator per trajectory.

Every trajectory gets its own Philox stream keyed by
``(master_seed, packed(phase, sub, stream_id))``.  Counter-based generators
make any two distinct keys statistically independent, so results depend only
on the keys a run uses and never on how trajectories are distributed over
workers.

The second key word packs three fields so that different stages of one
experiment (burn-in, passage sampling, coupling, ...) and different points of
one sweep never reuse a stream even though they share the master seed:

    bits 56..63  phase   (which kind of stage)
    bits 36..55  sub     (point index within a stage, e.g. sweep position)
    bits  0..35  stream  (trajectory index, up to ~6.9e10)
"""

from dataclasses import dataclass

import numpy as np

PHASE_GENERIC = 0
PHASE_PASSAGE = 1
PHASE_BURN = 2
PHASE_SERIES = 3
PHASE_CORRELATION = 4
PHASE_COUPLING = 5
PHASE_RENEWAL = 6

_STREAM_BITS = 36
_SUB_BITS = 20
_PHASE_BITS = 8

MAX_STREAMS = 1 << _STREAM_BITS
MAX_SUB = 1 << _SUB_BITS


def pack_key(stream_id, phase=PHASE_GENERIC, sub=0):
    """Pack (phase, sub, stream_id) into the second Philox key word."""
    if not 0 <= stream_id < MAX_STREAMS:
        raise ValueError(f"stream_id {stream_id} out of range [0, {MAX_STREAMS})")
    if not 0 <= sub < MAX_SUB:
        raise ValueError(f"sub {sub} out of range [0, {MAX_SUB})")
    if not 0 <= phase < (1 << _PHASE_BITS):
        raise ValueError(f"phase {phase} out of range")
    return (phase << (_STREAM_BITS + _SUB_BITS)) | (sub << _STREAM_BITS) | stream_id


def stream(master_seed, stream_id, phase=PHASE_GENERIC, sub=0):
    """Return the np.random.Generator for one trajectory.

    Identical arguments reproduce the identical stream bit-for-bit.
    """
    key = np.array([master_seed, pack_key(stream_id, phase, sub)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RngStream:
    """Addressable stream identity: replayable and worker-independent."""

    master_seed: int
    stream_id: int
    phase: int = PHASE_GENERIC
    sub: int = 0

    def generator(self):
        return stream(self.master_seed, self.stream_id, self.phase, self.sub)
