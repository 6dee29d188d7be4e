"""Forward model of the two-arm Pauli detection apparatus.

Each beam ends in a polarizing beam splitter with an h- and a v-detector,
optionally preceded by a wave-plate that turns the sigma_z measurement into a
sigma_x or sigma_y one. Outcome ``+1`` means the h-detector fired.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from . import pauli_algebra as pa
from .entangled_state import TwoQubitPureState

Setting = Tuple[int, int]
SETTINGS: Tuple[Setting, ...] = tuple((a, b) for a in (1, 2, 3) for b in (1, 2, 3))
# (outcome on beam 1, outcome on beam 2) in the order n_pp, n_pm, n_mp, n_mm
OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))
CSV_HEADER = ("alpha", "beta", "outcome_a", "outcome_b", "count")


class OutcomeCounts(NamedTuple):
    n_pp: float
    n_pm: float
    n_mp: float
    n_mm: float

    @property
    def total(self):
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError(f"detector efficiency must be in (0, 1], got {self.efficiency}")


@dataclass(eq=False)
class CountsTable:
    """Coincidence counts for the nine (alpha, beta) settings.

    ``counts[alpha - 1, beta - 1]`` holds ``(n_pp, n_pm, n_mp, n_mm)``. Counts
    are integers for sampled data; float pseudo-counts are accepted so that
    exact expectation values can be pushed through the estimator.
    """

    counts: np.ndarray
    shots_requested: int = 0
    seed: Optional[int] = None
    stream: int = 0
    efficiency: float = 1.0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (3, 3, 4):
            raise ValueError(f"counts must have shape (3, 3, 4), got {counts.shape}")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ValueError("counts must be finite and non-negative")
        self.counts = counts

    def __getitem__(self, setting: Setting) -> OutcomeCounts:
        a, b = _check_setting(setting)
        return OutcomeCounts(*self.counts[a - 1, b - 1].tolist())

    def __iter__(self) -> Iterator[Tuple[Setting, OutcomeCounts]]:
        for s in SETTINGS:
            yield s, self[s]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=-1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for (a, b), row in self:
            for (oa, ob), n in zip(OUTCOMES, row):
                w.writerow((pa.AXIS_NAMES[a], pa.AXIS_NAMES[b], _sign(oa), _sign(ob), _fmt_count(n)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountsTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"counts CSV must start with header {','.join(CSV_HEADER)}")
        counts = np.zeros((3, 3, 4))
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise ValueError(f"line {lineno}: expected 5 fields, got {len(row)}")
            try:
                a = pa.AXES[row[0].strip()]
                b = pa.AXES[row[1].strip()]
                k = OUTCOMES.index((_parse_sign(row[2]), _parse_sign(row[3])))
                n = float(row[4])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"line {lineno}: cannot parse {row!r}") from exc
            if (a, b, k) in seen:
                raise ValueError(f"line {lineno}: duplicate cell {row[:4]}")
            if n < 0 or not math.isfinite(n):
                raise ValueError(f"line {lineno}: count must be non-negative")
            seen.add((a, b, k))
            counts[a - 1, b - 1, k] = n
        if len(seen) != 36:
            raise ValueError(f"counts CSV must have 36 cells, got {len(seen)}")
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        return cls(counts)


def _sign(o: int) -> str:
    return "+1" if o > 0 else "-1"


def _parse_sign(s: str) -> int:
    s = s.strip().replace("−", "-")
    if s in ("+1", "1"):
        return 1
    if s == "-1":
        return -1
    raise ValueError(f"outcome must be +1 or -1, got {s!r}")


def _fmt_count(n) -> str:
    n = float(n)
    return str(int(n)) if n.is_integer() else repr(n)


def _check_setting(setting: Setting) -> Setting:
    a, b = setting
    if a not in (1, 2, 3) or b not in (1, 2, 3):
        raise ValueError(f"setting axes must be in 1..3, got {setting!r}")
    return a, b


def detector_plate_for(axis: int) -> Optional[pa.WavePlateSpec]:
    """Plate that turns a sigma_z detector into a sigma_axis detector.

    A half-wave plate at pi/8 for x, a quarter-wave plate at pi/4 for y, and
    nothing for z.
    """
    if axis == 1:
        return pa.WavePlateSpec(math.pi, math.pi / 8)
    if axis == 2:
        return pa.WavePlateSpec(math.pi / 2, math.pi / 4)
    if axis == 3:
        return None
    raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")


def eigenbasis(axis: int) -> np.ndarray:
    """Columns are the +1 and -1 eigenvectors of sigma_axis."""
    _, vecs = np.linalg.eigh(pa.PAULIS[axis])
    # eigh sorts ascending: column 0 is the -1 eigenvector
    return vecs[:, ::-1]


def outcome_probabilities(state: TwoQubitPureState, setting: Setting) -> np.ndarray:
    """Joint probabilities ``(P++, P+-, P-+, P--)`` for one setting."""
    a, b = _check_setting(setting)
    ea = eigenbasis(a)
    eb = eigenbasis(b)
    amp = ea.conj().T @ state.psi @ eb.conj()
    p = (np.abs(amp) ** 2).reshape(4)
    return p / p.sum()


def sample_setting(probabilities, shots: int, rng: np.random.Generator) -> OutcomeCounts:
    p = _check_probabilities(probabilities)
    if shots < 0:
        raise ValueError(f"shots must be non-negative, got {shots}")
    return OutcomeCounts(*(int(n) for n in rng.multinomial(shots, p)))


def _check_probabilities(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (4,) or not np.all(np.isfinite(p)) or np.any(p < -1e-12):
        raise ValueError(f"invalid probability vector {probabilities!r}")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def setting_rng(seed: int, stream: int, setting: Setting) -> np.random.Generator:
    """Independent generator for one setting of one dataset.

    Derived from ``(seed, stream, alpha, beta)`` only, so results do not
    depend on the order in which settings are evaluated.
    """
    a, b = setting
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, a, b)))


def _sample_one(state, setting, shots, detector, seed, stream) -> np.ndarray:
    rng = setting_rng(seed, stream, setting)
    kept = shots
    if detector.efficiency < 1.0:
        # a coincidence needs both detectors to fire
        kept = int(rng.binomial(shots, detector.efficiency**2))
    p = outcome_probabilities(state, setting)
    return rng.multinomial(kept, p)


def run_experiment(
    state: TwoQubitPureState,
    shots_per_setting: int,
    detector: DetectorModel = DetectorModel(),
    seed: int = 0,
    stream: int = 0,
    max_workers: Optional[int] = None,
) -> CountsTable:
    """Sample coincidence counts for all nine settings.

    ``stream`` separates datasets drawn from the same master seed (the
    pipeline uses 0 for the bare input state and 1 for the device output).
    """
    if shots_per_setting < 0:
        raise ValueError(f"shots_per_setting must be non-negative, got {shots_per_setting}")
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative integers")
    args = [(state, s, shots_per_setting, detector, seed, stream) for s in SETTINGS]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            rows = list(pool.map(lambda x: _sample_one(*x), args))
    else:
        rows = [_sample_one(*x) for x in args]
    counts = np.array(rows, dtype=np.int64).reshape(3, 3, 4)
    return CountsTable(
        counts,
        shots_requested=shots_per_setting,
        seed=seed,
        stream=stream,
        efficiency=detector.efficiency,
    )


def expected_counts(state: TwoQubitPureState, shots_per_setting: float = 1.0) -> CountsTable:
    """Float pseudo-counts exactly proportional to the outcome probabilities."""
    counts = np.array([outcome_probabilities(state, s) for s in SETTINGS]) * shots_per_setting
    return CountsTable(counts.reshape(3, 3, 4), shots_requested=int(shots_per_setting))
