"""
Multi-agent intersection trajectories: schema, CSV I/O, a synthetic
generator with known ground-truth relevance, and design-matrix assembly.

Each trial holds one synchronized track per participant. A track is a
``(T, 6)`` float array whose columns follow ``FEATURES``:

    lon_pos, lat_pos, heading, yaw_rate, lon_vel, lon_acc

Positions are world coordinates in meters with the host's conflict point
at the origin, heading is the world-frame angle of travel in radians.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateShape,
    InvalidConfig,
    MalformedRow,
    MissingHost,
    TooShort,
    UnsynchronizedTracks,
)

FEATURES = ("lon_pos", "lat_pos", "heading", "yaw_rate", "lon_vel", "lon_acc")
SCENARIOS = ("S1", "S2", "S3", "S4")
CSV_HEADER = ("trial_id", "scenario", "t", "participant") + FEATURES
HOST_HISTORY = "host_history"


class Participant(str, Enum):
    HOST = "host"
    SV1 = "sv1"
    SV2 = "sv2"
    SV3 = "sv3"
    PED = "ped"

    @property
    def is_host(self) -> bool:
        return self is Participant.HOST

    @property
    def vehicle_index(self) -> int | None:
        """1..3 for surrounding vehicles, None otherwise."""
        if self.value.startswith("sv"):
            return int(self.value[2:])
        return None


PARTICIPANT_ORDER = tuple(Participant)
NON_HOST = tuple(p for p in PARTICIPANT_ORDER if not p.is_host)
GROUP_ORDER = (HOST_HISTORY,) + tuple(p.value for p in NON_HOST)


class Channel(str, Enum):
    LONGITUDINAL = "longitudinal"
    LATERAL = "lateral"

    @property
    def feature(self) -> str:
        return "lon_acc" if self is Channel.LONGITUDINAL else "yaw_rate"


@dataclass(frozen=True)
class FeatureFrame:
    """One synchronized sample of a participant's kinematics."""

    t: float
    lon_pos: float
    lat_pos: float
    heading: float
    yaw_rate: float
    lon_vel: float
    lon_acc: float

    def __post_init__(self):
        values = [getattr(self, f.name) for f in fields(self)]
        if not all(math.isfinite(v) for v in values) or self.t < 0:
            raise MalformedRow(f"non-finite or negative-time frame: {values}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURES])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trial:
    """A synchronized multi-participant episode.

    ``tracks`` maps each present participant to a ``(T, 6)`` array; ``t``
    holds the shared timestamps.
    """

    trial_id: str
    scenario: str
    t: np.ndarray
    tracks: Mapping[Participant, np.ndarray]

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"unknown scenario {self.scenario!r}")
        if Participant.HOST not in self.tracks:
            raise MissingHost(f"trial {self.trial_id!r} has no host track")
        t = _frozen(self.t)
        if t.ndim != 1 or t.size < 2:
            raise TooShort(f"trial {self.trial_id!r} needs at least 2 frames")
        if not np.all(np.isfinite(t)) or t[0] < 0 or np.any(np.diff(t) <= 0):
            raise UnsynchronizedTracks(
                f"trial {self.trial_id!r}: timestamps must be finite, non-negative, strictly increasing"
            )
        tracks = {}
        for p in PARTICIPANT_ORDER:
            if p not in self.tracks:
                continue
            arr = _frozen(self.tracks[p])
            if arr.shape != (t.size, len(FEATURES)):
                raise UnsynchronizedTracks(
                    f"trial {self.trial_id!r}: track {p.value} has shape {arr.shape}, "
                    f"expected {(t.size, len(FEATURES))}"
                )
            if not np.all(np.isfinite(arr)):
                raise MalformedRow(f"trial {self.trial_id!r}: non-finite values in {p.value}")
            tracks[p] = arr
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "tracks", tracks)

    @property
    def n_frames(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        return float(np.median(np.diff(self.t)))

    @property
    def participants(self) -> tuple[Participant, ...]:
        return tuple(self.tracks)

    def frames(self, participant: Participant) -> list[FeatureFrame]:
        track = self.tracks[participant]
        return [FeatureFrame(float(ti), *map(float, row)) for ti, row in zip(self.t, track)]

    def with_track(self, participant: Participant, track) -> "Trial":
        tracks = dict(self.tracks)
        tracks[participant] = track
        return replace(self, tracks=tracks)

    def without(self, participants: Iterable[Participant]) -> "Trial":
        drop = set(participants)
        if Participant.HOST in drop:
            raise MissingHost("the host track cannot be removed")
        return replace(self, tracks={p: a for p, a in self.tracks.items() if p not in drop})


@dataclass(frozen=True)
class TargetSpec:
    channel: Channel = Channel.LONGITUDINAL
    horizon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel(self.channel))
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise InvalidConfig("horizon must be an integer >= 1")


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def load_trials(path) -> list[Trial]:
    """Read a long-format trial CSV (see ``CSV_HEADER``)."""
    rows: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise MalformedRow(f"expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(CSV_HEADER):
                raise MalformedRow(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
            trial_id, scenario, t, participant = (c.strip() for c in rec[:4])
            if scenario not in SCENARIOS:
                raise MalformedRow(f"line {lineno}: unknown scenario {scenario!r}")
            try:
                who = Participant(participant)
                values = [float(c) for c in rec[4:]]
                t = float(t)
            except ValueError as exc:
                raise MalformedRow(f"line {lineno}: {exc}") from None
            if not math.isfinite(t) or not all(math.isfinite(v) for v in values):
                raise MalformedRow(f"line {lineno}: non-finite value")
            entry = rows.setdefault(trial_id, {"scenario": scenario, "tracks": {}})
            if entry["scenario"] != scenario:
                raise MalformedRow(f"line {lineno}: trial {trial_id!r} changes scenario")
            entry["tracks"].setdefault(who, []).append((t, values))

    trials = []
    for trial_id, entry in rows.items():
        tracks = entry["tracks"]
        if Participant.HOST not in tracks:
            raise MissingHost(f"trial {trial_id!r} has no host rows")
        ordered = {p: sorted(tracks[p], key=lambda r: r[0]) for p in PARTICIPANT_ORDER if p in tracks}
        host_t = [r[0] for r in ordered[Participant.HOST]]
        for p, recs in ordered.items():
            if [r[0] for r in recs] != host_t:
                raise UnsynchronizedTracks(
                    f"trial {trial_id!r}: {p.value} timestamps differ from host ({len(recs)} vs {len(host_t)} frames)"
                )
        trials.append(
            Trial(
                trial_id=trial_id,
                scenario=entry["scenario"],
                t=np.array(host_t),
                tracks={p: np.array([r[1] for r in recs]) for p, recs in ordered.items()},
            )
        )
    return trials


def write_trials(trials: Sequence[Trial], path) -> Path:
    """Write trials in the long CSV format; ``repr`` floats round-trip exactly."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for trial in trials:
            for p, track in trial.tracks.items():
                for ti, row in zip(trial.t, track):
                    writer.writerow([trial.trial_id, trial.scenario, repr(float(ti)), p.value]
                                    + [repr(float(v)) for v in row])
    return path


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardization:
    """Per-column mean and sample standard deviation (ddof=1)."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    def apply(self, matrix) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        scale = np.where(self.constant, 1.0, self.std)
        z = (matrix - self.mean) / scale
        z[..., self.constant] = 0.0
        return z

    def invert(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z * np.where(self.constant, 0.0, self.std) + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": self.constant.tolist()}


def standardize(matrix) -> tuple[np.ndarray, Standardization]:
    """Center and scale each column; constant columns become zeros and are flagged."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise DegenerateShape(f"standardize needs N >= 2 rows, got shape {matrix.shape}")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0, ddof=1)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    stats = Standardization(_frozen(mean), _frozen(std), np.array(constant, dtype=bool))
    return stats.apply(matrix), stats


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

# Host path per scenario: signed turn angle (left positive) and turn radius.
# S1/S2 are T-shaped junctions (host leaves the stem left/right), S3/S4 are
# cross-shaped (host goes straight / turns left).
_HOST_TURN = {
    "S1": (math.pi / 2, 10.0),
    "S2": (-math.pi / 2, 7.0),
    "S3": (0.0, 10.0),
    "S4": (math.pi / 2, 12.0),
}

# Surrounding-agent lanes: (heading of travel, lane point the agent moves
# toward). The host approaches along +x and its conflict point is the origin.
_LANES = {
    "S1": {
        Participant.SV1: (-math.pi / 2, (1.75, 0.0)),   # main road, from the host's left
        Participant.SV2: (math.pi / 2, (-1.75, -6.0)),  # main road, from the right
        Participant.SV3: (-math.pi / 2, (5.25, 12.0)),  # far lane, leaving
        Participant.PED: (0.0, (0.0, 9.0)),             # crosswalk on the exit leg
    },
    "S2": {
        Participant.SV1: (math.pi / 2, (-1.75, 0.0)),
        Participant.SV2: (-math.pi / 2, (1.75, 6.0)),
        Participant.SV3: (math.pi / 2, (-5.25, -10.0)),
        Participant.PED: (math.pi, (0.0, -8.0)),
    },
    "S3": {
        Participant.SV1: (math.pi / 2, (0.0, 0.0)),     # cross traffic
        Participant.SV2: (math.pi, (6.0, 3.5)),         # oncoming
        Participant.SV3: (-math.pi / 2, (-4.0, 0.0)),   # cross traffic, far side
        Participant.PED: (math.pi / 2, (12.0, 0.0)),    # crosswalk beyond the junction
    },
    "S4": {
        Participant.SV1: (math.pi, (3.0, 3.5)),         # oncoming, conflicts with the left turn
        Participant.SV2: (math.pi / 2, (-6.0, 0.0)),
        Participant.SV3: (-math.pi / 2, (6.0, 10.0)),
        Participant.PED: (0.0, (0.0, 10.0)),
    },
}


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic intersection generator.

    The host's longitudinal acceleration command is
    ``clip(gain * (gap - gap0) + noise, -a_max, a_max)`` where ``gap`` is the
    distance from the nearest causal participant to the host's conflict
    point. Participants outside ``causal_set`` never influence the host.
    """

    dt: float = 0.1
    n_frames: int = 200
    causal_set: tuple[str, ...] = ("sv1",)
    include_pedestrian: bool = True
    host_speed: tuple[float, float] = (6.0, 9.0)
    host_speed_limits: tuple[float, float] = (1.0, 16.0)
    host_approach: float = 40.0
    vehicle_speed: tuple[float, float] = (4.0, 7.0)
    pedestrian_speed: tuple[float, float] = (1.0, 1.8)
    vehicle_spawn: tuple[float, float] = (150.0, 350.0)
    pedestrian_spawn: tuple[float, float] = (4.0, 14.0)
    speed_oscillation: float = 0.2
    oscillation_period: tuple[float, float] = (4.0, 10.0)
    gain: float = 0.015
    gap0: float = 170.0
    a_max: float = 3.0
    acc_noise: float = 0.05
    yaw_noise: float = 0.002

    def __post_init__(self):
        for name in ("host_speed", "host_speed_limits", "vehicle_speed", "pedestrian_speed",
                     "vehicle_spawn", "pedestrian_spawn", "oscillation_period"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not (0 < lo <= hi):
                raise InvalidConfig(f"{name} must be a positive range, got {(lo, hi)}")
        object.__setattr__(self, "causal_set", tuple(self.causal_set))
        for name in self.causal_set:
            try:
                who = Participant(name)
            except ValueError:
                raise InvalidConfig(f"unknown causal participant {name!r}") from None
            if who.is_host:
                raise InvalidConfig("the host cannot be in its own causal set")
            if who is Participant.PED and not self.include_pedestrian:
                raise InvalidConfig("pedestrian is causal but not included")
        if not self.dt > 0:
            raise InvalidConfig("dt must be positive")
        if int(self.n_frames) != self.n_frames or self.n_frames < 2:
            raise InvalidConfig("n_frames must be an integer >= 2")
        if self.host_approach <= 0 or self.a_max <= 0 or self.gain < 0:
            raise InvalidConfig("host_approach and a_max must be positive, gain non-negative")
        if not 0 <= self.speed_oscillation < 1:
            raise InvalidConfig("speed_oscillation must be in [0, 1)")
        if self.acc_noise < 0 or self.yaw_noise < 0:
            raise InvalidConfig("noise levels must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown SynthConfig keys: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class HostPath:
    """Arc-length parameterized host route through one intersection layout."""

    s: np.ndarray
    xy: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray

    @classmethod
    def for_scenario(cls, scenario: str, approach: float, length: float, ds: float = 0.05) -> "HostPath":
        angle, radius = _HOST_TURN[scenario]
        turn_len = max(abs(angle) * radius, 1e-9) if angle else 2 * radius
        s_in = approach - turn_len / 2
        s = np.arange(0.0, max(length, approach + turn_len) + ds, ds)
        u = np.clip((s - s_in) / turn_len, 0.0, 1.0)
        inside = (s > s_in) & (s < s_in + turn_len)
        # raised-cosine curvature: continuous yaw-rate profile, total turn = angle
        curvature = np.where(inside, angle / turn_len * (1 - np.cos(2 * np.pi * u)), 0.0)
        heading = angle * (u - np.sin(2 * np.pi * u) / (2 * np.pi))
        dxy = np.column_stack([np.cos(heading), np.sin(heading)])
        xy = np.vstack([[0.0, 0.0], np.cumsum(0.5 * (dxy[1:] + dxy[:-1]) * ds, axis=0)])
        conflict = np.array([np.interp(approach, s, xy[:, 0]), np.interp(approach, s, xy[:, 1])])
        return cls(s=s, xy=xy - conflict, heading=heading, curvature=curvature)

    def at(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        if np.any(s > self.s[-1]):
            raise InvalidConfig("host travelled beyond the generated path")
        x = np.interp(s, self.s, self.xy[:, 0])
        y = np.interp(s, self.s, self.xy[:, 1])
        return np.column_stack([x, y]), np.interp(s, self.s, self.heading), np.interp(s, self.s, self.curvature)


def _straight_track(t, heading, lane_point, spawn, v_cruise, amp, period, phase) -> np.ndarray:
    """Agent on a straight lane with a sinusoidally modulated cruise speed."""
    w = 2 * np.pi / period
    speed = v_cruise * (1 + amp * np.sin(w * t + phase))
    acc = v_cruise * amp * w * np.cos(w * t + phase)
    travelled = v_cruise * t + v_cruise * amp / w * (np.cos(phase) - np.cos(w * t + phase))
    direction = np.array([math.cos(heading), math.sin(heading)])
    pos = np.asarray(lane_point) + np.outer(travelled - spawn, direction)
    n = t.size
    return np.column_stack([pos, np.full(n, heading), np.zeros(n), speed, acc])


def simulate_host(
    scenario: str,
    t: np.ndarray,
    agents: Mapping[Participant, np.ndarray],
    config: SynthConfig,
    v0: float,
    acc_noise=None,
    yaw_noise=None,
) -> np.ndarray:
    """Roll out the host's reactive rule; only ``config.causal_set`` tracks are read."""
    n = t.size
    dt = np.diff(t, append=t[-1] + config.dt)
    causal = [Participant(c) for c in config.causal_set]
    if causal:
        gap = np.min([np.hypot(agents[p][:, 0], agents[p][:, 1]) for p in causal], axis=0)
        command = config.gain * (gap - config.gap0)
    else:
        command = np.zeros(n)
    if acc_noise is not None:
        command = command + acc_noise
    acc = np.clip(command, -config.a_max, config.a_max)

    v_lo, v_hi = config.host_speed_limits
    v = np.empty(n)
    s = np.empty(n)
    v[0], s[0] = v0, 0.0
    for i in range(n - 1):
        v[i + 1] = min(max(v[i] + acc[i] * dt[i], v_lo), v_hi)
        s[i + 1] = s[i] + 0.5 * (v[i] + v[i + 1]) * dt[i]

    path = HostPath.for_scenario(scenario, config.host_approach, s[-1] + 1.0)
    xy, heading, curvature = path.at(s)
    yaw_rate = v * curvature
    if yaw_noise is not None:
        yaw_rate = yaw_rate + yaw_noise
    return np.column_stack([xy, heading, yaw_rate, v, acc])


def _seed_sequence(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & (2**64 - 1))


def synthesize_scenario(scenario: str, config: SynthConfig | None = None, seed: int = 0,
                        trial_id: str | None = None) -> Trial:
    """Generate one trial; a pure function of ``(scenario, config, seed)``."""
    config = config or SynthConfig()
    if scenario not in SCENARIOS:
        raise InvalidConfig(f"unknown scenario {scenario!r}")
    rng = np.random.default_rng(_seed_sequence(seed))
    t = np.arange(config.n_frames) * config.dt

    # every participant draws its parameters in a fixed order so that the
    # causal set and pedestrian switch never perturb anyone else's draws
    agents = {}
    for p in NON_HOST:
        heading, lane_point = _LANES[scenario][p]
        if p is Participant.PED:
            v_range, spawn_range = config.pedestrian_speed, config.pedestrian_spawn
        else:
            v_range, spawn_range = config.vehicle_speed, config.vehicle_spawn
        v_cruise = rng.uniform(*v_range)
        spawn = rng.uniform(*spawn_range)
        amp = rng.uniform(0.0, config.speed_oscillation)
        period = rng.uniform(*config.oscillation_period)
        phase = rng.uniform(0.0, 2 * np.pi)
        # pedestrians start from either curb
        if rng.random() < 0.5 and p is Participant.PED:
            heading = heading + math.pi if heading <= 0 else heading - math.pi
        agents[p] = _straight_track(t, heading, lane_point, spawn, v_cruise, amp, period, phase)
    if not config.include_pedestrian:
        del agents[Participant.PED]

    v0 = rng.uniform(*config.host_speed)
    acc_noise = rng.normal(0.0, 1.0, t.size) * config.acc_noise
    yaw_noise = rng.normal(0.0, 1.0, t.size) * config.yaw_noise
    host = simulate_host(scenario, t, agents, config, v0, acc_noise, yaw_noise)

    tracks = {Participant.HOST: host, **agents}
    return Trial(trial_id=trial_id or f"{scenario}-{int(seed)}", scenario=scenario, t=t, tracks=tracks)


def synthesize_trials(scenarios: Sequence[str], n_trials: int, config: SynthConfig | None = None,
                      seed: int = 0) -> list[Trial]:
    """``n_trials`` per scenario, each with a seed spawned from ``seed``."""
    config = config or SynthConfig()
    trials = []
    for scenario in scenarios:
        idx = SCENARIOS.index(scenario)
        children = np.random.SeedSequence([int(seed) & (2**64 - 1), idx]).generate_state(n_trials, np.uint64)
        for i, child in enumerate(children):
            trials.append(synthesize_scenario(scenario, config, int(child), trial_id=f"{scenario}-{i:03d}"))
    return trials


# ---------------------------------------------------------------------------
# Design matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignMatrices:
    """Row-aligned predictor groups plus the host target block.

    ``group_stats``/``target_stats`` are None for raw (unstandardized)
    matrices; ``standardize_design`` fills them.
    """

    groups: Mapping[str, np.ndarray]
    target: np.ndarray
    column_meta: Mapping[str, tuple[tuple[str, str, int], ...]]
    target_meta: tuple[tuple[str, str, int], ...]
    group_stats: Mapping[str, Standardization] | None = None
    target_stats: Standardization | None = None
    constant_columns: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.target.shape[0]

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(g for g in GROUP_ORDER if g in self.groups)

    def stack(self, names: Iterable[str]) -> np.ndarray:
        names = [g for g in GROUP_ORDER if g in set(names)]
        return np.hstack([self.groups[g] for g in names])

    def take(self, rows) -> "DesignMatrices":
        return replace(self, groups={g: m[rows] for g, m in self.groups.items()}, target=self.target[rows])


def _lagged(track: np.ndarray, lags: int, rows: np.ndarray) -> np.ndarray:
    return np.hstack([track[rows - lag] for lag in range(lags + 1)])


def raw_design(trial: Trial, target: TargetSpec, lags: int = 0) -> DesignMatrices:
    """Unstandardized design matrices for one trial."""
    if int(lags) != lags or lags < 0:
        raise InvalidConfig("lags must be a non-negative integer")
    n = trial.n_frames
    if lags + target.horizon >= n:
        raise TooShort(f"trial {trial.trial_id!r}: {n} frames cannot support lags={lags}, horizon={target.horizon}")
    rows = np.arange(lags, n - target.horizon)
    groups, meta = {}, {}
    for p in PARTICIPANT_ORDER:
        if p not in trial.tracks:
            continue
        name = HOST_HISTORY if p.is_host else p.value
        groups[name] = _lagged(trial.tracks[p], lags, rows)
        meta[name] = tuple((p.value, f, lag) for lag in range(lags + 1) for f in FEATURES)
    col = FEATURES.index(target.channel.feature)
    y = trial.tracks[Participant.HOST][rows + target.horizon, col][:, None]
    return DesignMatrices(
        groups=groups,
        target=y,
        column_meta=meta,
        target_meta=((Participant.HOST.value, target.channel.feature, -target.horizon),),
    )


def pool_designs(designs: Sequence[DesignMatrices]) -> DesignMatrices:
    """Concatenate raw design matrices from several trials (shared groups only)."""
    if not designs:
        raise DegenerateShape("nothing to pool")
    names = [g for g in designs[0].group_names if all(g in d.groups for d in designs)]
    return DesignMatrices(
        groups={g: np.vstack([d.groups[g] for d in designs]) for g in names},
        target=np.vstack([d.target for d in designs]),
        column_meta={g: designs[0].column_meta[g] for g in names},
        target_meta=designs[0].target_meta,
    )


def standardize_design(design: DesignMatrices, reference: DesignMatrices | None = None) -> DesignMatrices:
    """Standardize every block, using ``reference``'s stored stats when given."""
    if reference is not None:
        if reference.group_stats is None:
            raise InvalidConfig("reference design carries no standardization")
        gstats = {g: reference.group_stats[g] for g in design.groups}
        tstats = reference.target_stats
        groups = {g: gstats[g].apply(m) for g, m in design.groups.items()}
        target = tstats.apply(design.target)
    else:
        groups, gstats = {}, {}
        for g, m in design.groups.items():
            groups[g], gstats[g] = standardize(m)
        target, tstats = standardize(design.target)
    constant = {g: tuple(np.flatnonzero(s.constant).tolist()) for g, s in gstats.items()}
    return replace(design, groups=groups, target=target, group_stats=gstats, target_stats=tstats,
                   constant_columns=constant)


def build_design_matrices(trial: Trial, target: TargetSpec, lags: int = 0) -> DesignMatrices:
    """Standardized predictor groups (one per participant) and the host target."""
    return standardize_design(raw_design(trial, target, lags))


def build_pooled_design(trials: Sequence[Trial], target: TargetSpec, lags: int = 0) -> DesignMatrices:
    """Standardized design over several trials, rows concatenated in trial order."""
    return standardize_design(pool_designs([raw_design(tr, target, lags) for tr in trials]))
