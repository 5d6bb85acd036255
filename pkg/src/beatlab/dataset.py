"""Domain types and preprocessing for VR music-game sessions.

A session arrives as irregularly-timed 18-channel motion samples plus robot
cue timestamps and detected strikes.  This module resamples the motion to a
fixed 16 steps/s grid, cuts the stream into per-exercise segments using the
cue/midpoint rule, validates them, and reads/writes the JSONL formats the
rest of the pipeline exchanges.

Channel order is fixed: headset, right controller, left controller, each
contributing (x, y, z, yaw, pitch, roll).  Positions are meters, angles
degrees in (-180, 180] after remapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (EmptySession, InsufficientData, InvalidValue,
                     LengthError)

FRAME_RATE = 16
STEP = 1.0 / FRAME_RATE
N_CHANNELS = 18

CHANNEL_NAMES = [
    f"{device}_{axis}"
    for device in ("h", "r", "l")
    for axis in ("x", "y", "z", "yaw", "pitch", "roll")
]
# yaw/pitch/roll columns within the 18-channel layout
ANGLE_CHANNELS = np.array([3, 4, 5, 9, 10, 11, 15, 16, 17])
ANGLE_CHANNEL_SET = frozenset(int(i) for i in ANGLE_CHANNELS)
POSITION_CHANNELS = np.array([0, 1, 2, 6, 7, 8, 12, 13, 14])

FINAL_SEGMENT_TAIL = 2.0      # seconds appended after the last child action
MIN_INTER_STRIKE = STEP       # child strikes closer than this invalidate

ANNOTATION_FLAGS = ("inattentive", "fatigued", "repeated_prior")


class Group(str, Enum):
    TD = "TD"
    ASD = "ASD"


class Actor(str, Enum):
    ROBOT = "robot"
    CHILD = "child"


class Instrument(str, Enum):
    DRUM = "drum"
    XYLOPHONE = "xylophone"


class ExerciseType(str, Enum):
    DRUMMING = "drumming"
    SINGLE_HIT_XYLOPHONE = "single-hit-xylophone"
    MULTI_HIT_XYLOPHONE = "multi-hit-xylophone"
    VERBAL_INSTRUCTION = "verbal-instruction"
    JOINT_ATTENTION = "joint-attention"


def strike_feature_count(exercise_type: ExerciseType) -> int:
    """Number of distinct strike targets for one-hot encoding."""
    if exercise_type is ExerciseType.DRUMMING:
        return 1
    if exercise_type is ExerciseType.JOINT_ATTENTION:
        return 0
    return 8


@dataclass(frozen=True)
class MotionFrame:
    t: float
    channels: np.ndarray  # shape (18,)

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.shape != (N_CHANNELS,):
            raise InvalidValue(f"expected {N_CHANNELS} channels, got {ch.shape}")
        object.__setattr__(self, "channels", ch)


@dataclass(frozen=True)
class StrikeEvent:
    t: float
    actor: Actor
    instrument: Instrument
    bar: int = 1
    score: float | None = None

    def __post_init__(self):
        if self.instrument is Instrument.DRUM:
            if self.bar != 1:
                raise InvalidValue("drum strikes must carry bar = 1")
        elif not 1 <= self.bar <= 8:
            raise InvalidValue(f"xylophone bar {self.bar} outside 1..8")


@dataclass(frozen=True)
class AnnotationInterval:
    flag: str
    start: float
    end: float

    def __post_init__(self):
        if self.flag not in ANNOTATION_FLAGS:
            raise InvalidValue(f"unknown annotation flag {self.flag!r}")


@dataclass(frozen=True)
class RobotCue:
    t: float
    exercise_type: ExerciseType
    demo_end: float | None = None
    # strikes known from the game script rather than audio (e.g. the
    # instructed bar in a verbal-instruction exercise)
    scripted_strikes: tuple = ()


@dataclass
class ExerciseSegment:
    subject_id: str
    group: Group
    exercise_type: ExerciseType
    exercise_id: str
    start_t: float
    end_t: float
    frames: list[MotionFrame]
    strikes: list[StrikeEvent]
    annotations: frozenset[str] = frozenset()

    @property
    def child_strikes(self) -> list[StrikeEvent]:
        return [s for s in self.strikes if s.actor is Actor.CHILD]

    @property
    def robot_strikes(self) -> list[StrikeEvent]:
        return [s for s in self.strikes if s.actor is Actor.ROBOT]

    def frame_matrix(self) -> np.ndarray:
        if not self.frames:
            return np.zeros((0, N_CHANNELS))
        return np.stack([f.channels for f in self.frames])


@dataclass
class SessionRecord:
    subject_id: str
    group: Group
    sample_times: np.ndarray          # (N,) non-decreasing seconds
    sample_channels: np.ndarray       # (N, 18)
    cues: list[RobotCue]
    strikes: list[StrikeEvent]
    annotations: list[AnnotationInterval] = field(default_factory=list)

    def __post_init__(self):
        self.sample_times = np.asarray(self.sample_times, dtype=np.float64)
        self.sample_channels = np.asarray(self.sample_channels, dtype=np.float64)
        if np.any(np.diff(self.sample_times) < 0):
            raise InvalidValue("raw sample times must be non-decreasing")


# ---------------------------------------------------------------------------
# angle handling


def remap_angle(deg):
    """Map angles stored in [0, 360) into (-180, +180].

    Exactly 180 maps to +180 so the codomain stays half-open.  Values
    outside [0, 360) are first wrapped modulo 360, which makes the same
    function usable for wrapping generated angles.
    """
    arr = np.asarray(deg, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidValue("angle must be finite")
    wrapped = np.mod(arr, 360.0)
    out = np.where(wrapped > 180.0, wrapped - 360.0, wrapped)
    if np.isscalar(deg) or arr.ndim == 0:
        return float(out)
    return out


def unmap_angle(deg):
    """Inverse of remap_angle on (-180, 180] -> [0, 360)."""
    arr = np.asarray(deg, dtype=np.float64)
    out = np.mod(arr, 360.0)
    if np.isscalar(deg) or arr.ndim == 0:
        return float(out)
    return out


def shortest_arc_delta(a_from, a_to):
    """Signed angular difference in (-180, 180] along the shortest arc."""
    diff = np.asarray(a_to, dtype=np.float64) - np.asarray(a_from, dtype=np.float64)
    return 180.0 - np.mod(180.0 - diff, 360.0)


# ---------------------------------------------------------------------------
# resampling


def _dedupe_times(times: np.ndarray, values: np.ndarray):
    """Collapse consecutive equal timestamps by averaging their rows."""
    if times.size == 0 or not np.any(np.diff(times) == 0):
        return times, values
    keep_t, keep_v = [], []
    i = 0
    while i < len(times):
        j = i
        while j + 1 < len(times) and times[j + 1] == times[i]:
            j += 1
        keep_t.append(times[i])
        keep_v.append(values[i:j + 1].mean(axis=0))
        i = j + 1
    return np.asarray(keep_t), np.stack(keep_v)


def resample(times, channels, rate: int = FRAME_RATE,
             start: float | None = None, end: float | None = None):
    """Resample irregular (N, 18) motion onto a regular 1/rate grid.

    Linear interpolation per channel; angular channels are remapped into
    (-180, 180] and interpolated along the shortest arc so a 359->1 degree
    move does not sweep through 360.  The grid starts at the first multiple
    of 1/rate at or after the first sample (so every output time is an
    exact multiple of the step) and ends at the last sample.

    Returns (grid_times, grid_channels).
    """
    times = np.asarray(times, dtype=np.float64)
    channels = np.asarray(channels, dtype=np.float64)
    if times.ndim != 1 or channels.shape != (times.size, N_CHANNELS):
        raise InvalidValue(
            f"expected (N,) times and (N, {N_CHANNELS}) channels, got "
            f"{times.shape} / {channels.shape}")
    if times.size < 2:
        raise InsufficientData("resampling needs at least 2 samples")
    if np.any(np.diff(times) < 0):
        raise InvalidValue("sample times must be non-decreasing")
    times, channels = _dedupe_times(times, channels)
    if times.size < 2:
        raise InsufficientData("resampling needs at least 2 distinct times")

    step = 1.0 / rate
    lo = times[0] if start is None else max(start, times[0])
    hi = times[-1] if end is None else min(end, times[-1])
    first = int(math.ceil(lo / step - 1e-9))
    last = int(math.floor(hi / step + 1e-9))
    if last < first:
        raise InsufficientData("no grid points inside the sampled range")
    grid = np.arange(first, last + 1, dtype=np.float64) * step

    out = np.empty((grid.size, N_CHANNELS))
    pos = np.searchsorted(times, grid, side="right") - 1
    pos = np.clip(pos, 0, times.size - 2)
    t0 = times[pos]
    t1 = times[pos + 1]
    span = t1 - t0
    frac = np.where(span > 0, (grid - t0) / np.where(span > 0, span, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)

    for c in range(N_CHANNELS):
        v0 = channels[pos, c]
        v1 = channels[pos + 1, c]
        if c in ANGLE_CHANNEL_SET:
            a0 = remap_angle(v0)
            delta = shortest_arc_delta(a0, remap_angle(v1))
            out[:, c] = remap_angle(a0 + frac * delta)
        else:
            out[:, c] = v0 + frac * (v1 - v0)
    return grid, out


def resample_frames(frames: list[MotionFrame], rate: int = FRAME_RATE):
    times = np.array([f.t for f in frames])
    channels = (np.stack([f.channels for f in frames])
                if frames else np.zeros((0, N_CHANNELS)))
    grid, values = resample(times, channels, rate)
    return [MotionFrame(t, v) for t, v in zip(grid, values)]


# ---------------------------------------------------------------------------
# segmentation


def _segment_bounds(cues: list[RobotCue], strikes: list[StrikeEvent]):
    """Start/end per cue: start at the cue, end at the midpoint between the
    last child action and the next cue.  Documented fallbacks: a segment
    with no child action ends at the plain cue midpoint; the final segment
    ends a fixed tail after the last child action (or after its cue when
    the child never acted)."""
    child_times = np.array(sorted(s.t for s in strikes if s.actor is Actor.CHILD))
    bounds = []
    for i, cue in enumerate(cues):
        start = cue.t
        next_cue_t = cues[i + 1].t if i + 1 < len(cues) else None
        window_end = next_cue_t if next_cue_t is not None else np.inf
        in_window = child_times[(child_times >= start) & (child_times < window_end)]
        last_child = in_window[-1] if in_window.size else None
        if next_cue_t is not None:
            if last_child is not None:
                end = (last_child + next_cue_t) / 2.0
            else:
                end = (start + next_cue_t) / 2.0
        else:
            anchor = last_child if last_child is not None else start
            end = anchor + FINAL_SEGMENT_TAIL
        bounds.append((start, end))
    return bounds


def segment_exercises(session: SessionRecord) -> list[ExerciseSegment]:
    """Cut a session into per-exercise segments on the resampled grid.

    Frames between a segment's midpoint end and the next cue are inter-trial
    idle time and belong to no exercise.  Scripted robot strikes attached to
    a cue (e.g. verbal-instruction targets) are merged into the strike list.
    """
    if not session.cues:
        raise EmptySession(f"session {session.subject_id} has no robot cues")
    cues = sorted(session.cues, key=lambda c: c.t)
    strikes = sorted(session.strikes, key=lambda s: s.t)
    bounds = _segment_bounds(cues, strikes)

    grid, values = resample(session.sample_times, session.sample_channels)
    segments = []
    for i, (cue, (start, end)) in enumerate(zip(cues, bounds)):
        sel = (grid >= start - 1e-9) & (grid < end - 1e-9)
        frames = [MotionFrame(t, v) for t, v in zip(grid[sel], values[sel])]
        seg_strikes = [s for s in strikes if start - 1e-9 <= s.t < end]
        seg_strikes.extend(
            StrikeEvent(t=s["t"], actor=Actor.ROBOT,
                        instrument=Instrument(s.get("instrument", "xylophone")),
                        bar=s["bar"])
            for s in cue.scripted_strikes)
        seg_strikes.sort(key=lambda s: s.t)
        if cue.exercise_type is ExerciseType.JOINT_ATTENTION:
            seg_strikes = [s for s in seg_strikes if s.actor is not Actor.CHILD]
        flags = frozenset(
            a.flag for a in session.annotations
            if a.start < end and a.end > start)
        segments.append(ExerciseSegment(
            subject_id=session.subject_id,
            group=session.group,
            exercise_type=cue.exercise_type,
            exercise_id=f"{session.subject_id}/ex{i:03d}",
            start_t=start,
            end_t=end,
            frames=frames,
            strikes=seg_strikes,
            annotations=flags,
        ))
    return segments


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    reason: str | None = None


def validate_segment(segment: ExerciseSegment) -> ValidationResult:
    """Exclusion rules: any annotation flag, or consecutive child strikes
    closer than one frame step.  The reason names the first rule that
    fired (annotation flags checked in their canonical order)."""
    for flag in ANNOTATION_FLAGS:
        if flag in segment.annotations:
            return ValidationResult(False, flag)
    child_times = [s.t for s in segment.child_strikes]
    for prev, cur in zip(child_times, child_times[1:]):
        if cur - prev < MIN_INTER_STRIKE:
            return ValidationResult(False, "inter-strike")
    return ValidationResult(True)


# ---------------------------------------------------------------------------
# fixed-length tensors


def pad_sequences(sequences, target_len: int):
    """Zero-pad a list of (T_i, C) arrays to (n, target_len, C) plus a
    boolean mask of real steps."""
    arrays = [np.asarray(s, dtype=np.float64) for s in sequences]
    if any(a.ndim != 2 for a in arrays):
        raise LengthError("sequences must be 2-D (steps, channels)")
    if any(a.shape[0] == 0 for a in arrays):
        raise LengthError("cannot pad an empty sequence")
    longest = max(a.shape[0] for a in arrays)
    if target_len < longest:
        raise LengthError(
            f"target_len {target_len} shorter than longest sequence {longest}")
    n_channels = arrays[0].shape[1]
    if any(a.shape[1] != n_channels for a in arrays):
        raise LengthError("sequences disagree on channel count")
    out = np.zeros((len(arrays), target_len, n_channels))
    mask = np.zeros((len(arrays), target_len), dtype=bool)
    for i, a in enumerate(arrays):
        out[i, :a.shape[0]] = a
        mask[i, :a.shape[0]] = True
    return out, mask


def one_hot_strikes(strikes: list[StrikeEvent], n_features: int,
                    max_strikes: int) -> np.ndarray:
    """Robot strike sequence as a (max_strikes, n_features) one-hot matrix;
    rows beyond the actual strike count stay all-zero."""
    if len(strikes) > max_strikes:
        raise LengthError(
            f"{len(strikes)} strikes exceed max_strikes {max_strikes}")
    out = np.zeros((max_strikes, n_features))
    for row, strike in enumerate(strikes):
        if not 1 <= strike.bar <= n_features:
            raise InvalidValue(
                f"bar {strike.bar} outside 1..{n_features}")
        out[row, strike.bar - 1] = 1.0
    return out


# ---------------------------------------------------------------------------
# file formats


def load_session(samples_path, sidecar_path) -> SessionRecord:
    """Read raw motion JSONL ({"t", "ch"} per line) plus the sidecar JSON
    describing the subject, cues and annotation intervals."""
    times, rows = [], []
    with open(samples_path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "t" not in rec:  # meta line
                continue
            times.append(float(rec["t"]))
            ch = rec["ch"]
            if len(ch) != N_CHANNELS:
                raise InvalidValue(
                    f"sample at t={rec['t']} has {len(ch)} channels")
            rows.append(ch)
    side = json.loads(Path(sidecar_path).read_text())
    cues = [RobotCue(t=float(c["t"]),
                     exercise_type=ExerciseType(c["exercise_type"]),
                     demo_end=c.get("demo_end"),
                     scripted_strikes=tuple(c.get("robot_strikes", [])))
            for c in side.get("cues", [])]
    annotations = [AnnotationInterval(a["flag"], float(a["start"]), float(a["end"]))
                   for a in side.get("annotations", [])]
    return SessionRecord(
        subject_id=side["subject_id"],
        group=Group(side["group"]),
        sample_times=np.asarray(times),
        sample_channels=(np.asarray(rows) if rows
                         else np.zeros((0, N_CHANNELS))),
        cues=cues,
        strikes=[],
        annotations=annotations,
    )


def dataset_rows(segments: list[ExerciseSegment]):
    """Yield one dict per time step in the canonical dataset row schema.

    Strikes are binned to the nearest grid step of their segment; when a
    robot and a child strike collide in one bin the child wins (child
    actions carry the classification signal).
    """
    for seg in segments:
        frame_times = np.array([f.t for f in seg.frames])
        slot: dict[int, StrikeEvent] = {}
        for s in sorted(seg.strikes, key=lambda s: (s.actor is Actor.CHILD, s.t)):
            if frame_times.size == 0:
                break
            k = int(np.argmin(np.abs(frame_times - s.t)))
            slot[k] = s  # later (child-preferred) entries overwrite
        for k, frame in enumerate(seg.frames):
            strike = slot.get(k)
            yield {
                "subject": seg.subject_id,
                "group": seg.group.value,
                "exercise_type": seg.exercise_type.value,
                "exercise_id": seg.exercise_id,
                "t": frame.t,
                "actor": strike.actor.value if strike else "none",
                "bar": strike.bar if strike else None,
                "ch": [float(v) for v in frame.channels],
            }


def write_dataset(path, segments: list[ExerciseSegment], meta: dict | None = None):
    with open(path, "w") as fh:
        if meta:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for row in dataset_rows(segments):
            fh.write(json.dumps(row) + "\n")


def load_dataset(path) -> list[ExerciseSegment]:
    """Rebuild segments from a dataset JSONL file.

    Strike times are recovered at grid resolution; segment boundaries are
    the first/last retained frame times.
    """
    by_id: dict[str, dict] = {}
    order: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_meta" in rec:
                continue
            ex = rec["exercise_id"]
            if ex not in by_id:
                by_id[ex] = {
                    "subject": rec["subject"], "group": rec["group"],
                    "exercise_type": rec["exercise_type"],
                    "frames": [], "strikes": []}
                order.append(ex)
            entry = by_id[ex]
            entry["frames"].append(MotionFrame(float(rec["t"]), rec["ch"]))
            if rec["actor"] != "none":
                exercise_type = ExerciseType(rec["exercise_type"])
                instrument = (Instrument.DRUM
                              if exercise_type is ExerciseType.DRUMMING
                              else Instrument.XYLOPHONE)
                entry["strikes"].append(StrikeEvent(
                    t=float(rec["t"]), actor=Actor(rec["actor"]),
                    instrument=instrument, bar=int(rec["bar"])))
    segments = []
    for ex in order:
        entry = by_id[ex]
        frames = sorted(entry["frames"], key=lambda f: f.t)
        segments.append(ExerciseSegment(
            subject_id=entry["subject"],
            group=Group(entry["group"]),
            exercise_type=ExerciseType(entry["exercise_type"]),
            exercise_id=ex,
            start_t=frames[0].t if frames else 0.0,
            end_t=frames[-1].t + STEP if frames else 0.0,
            frames=frames,
            strikes=sorted(entry["strikes"], key=lambda s: s.t),
        ))
    return segments


def counts_table(segments: list[ExerciseSegment]) -> dict:
    """Per exercise type and group: total segments, useful (valid) count and
    percentage — the dataset-overview table schema."""
    table: dict[str, dict] = {}
    for ex_type in ExerciseType:
        row = {}
        for group in Group:
            subset = [s for s in segments
                      if s.exercise_type is ex_type and s.group is group]
            useful = sum(validate_segment(s).valid for s in subset)
            row[group.value] = {
                "total": len(subset),
                "useful": useful,
                "useful_pct": round(100.0 * useful / len(subset), 1)
                              if subset else None,
            }
        table[ex_type.value] = row
    return table


def filter_valid(segments: list[ExerciseSegment]) -> list[ExerciseSegment]:
    return [s for s in segments if validate_segment(s).valid]
