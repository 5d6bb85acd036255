"""Turn exercise segments into the padded tensors the classifiers consume:
child-strike one-hots with segment-relative timestamps, and fixed-length
motion sequences with validity masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import (ExerciseSegment, ExerciseType, Group, N_CHANNELS,
                       pad_sequences, strike_feature_count)
from ..errors import EmptyCategory, LengthError

GROUP_LABELS = {Group.TD: 0, Group.ASD: 1}
LABEL_NAMES = ("TD", "ASD")


@dataclass
class SegmentFeatures:
    """Padded per-segment inputs for one exercise type.

    `strikes` is (n, S, F) one-hot over child strike targets with matching
    (n, S) timestamps and mask; all three are None for joint attention.
    `motion` is (n, T, 18) raw (unstandardized) with an (n, T) mask.
    """

    exercise_type: ExerciseType
    sample_ids: list[str]
    subject_ids: list[str]
    y: np.ndarray
    motion: np.ndarray
    motion_mask: np.ndarray
    strikes: np.ndarray | None = None
    strike_times: np.ndarray | None = None
    strike_mask: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_strike_features(self) -> int | None:
        return None if self.strikes is None else self.strikes.shape[2]

    @property
    def max_strikes(self) -> int | None:
        return None if self.strikes is None else self.strikes.shape[1]

    @property
    def max_frames(self) -> int:
        return self.motion.shape[1]

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == 0)), int(np.sum(self.y == 1))

    def subset(self, indices) -> "SegmentFeatures":
        idx = np.asarray(indices)
        return SegmentFeatures(
            exercise_type=self.exercise_type,
            sample_ids=[self.sample_ids[i] for i in idx],
            subject_ids=[self.subject_ids[i] for i in idx],
            y=self.y[idx],
            motion=self.motion[idx],
            motion_mask=self.motion_mask[idx],
            strikes=None if self.strikes is None else self.strikes[idx],
            strike_times=None if self.strike_times is None else self.strike_times[idx],
            strike_mask=None if self.strike_mask is None else self.strike_mask[idx],
        )


def featurize(segments: list[ExerciseSegment], exercise_type: ExerciseType,
              max_strikes: int | None = None,
              max_frames: int | None = None) -> SegmentFeatures:
    """Build SegmentFeatures from the segments of one exercise type.

    Maximum lengths default to the dataset maxima; passing larger values
    appends masked padding (predictions must be invariant to that).
    """
    subset = [s for s in segments if s.exercise_type is exercise_type]
    if not subset:
        raise EmptyCategory(f"no segments of type {exercise_type.value}")
    subset = sorted(subset, key=lambda s: s.exercise_id)
    if any(not s.frames for s in subset):
        raise LengthError("segment without frames cannot be featurized")

    motion, motion_mask = pad_sequences(
        [s.frame_matrix() for s in subset],
        max_frames if max_frames is not None
        else max(len(s.frames) for s in subset))

    n_features = strike_feature_count(exercise_type)
    strikes = strike_times = strike_mask = None
    if n_features > 0:
        cap = max_strikes if max_strikes is not None else max(
            [len(s.child_strikes) for s in subset] + [1])
        n = len(subset)
        strikes = np.zeros((n, cap, n_features))
        strike_times = np.zeros((n, cap))
        strike_mask = np.zeros((n, cap), dtype=bool)
        for i, seg in enumerate(subset):
            events = seg.child_strikes
            if len(events) > cap:
                raise LengthError(
                    f"{seg.exercise_id} has {len(events)} child strikes, "
                    f"max_strikes is {cap}")
            for j, ev in enumerate(events):
                strikes[i, j, ev.bar - 1] = 1.0
                strike_times[i, j] = ev.t - seg.start_t
                strike_mask[i, j] = True

    return SegmentFeatures(
        exercise_type=exercise_type,
        sample_ids=[s.exercise_id for s in subset],
        subject_ids=[s.subject_id for s in subset],
        y=np.array([GROUP_LABELS[s.group] for s in subset], dtype=np.intp),
        motion=motion,
        motion_mask=motion_mask,
        strikes=strikes,
        strike_times=strike_times,
        strike_mask=strike_mask,
    )


def summary_features(features: SegmentFeatures, modality: str = "combined"
                     ) -> np.ndarray:
    """Fixed-length vectors for the classical baseline: child strike count
    and inter-strike interval stats, plus per-channel motion mean/std/min/max
    over valid steps."""
    if modality not in ("strikes", "motion", "combined"):
        raise ValueError(f"unknown modality {modality!r}")
    blocks = []
    if modality in ("strikes", "combined"):
        n = features.n_samples
        strike_block = np.zeros((n, 3))
        if features.strike_mask is not None:
            for i in range(n):
                times = features.strike_times[i][features.strike_mask[i]]
                strike_block[i, 0] = times.size
                if times.size >= 2:
                    gaps = np.diff(np.sort(times))
                    strike_block[i, 1] = gaps.mean()
                    strike_block[i, 2] = gaps.std()
        blocks.append(strike_block)
    if modality in ("motion", "combined"):
        n = features.n_samples
        motion_block = np.zeros((n, 4 * N_CHANNELS))
        for i in range(n):
            valid = features.motion[i][features.motion_mask[i]]
            motion_block[i] = np.concatenate([
                valid.mean(axis=0), valid.std(axis=0),
                valid.min(axis=0), valid.max(axis=0)])
        blocks.append(motion_block)
    return np.concatenate(blocks, axis=1)
