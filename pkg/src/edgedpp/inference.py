"""Classification outcomes: realized entropy and correctness per pattern.

The encoding profile gives, per level, the surrogate mean output entropy
phi(n) and the expected accuracy. When a pattern is classified we realize an
entropy sample (optionally jittered by Gaussian noise, clamped to the valid
range) and a Bernoulli correctness draw at the level's accuracy. Both consume
the device's inference substream.
"""

from __future__ import annotations

import csv
import functools
import importlib.resources

from numpy.random import Generator

from edgedpp.model import ConfigError, EncodingLevel, EncodingProfile, ProfileError
from edgedpp.queueing import PatternRecord


@functools.lru_cache(maxsize=128)
def _level_table(profile: EncodingProfile) -> dict[int, EncodingLevel]:
    return {lv.level_id: lv for lv in profile.levels}


def realize_entropy(
    level_id: int, profile: EncodingProfile, noise_sigma: float, gen: Generator
) -> float:
    """Entropy sample for one classified pattern, clamped to [0, max_entropy]."""
    level = profile.by_id(level_id)
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if noise_sigma == 0.0:
        return level.entropy
    value = level.entropy + noise_sigma * gen.standard_normal()
    return min(max(value, 0.0), profile.max_entropy)


def realize_correctness(level_id: int, profile: EncodingProfile, gen: Generator) -> bool:
    """Bernoulli top-1 correctness draw at the level's expected accuracy."""
    level = profile.by_id(level_id)
    return bool(gen.random() < level.accuracy)


def classify_batch(
    records: list[PatternRecord],
    profile: EncodingProfile,
    noise_sigma: float,
    gen: Generator,
    slot: int,
) -> None:
    """Realize outcomes for every record classified this slot, in place.

    Stream discipline: one uniform per record for correctness is always drawn
    first, then one normal per record if noise_sigma > 0, so the correctness
    trajectory does not depend on whether entropy noise is enabled.
    """
    if not records:
        return
    table = _level_table(profile)
    uniforms = gen.random(len(records))
    normals = gen.standard_normal(len(records)) if noise_sigma > 0 else None
    for i, rec in enumerate(records):
        if rec.level_id is None or rec.level_id not in table:
            raise ProfileError(f"record has unknown level id {rec.level_id}")
        level = table[rec.level_id]
        rec.classified_slot = slot
        rec.correct = bool(uniforms[i] < level.accuracy)
        if normals is None:
            rec.entropy = level.entropy
        else:
            value = level.entropy + noise_sigma * float(normals[i])
            rec.entropy = min(max(value, 0.0), profile.max_entropy)


def load_profile_csv(path) -> EncodingProfile:
    """Read a profile table from CSV with columns level_id, bits, entropy, accuracy.

    Lines starting with '#' are comments. Rows must already be sorted by bits.
    Malformed rows raise ConfigError; a parseable table that violates the
    monotonicity contract raises ProfileError from the profile constructor.
    """
    levels = []
    with open(path, newline="") as fh:
        rows = (line for line in fh if not line.lstrip().startswith("#"))
        for row in csv.DictReader(rows):
            try:
                levels.append(
                    EncodingLevel(
                        level_id=int(row["level_id"]),
                        bits=float(row["bits"]),
                        entropy=float(row["entropy"]),
                        accuracy=float(row["accuracy"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad profile row {row!r}: {exc}") from exc
    return EncodingProfile(levels=tuple(levels))


def default_profile() -> EncodingProfile:
    """The packaged nine-level profile spanning entropy 0.88 down to 0.27 nats."""
    ref = importlib.resources.files("edgedpp").joinpath("data/default_profile.csv")
    with importlib.resources.as_file(ref) as path:
        return load_profile_csv(path)
