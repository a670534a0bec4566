"""Iteration schedules for the four training stages."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ValidationError

STAGES = ("mono", "tri", "lda", "sat")

DEFAULT_MAX_GAUSSIANS = (128, 512, 512, 512)


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


@dataclass(frozen=True)
class TrainSchedule:
    """Iteration counts per stage plus mixture-growth ceilings.

    The label renders as ``mono_tri_lda_sat``, e.g. ``5_3_2_2``.
    """

    mono_iters: int
    tri_iters: int
    lda_iters: int
    sat_iters: int
    max_gaussians: tuple[int, int, int, int] = DEFAULT_MAX_GAUSSIANS

    def __post_init__(self):
        for stage, count in zip(STAGES, self.iters):
            if count < 1:
                raise ValidationError(f"{stage} iterations must be >= 1, got {count}")
        for stage, cap in zip(STAGES, self.max_gaussians):
            if cap < 1:
                raise ValidationError(f"{stage} max gaussians must be >= 1, got {cap}")

    @property
    def iters(self) -> tuple[int, int, int, int]:
        return (self.mono_iters, self.tri_iters, self.lda_iters, self.sat_iters)

    @property
    def label(self) -> str:
        return "_".join(str(i) for i in self.iters)

    @classmethod
    def parse(cls, label: str, max_gaussians=DEFAULT_MAX_GAUSSIANS) -> "TrainSchedule":
        parts = label.strip().split("_")
        if len(parts) != 4:
            raise ValidationError(
                f"schedule label {label!r} must have four counts like '5_3_2_2'"
            )
        try:
            counts = [int(p) for p in parts]
        except ValueError:
            raise ValidationError(f"schedule label {label!r} has non-integer counts")
        return cls(*counts, max_gaussians=tuple(max_gaussians))

    def with_iters(self, iters) -> "TrainSchedule":
        mono, tri, lda, sat = iters
        return replace(
            self, mono_iters=mono, tri_iters=tri, lda_iters=lda, sat_iters=sat
        )

    def doubled(self) -> "TrainSchedule":
        return self.with_iters([2 * i for i in self.iters])

    def scale_stage(self, stage_index: int, multiplier: float) -> "TrainSchedule":
        """Multiply one stage's count; halving rounds up and floors at 1."""
        iters = list(self.iters)
        scaled = iters[stage_index] * multiplier
        iters[stage_index] = max(1, int(-(-scaled // 1)))  # ceil
        return self.with_iters(iters)

    def divided_by(self, copy_count: int) -> "TrainSchedule":
        """Divide every stage by ``copy_count``, nearest integer, floor 1."""
        if copy_count < 1:
            raise ValidationError(f"copy count must be >= 1, got {copy_count}")
        return self.with_iters(
            [max(1, _round_half_up(i / copy_count)) for i in self.iters]
        )
