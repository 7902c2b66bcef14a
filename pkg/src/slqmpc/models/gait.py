"""Gait schedules and swing profiles.

A gait is a predefined function of time mapping each leg to stance or swing.
Cyclic gaits repeat per-leg swing windows after a full-stance lead-in;
aperiodic schedules (e.g. a single step) list absolute swing windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..ocp import ModeSchedule, TimeGrid
from .quadruped import LEG_NAMES

_EPS = 1e-9


@dataclass(frozen=True)
class SwingProfile:
    """Vertical foot trajectory over one swing window.

    The height follows apex * sin^2(pi * tau / duration), so the normal
    velocity is a smooth bump that integrates to zero net height: the foot
    returns to the surface at touch-down.
    """

    lift_off: float
    touch_down: float
    apex_height: float = 0.1

    def __post_init__(self) -> None:
        if self.touch_down <= self.lift_off:
            raise ValueError("touch_down must come after lift_off")

    @property
    def duration(self) -> float:
        return self.touch_down - self.lift_off

    def height(self, t: float) -> float:
        tau = np.clip(t - self.lift_off, 0.0, self.duration)
        return self.apex_height * math.sin(math.pi * tau / self.duration) ** 2

    def velocity(self, t: float) -> float:
        tau = t - self.lift_off
        if tau < 0.0 or tau > self.duration:
            return 0.0
        return (
            self.apex_height * math.pi / self.duration
            * math.sin(2.0 * math.pi * tau / self.duration)
        )


@dataclass(frozen=True)
class GaitSchedule:
    """Per-leg swing windows, optionally repeated with a cycle period.

    ``swing_windows[leg]`` holds (start, end) pairs. For cyclic gaits they
    are phases within [0, cycle) applied after ``lead_in`` seconds of full
    stance; for aperiodic gaits (cycle None) they are absolute times.
    """

    name: str
    swing_windows: tuple[tuple[tuple[float, float], ...], ...]
    cycle: Optional[float] = None
    lead_in: float = 0.0
    swing_height: float = 0.08

    def __post_init__(self) -> None:
        if len(self.swing_windows) != 4:
            raise ValueError("expected swing windows for exactly 4 legs")
        if self.cycle is not None:
            # windows may wrap past the cycle end (b > cycle); they stay one
            # continuous swing
            for leg, windows in enumerate(self.swing_windows):
                for a, b in windows:
                    if not (0.0 <= a < self.cycle and a < b <= a + self.cycle + _EPS):
                        raise ValueError(
                            f"swing window ({a}, {b}) of leg {LEG_NAMES[leg]} "
                            f"invalid for cycle {self.cycle}"
                        )

    def in_stance(self, leg: int, t: float) -> bool:
        return self._active_window(leg, t) is None

    def contact_flags(self, t: float) -> tuple[bool, ...]:
        return tuple(self.in_stance(leg, t) for leg in range(4))

    def _active_window(self, leg: int, t: float) -> Optional[tuple[float, float]]:
        """Absolute (lift_off, touch_down) containing t, None when in stance.

        Windows are right-open: at exact touch-down the leg is in stance.
        """
        if self.cycle is None:
            for a, b in self.swing_windows[leg]:
                if a <= t < b:
                    return (a, b)
            return None
        if t < self.lead_in:
            return None
        local = (t - self.lead_in) % self.cycle
        base = t - local
        for a, b in self.swing_windows[leg]:
            if a <= local < b:
                return (base + a, base + b)
            # tail of a window that wrapped past the previous cycle end
            if a <= local + self.cycle < b and base - self.cycle + a >= self.lead_in - _EPS:
                return (base - self.cycle + a, base - self.cycle + b)
        return None

    def swing_profile(self, leg: int, t: float) -> Optional[SwingProfile]:
        window = self._active_window(leg, t)
        if window is None:
            return None
        return SwingProfile(window[0], window[1], self.swing_height)

    def absolute_windows(self, leg: int, t_start: float, t_end: float):
        """Absolute (lift_off, touch_down) windows intersecting [t_start, t_end]."""
        out: list[tuple[float, float]] = []
        if self.cycle is None:
            candidates = list(self.swing_windows[leg])
        else:
            candidates = []
            first = int(math.floor((t_start - self.lead_in) / self.cycle)) - 1
            last = int(math.ceil((t_end - self.lead_in) / self.cycle)) + 1
            for cyc in range(first, last + 1):
                base = self.lead_in + cyc * self.cycle
                for a, b in self.swing_windows[leg]:
                    if base + a >= self.lead_in - _EPS:
                        candidates.append((base + a, base + b))
        for a, b in sorted(candidates):
            if b > t_start - _EPS and a < t_end + _EPS:
                out.append((a, b))
        return out

    def switch_times(self, t_start: float, t_end: float) -> np.ndarray:
        """Sorted unique times in (t_start, t_end) where any leg changes mode."""
        events: set[float] = set()
        for leg in range(4):
            if self.cycle is None:
                candidates = [e for w in self.swing_windows[leg] for e in w]
            else:
                candidates = []
                first = int(math.floor((t_start - self.lead_in) / self.cycle)) - 1
                last = int(math.ceil((t_end - self.lead_in) / self.cycle)) + 1
                for cyc in range(first, last + 1):
                    base = self.lead_in + cyc * self.cycle
                    for a, b in self.swing_windows[leg]:
                        if base + a >= self.lead_in - _EPS:
                            candidates.extend((base + a, base + b))
            events.update(t for t in candidates if t_start + _EPS < t < t_end - _EPS)
        return np.array(sorted(events))

    def mode_schedule(self, grid: TimeGrid) -> ModeSchedule:
        """Contact-flag schedule over the grid span, snapped to grid nodes."""
        times = self.switch_times(grid.t0, grid.t_end)
        switch_times = tuple(float(t) for t in times)
        modes = [self.contact_flags(grid.t0)]
        for t in switch_times:
            modes.append(self.contact_flags(t))
        raw = ModeSchedule(switch_times, tuple(modes))
        return raw.snapped_to(grid)


def stance_gait() -> GaitSchedule:
    """All four legs on the ground for the whole horizon."""
    return GaitSchedule(name="stance", swing_windows=((), (), (), ()))


def single_step_gait(
    leg: str, lift_off: float, touch_down: float, swing_height: float = 0.1
) -> GaitSchedule:
    """Full stance except one leg swinging over an absolute time window."""
    idx = LEG_NAMES.index(leg)
    windows: list[tuple[tuple[float, float], ...]] = [(), (), (), ()]
    windows[idx] = ((lift_off, touch_down),)
    return GaitSchedule(
        name=f"step_{leg}", swing_windows=tuple(windows), swing_height=swing_height
    )


def trot_gait(
    cycle: float = 0.8, lead_in: float = 0.3, swing_height: float = 0.08
) -> GaitSchedule:
    """Diagonal pairs alternate: (LF, RH) swing in the first half cycle,
    (RF, LH) in the second."""
    half = cycle / 2.0
    return GaitSchedule(
        name="trot",
        swing_windows=(
            ((0.0, half),),      # LF
            ((half, cycle),),    # RF
            ((half, cycle),),    # LH
            ((0.0, half),),      # RH
        ),
        cycle=cycle,
        lead_in=lead_in,
        swing_height=swing_height,
    )


def pace_gait(
    cycle: float = 0.8, lead_in: float = 0.3, swing_height: float = 0.08
) -> GaitSchedule:
    """Lateral pairs alternate: (LF, LH) then (RF, RH)."""
    half = cycle / 2.0
    return GaitSchedule(
        name="pace",
        swing_windows=(
            ((0.0, half),),      # LF
            ((half, cycle),),    # RF
            ((0.0, half),),      # LH
            ((half, cycle),),    # RH
        ),
        cycle=cycle,
        lead_in=lead_in,
        swing_height=swing_height,
    )


def dynamic_walk_gait(
    cycle: float = 1.0, lead_in: float = 0.3, swing_height: float = 0.08
) -> GaitSchedule:
    """Walk alternating two- and three-legged support.

    One leg swings for 3/8 of the cycle with lift-offs spread a quarter
    cycle apart in the order LH, LF, RH, RF, so successive swings overlap
    for one eighth of the cycle (two feet down) and the gaps between them
    leave three feet down. The RF window wraps past the cycle end.
    """
    swing = 0.375 * cycle
    offsets = {"LH": 0.0, "LF": 0.25 * cycle, "RH": 0.5 * cycle, "RF": 0.75 * cycle}
    return GaitSchedule(
        name="dynamic_walk",
        swing_windows=tuple(
            ((offsets[leg], offsets[leg] + swing),) for leg in LEG_NAMES
        ),
        cycle=cycle,
        lead_in=lead_in,
        swing_height=swing_height,
    )


GAIT_FACTORIES = {
    "stance": stance_gait,
    "trot": trot_gait,
    "pace": pace_gait,
    "dynamic_walk": dynamic_walk_gait,
}
