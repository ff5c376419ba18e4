"""Named scenario presets used by the CLI, scripts and acceptance tests."""

from __future__ import annotations

from typing import Callable

from busod.errors import ConfigError
from busod.simulator import (
    IllegalStopSpec,
    PassengerSpec,
    RouteStop,
    ScenarioConfig,
    Stressors,
)


def _route(arrivals: list[float], dwell: float) -> tuple[RouteStop, ...]:
    return tuple(
        RouteStop(f"S{i + 1}", a, dwell, name=f"Stop {i + 1}") for i, a in enumerate(arrivals)
    )


def _trips(pairs: list[tuple[str, str, int]], usage: str = "standard") -> tuple[PassengerSpec, ...]:
    return tuple(PassengerSpec(b, a, usage) for b, a, n in pairs for _ in range(n))


def clean(seed: int = 0) -> ScenarioConfig:
    """Ten passengers over four stops, one person in the ROI at a time."""
    return ScenarioConfig(
        seed=seed,
        name="clean",
        route=_route([40, 170, 300, 430], 30),
        passengers=_trips(
            [("S1", "S2", 2), ("S1", "S3", 2), ("S1", "S4", 1), ("S2", "S3", 2), ("S2", "S4", 1), ("S3", "S4", 2)]
        ),
    )


def loiterer(seed: int = 0, loiterers: int = 2) -> ScenarioConfig:
    """Five true exits plus people swinging across the rear door line while it is closed."""
    return ScenarioConfig(
        seed=seed,
        name="loiterer",
        route=_route([40, 250, 460], 30),
        passengers=_trips([("S1", "S2", 3), ("S1", "S3", 1), ("S2", "S3", 1)]),
        stressors=Stressors(loiterer_count=loiterers),
    )


def crowded(seed: int = 0, gaps: tuple[int, ...] = (30, 45), head_stream: bool = False) -> ScenarioConfig:
    """Peak-hour stops: bystanders in the ROI, slow walkers, occlusions at the line."""
    return ScenarioConfig(
        seed=seed,
        name="crowded",
        route=_route([40, 180, 320, 460], 40),
        passengers=_trips(
            [("S1", "S2", 4), ("S1", "S3", 4), ("S1", "S4", 3), ("S2", "S3", 3), ("S2", "S4", 3), ("S3", "S4", 5)]
        ),
        walk_speed=60.0,
        crossing_spacing_s=1.5,
        stressors=Stressors(
            crowding_level=4,
            occlusion_gap_frames=gaps,
            occlusion_fraction=0.6,
            full_body_miss_rate=0.1,
            embedding_noise_sigma=0.02,
            head_stream=head_stream,
        ),
    )


def modality_shift(seed: int = 0, shift: bool = True) -> ScenarioConfig:
    """Journeys spanning a colour to monochrome switch halfway through."""
    return ScenarioConfig(
        seed=seed,
        name="modality_shift" if shift else "modality_none",
        route=_route([40, 170, 300, 430], 40),
        passengers=_trips(
            [("S1", "S2", 3), ("S1", "S3", 3), ("S1", "S4", 2), ("S2", "S3", 3), ("S2", "S4", 3), ("S3", "S4", 2)]
        ),
        stressors=Stressors(
            modality_shift_times=(265.0,) if shift else (),
            embedding_noise_sigma=0.02,
        ),
    )


def nonstandard(seed: int = 0) -> ScenarioConfig:
    """Reverse door use plus one mid-route halt and one open-door crawl."""
    base = _trips([("S1", "S2", 2), ("S1", "S3", 1), ("S2", "S3", 1)])
    odd = _trips([("S1", "S2", 1), ("S2", "S3", 1)], usage="reverse")
    illegal = _trips([("ILLEGAL-1", "S3", 2), ("ILLEGAL-2", "S3", 2)])
    return ScenarioConfig(
        seed=seed,
        name="nonstandard",
        route=_route([40, 200, 500], 30),
        passengers=base + odd + illegal,
        stressors=Stressors(
            illegal_stop_specs=(
                IllegalStopSpec("S1", 40.0, 20.0, "halt"),
                IllegalStopSpec("S2", 130.0, 20.0, "crawl"),
            ),
            ocr_error_rate=0.02,
        ),
    )


PRESETS: dict[str, Callable[..., ScenarioConfig]] = {
    "clean": clean,
    "loiterer": loiterer,
    "crowded": crowded,
    "modality_shift": modality_shift,
    "nonstandard": nonstandard,
}


def preset(name: str, seed: int = 0) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return PRESETS[name](seed)


def stressor_suite(seed: int = 0) -> list[ScenarioConfig]:
    return [PRESETS[n](seed) for n in PRESETS]
