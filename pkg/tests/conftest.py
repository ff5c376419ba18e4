import os

import pytest
from hypothesis import HealthCheck, settings

from busod import scenarios, simulator

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def clean_scenario():
    return simulator.generate(scenarios.clean())


@pytest.fixture(scope="session")
def clean_dir(tmp_path_factory, clean_scenario):
    d = tmp_path_factory.mktemp("clean")
    clean_scenario.write(d)
    return d


@pytest.fixture(scope="session")
def clean_run(tmp_path_factory, clean_dir):
    from busod.config import load_config
    from busod.pipeline import run_pipeline

    out = tmp_path_factory.mktemp("clean_run")
    return out, run_pipeline(load_config(clean_dir / "pipeline.yaml"), out)
