"""Shared fixtures: bundled jet files, default settings and seeded instance factories"""

import sys
from pathlib import Path

import pytest

# Add the project root to Python path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.append(str(project_root))

from sobolev_jets.core.jets import load_field
from sobolev_jets.flows.extension_flow import run_extension_pipeline
from sobolev_jets.settings import load_settings
from sobolev_jets.tools.instance_tool import generate_instance

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def settings(monkeypatch):
    for name in ("SOBOLEV_JETS_CONFIG", "SOBOLEV_JETS_OUTPUT_DIR", "SOBOLEV_JETS_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return load_settings()


@pytest.fixture
def two_point_field():
    """E = {0, 1}, f = {0, 1}, m = 1, p = 2"""
    return load_field(FIXTURES / "two_point_m1.json")


@pytest.fixture
def singleton_field():
    return load_field(FIXTURES / "singleton_m2.json")


@pytest.fixture
def linear_field():
    """Jets of G(x) = 1 + 2x on three points, generator recorded"""
    return load_field(FIXTURES / "linear_m2.json")


@pytest.fixture
def make_field():
    def factory(seed=0, n=1, m=1, points=4, p=None, polynomial=False):
        return generate_instance(seed, n, m, points, p, polynomial)

    return factory


@pytest.fixture
def build():
    """Run the construction pipeline and return its state"""

    def factory(field, settings, stop_after=None):
        return run_extension_pipeline(field, settings, stop_after)

    return factory
