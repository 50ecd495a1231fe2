from pathlib import Path

import pytest

from plan2bn.compiler import CptOverlay, compile_library
from plan2bn.plan_model import parse_plan_file

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixture_text():
    return {p.name: p.read_text() for p in sorted(FIXTURES.glob("*.plan"))}


@pytest.fixture(scope="session")
def recon_lib():
    return parse_plan_file((FIXTURES / "recon.plan").read_text())


@pytest.fixture(scope="session")
def recon_overlay():
    return CptOverlay.load(FIXTURES / "recon_overlay.json")


@pytest.fixture(scope="session")
def recon(recon_lib, recon_overlay):
    return compile_library(recon_lib, recon_overlay)
