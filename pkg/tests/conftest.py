import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from isacdet.waveform import FrameConfig  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def baseline_frame():
    return FrameConfig(fc=28e9, df=120e3, n=512, m=1, t_cp=1.666e-6, t_sym=10e-6)


@pytest.fixture
def small_frame():
    # N=8, M=4 frame with the 28 GHz carrier; t_cp chosen so the grid has 4 delays
    df = 120e3
    return FrameConfig(fc=28e9, df=df, n=8, m=4, t_cp=4 / (8 * df) + 1e-12)


@pytest.fixture
def config_dir():
    return CONFIG_DIR


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
