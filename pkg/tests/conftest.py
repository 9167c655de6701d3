# Ensure project root is on sys.path for test imports
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from quad_eit.config import load_config  # noqa: E402

CONFIG_DIR = ROOT / 'config'


@pytest.fixture(scope='session')
def set1_run():
    return load_config(CONFIG_DIR / 'set1.json')


@pytest.fixture(scope='session')
def set2_run():
    return load_config(CONFIG_DIR / 'set2.json')
