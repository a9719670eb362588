"""Общие фикстуры тестов."""
# Импорт необходимых библиотек
import os
import sys
import tempfile
from pathlib import Path

import pytest

# Пакеты приложения импортируются из src/, как при запуске python src/main.py
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

# Логи тестов не должны попадать в рабочую директорию
os.environ.setdefault("BRAINSEG_LOG_DIR", tempfile.mkdtemp(prefix="brainseg-test-logs-"))
os.environ.setdefault("BRAINSEG_LOG_LEVEL", "WARNING")

from data.sampling import TrainingCase                   # noqa: E402
from data.volumedata import generate_phantom, save_case  # noqa: E402
from network.config import NetworkConfig                 # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.getenv("BRAINSEG_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set BRAINSEG_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def tiny_m1():
    return NetworkConfig.tiny("M1")


@pytest.fixture
def tiny_m2():
    return NetworkConfig.tiny("M2")


@pytest.fixture(scope="session")
def phantom():
    """Фантом 32^3: (MultimodalVolume, LabelMap)."""
    return generate_phantom(3, shape=(32, 32, 32))


@pytest.fixture(scope="session")
def training_cases():
    cases = []
    for seed in (11, 12):
        volume, labels = generate_phantom(seed, shape=(32, 32, 32))
        cases.append(TrainingCase.prepare(volume, labels))
    return cases


@pytest.fixture
def phantom_dataset(tmp_path):
    """Набор из двух случаев 32^3 в раскладке BRATS."""
    root = tmp_path / "dataset"
    for index, seed in enumerate((21, 22)):
        volume, labels = generate_phantom(seed, shape=(32, 32, 32))
        volume.case_id = f"case_{index:03d}"
        save_case(volume, labels, root / volume.case_id, description=f"phantom seed={seed}")
    return root
