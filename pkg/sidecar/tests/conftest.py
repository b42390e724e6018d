from pathlib import Path

import pytest

from mlm_sidecar.server import ModelService, ServerConfig, create_app

MODEL_DIR = Path(__file__).resolve().parents[1] / "models" / "bert-tiny"


@pytest.fixture(scope="session")
def service() -> ModelService:
    return ModelService(ServerConfig(model_path=str(MODEL_DIR)))


@pytest.fixture(scope="session")
def client(service):
    from fastapi.testclient import TestClient

    with TestClient(create_app(service)) as c:
        yield c
