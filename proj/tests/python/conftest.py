import json
import os
import pathlib
import shutil
import subprocess

import pytest

SOURCE_DIR = pathlib.Path(os.environ.get("COVBOUND_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def source_dir():
    return SOURCE_DIR


@pytest.fixture(scope="session")
def exe():
    path = os.environ.get("COVBOUND_EXE") or shutil.which("covbound")
    if not path or not os.path.exists(path):
        pytest.skip("covbound executable not available")
    return path


@pytest.fixture(scope="session")
def schema_validator():
    jsonschema = pytest.importorskip("jsonschema")
    from referencing import Registry, Resource

    schemas = {}
    for p in (SOURCE_DIR / "schemas").glob("*.schema.json"):
        schemas[p.name] = json.loads(p.read_text())
    registry = Registry().with_resources(
        (name, Resource.from_contents(doc)) for name, doc in schemas.items())

    def validate(doc, name):
        cls = jsonschema.validators.validator_for(schemas[name])
        cls(schemas[name], registry=registry).validate(doc)

    return validate


@pytest.fixture
def cli(exe):
    def run(*args, check=True):
        proc = subprocess.run([exe, *map(str, args)], capture_output=True, text=True)
        if check:
            assert proc.returncode == 0, proc.stderr
        return proc

    return run
