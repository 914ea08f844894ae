import pathlib

import pytest

PROGRAMS = pathlib.Path(__file__).resolve().parents[1] / "src" / "scjcheck" / "programs"


def program_text(name: str) -> str:
    return (PROGRAMS / name).read_text(encoding="utf-8")


def program_path(name: str) -> str:
    return str(PROGRAMS / name)


@pytest.fixture(scope="session")
def flatbuffer_text() -> str:
    return program_text("flatbuffer.scj2")
