import pathlib

import pytest

from catverify import parse_contracts, parse_program

CORPUS = pathlib.Path(__file__).parent / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


@pytest.fixture(scope="session")
def files_program():
    """The file-handling program: do/operate/closeF plus an init block."""
    return parse_program(corpus_text("files.async"))


@pytest.fixture(scope="session")
def files_contracts():
    return {c.name: c for c in parse_contracts(corpus_text("files.cat"))}


@pytest.fixture(scope="session")
def fanout_program():
    """Asynchronous fan-out: m invokes m1 and m2, m1 invokes m3 and m4."""
    return parse_program(corpus_text("fanout.async"))
