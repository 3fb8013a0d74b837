import pytest

from scalab import corpus


@pytest.fixture(scope="session")
def blank():
    return corpus.blank_noise()


@pytest.fixture(scope="session")
def blank_xor():
    return corpus.blank_xor()


@pytest.fixture(scope="session")
def biased():
    return corpus.biased_noise()


@pytest.fixture(scope="session")
def identity():
    return corpus.identity()


@pytest.fixture(scope="session")
def constant0():
    return corpus.constant_zero()


@pytest.fixture(scope="session")
def xor():
    return corpus.xor_ca()


@pytest.fixture(scope="session")
def parity():
    return corpus.parity()


@pytest.fixture(scope="session")
def particle():
    return corpus.particle()


@pytest.fixture(scope="session")
def deficit():
    return corpus.deficit_repair()


@pytest.fixture(scope="session")
def full_corpus():
    return corpus.corpus()
