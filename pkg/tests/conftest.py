import pytest

from fsmnet.phantom import generate_corpus, write_corpus


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """16 pairs of 32x32 phantoms, shared across trainer/CLI tests."""
    directory = tmp_path_factory.mktemp("corpus")
    write_corpus(generate_corpus(16, 32, master_seed=1234), directory)
    return directory
