import hashlib
import json

import numpy as np
import pytest

from fsmnet.errors import ConfigError
from fsmnet.phantom import (
    generate_corpus,
    generate_pair,
    gradient_correlation,
    read_corpus,
    read_pair,
    write_corpus,
)


def test_determinism_bit_identical():
    a = generate_pair(32, seed=123)
    b = generate_pair(32, seed=123)
    assert a.aux.tobytes() == b.aux.tobytes()
    assert a.tar.tobytes() == b.tar.tobytes()


def test_seed_sensitivity():
    a = generate_pair(32, seed=1)
    b = generate_pair(32, seed=2)
    assert a.tar.tobytes() != b.tar.tobytes()


def test_range_shape_and_spread():
    pair = generate_pair(48, seed=9)
    for img in (pair.aux, pair.tar):
        assert img.shape == (48, 48)
        assert img.dtype == np.float32
        assert img.min() >= 0.0 and img.max() <= 1.0
        assert img.std() > 1e-3


def test_contrasts_differ():
    pair = generate_pair(32, seed=5)
    assert np.abs(pair.aux - pair.tar).max() > 0.1


def test_gradient_correlation_median_over_100_seeds():
    corrs = [gradient_correlation(generate_pair(32, seed=s)) for s in range(100)]
    assert float(np.median(corrs)) > 0.5


def test_size_validation():
    with pytest.raises(ConfigError):
        generate_pair(8, seed=0)
    with pytest.raises(ConfigError):
        generate_pair(33, seed=0)


def _corpus_hash(pairs):
    digest = hashlib.sha256()
    for p in pairs:
        digest.update(p.aux.tobytes())
        digest.update(p.tar.tobytes())
    return digest.hexdigest()


def test_corpus_reproducible():
    a = generate_corpus(8, 32, master_seed=77)
    b = generate_corpus(8, 32, master_seed=77)
    assert _corpus_hash(a) == _corpus_hash(b)
    assert _corpus_hash(a) != _corpus_hash(generate_corpus(8, 32, master_seed=78))


def test_write_read_roundtrip(tmp_path):
    pairs = generate_corpus(5, 32, master_seed=3)
    manifest = write_corpus(pairs, tmp_path)
    assert manifest["count"] == 5
    assert len(list(tmp_path.glob("pair-*/tar.f32"))) == 5
    assert manifest["gradient_correlation_median"] > 0.5
    loaded = read_corpus(tmp_path)
    assert _corpus_hash(loaded) == _corpus_hash(pairs)
    assert [p.id for p in loaded] == [p.id for p in pairs]


def test_manifest_count_matches_files(tmp_path):
    pairs = generate_corpus(4, 32, master_seed=1)
    write_corpus(pairs, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["count"] == len(list(tmp_path.glob("pair-*")))


def test_truncated_file_error_names_file(tmp_path):
    pairs = generate_corpus(2, 32, master_seed=2)
    write_corpus(pairs, tmp_path)
    victim = tmp_path / pairs[1].id / "tar.f32"
    victim.write_bytes(victim.read_bytes()[:-4])
    with pytest.raises(ConfigError, match="tar.f32"):
        read_corpus(tmp_path)


def test_missing_file_error_names_file(tmp_path):
    pairs = generate_corpus(2, 32, master_seed=2)
    write_corpus(pairs, tmp_path)
    (tmp_path / pairs[0].id / "aux.f32").unlink()
    with pytest.raises(ConfigError, match="aux.f32"):
        read_pair(tmp_path / pairs[0].id)


def test_missing_manifest(tmp_path):
    with pytest.raises(ConfigError, match="manifest"):
        read_corpus(tmp_path)
