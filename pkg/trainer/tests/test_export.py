"""Byte-level file format checks and the export pipeline on a small model."""

import struct
import subprocess
import sys

import numpy as np
import pytest
import torch

from dpn_trainer.config import EpisodeSpec, ModelConfig
from dpn_trainer.data import CharClass
from dpn_trainer.export import (
    embed_classes,
    episode_distance_rows,
    export_distance_matrices,
    export_embeddings,
    read_demb,
    write_demb,
    write_distance_csv,
)
from dpn_trainer.model import DPN


@pytest.fixture(scope="module")
def classes():
    rng = np.random.default_rng(7)
    return tuple(
        CharClass(alphabet="a", name=f"c{i}",
                  images=rng.integers(0, 2, (8, 28, 28), dtype=np.uint8))
        for i in range(6)
    )


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(0)
    m = DPN(ModelConfig(n=64, channels=4))
    m.eval()
    return m


class TestDembFormat:
    def test_golden_bytes(self, tmp_path):
        path = tmp_path / "one.demb"
        bits = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
        write_demb(path, [(7, bits)], n=5)
        expected = (b"DEMB" + struct.pack("<HII", 1, 5, 1)
                    + struct.pack("<I", 7) + bytes([0b01101]))
        assert path.read_bytes() == expected

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        records = [(int(label), rng.integers(0, 2, 1024, dtype=np.uint8))
                   for label in (0, 3, 2**32 - 1)]
        path = tmp_path / "r.demb"
        write_demb(path, records, n=1024)
        n, back = read_demb(path)
        assert n == 1024
        for (la, ba), (lb, bb) in zip(records, back):
            assert la == lb and np.array_equal(ba, bb)

    def test_wrong_length_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="shape"):
            write_demb(tmp_path / "bad.demb",
                       [(0, np.zeros(4, dtype=np.uint8))], n=5)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.demb"
        path.write_bytes(b"NOPE" + bytes(10))
        with pytest.raises(ValueError, match="magic"):
            read_demb(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "v9.demb"
        path.write_bytes(b"DEMB" + struct.pack("<HII", 9, 5, 0))
        with pytest.raises(ValueError, match="version"):
            read_demb(path)


class TestDistanceCsv:
    def test_rows_written_verbatim(self, tmp_path):
        path = tmp_path / "d.csv"
        write_distance_csv(path, [[3, 5, 0], [2, 9, 1]])
        assert path.read_text() == "3,5,0\n2,9,1\n"

    def test_episode_rows_shape(self, model, classes):
        spec = EpisodeSpec(way=5, shot=1, queries=2)
        rows = episode_distance_rows(model, classes, spec, episodes=3, seed=0)
        assert len(rows) == 3 * 5 * 2
        for row in rows:
            assert len(row) == 6
            assert all(0 <= d <= 64 for d in row[:5])
            assert 0 <= row[5] < 5

    def test_rows_deterministic(self, model, classes):
        spec = EpisodeSpec(way=5, shot=1, queries=2)
        a = episode_distance_rows(model, classes, spec, episodes=2, seed=3)
        b = episode_distance_rows(model, classes, spec, episodes=2, seed=3)
        assert a == b


class TestExportPipeline:
    def test_embeddings_file(self, model, classes, tmp_path):
        emb = embed_classes(model, classes)
        assert emb.shape == (6, 64)
        assert set(np.unique(emb)) <= {0, 1}
        path = tmp_path / "emb.demb"
        export_embeddings(model, classes, path)
        n, records = read_demb(path)
        assert n == 64
        assert [label for label, _ in records] == list(range(6))
        assert all(np.array_equal(bits, emb[i])
                   for i, (_, bits) in enumerate(records))

    def test_distance_matrices_layout(self, model, classes, tmp_path):
        spec = EpisodeSpec(way=5, shot=1, queries=2)
        combined = export_distance_matrices(
            model, classes, spec, episodes=3, out_dir=tmp_path, seed=0)
        per_episode = [tmp_path / f"episode_{e:03d}.csv" for e in range(3)]
        assert all(p.exists() for p in per_episode)
        lines = [p.read_text().splitlines() for p in per_episode]
        assert [len(ls) for ls in lines] == [10, 10, 10]
        combined_lines = (tmp_path / "combined.csv").read_text().splitlines()
        assert str(combined).endswith("combined.csv")
        assert combined_lines == [l for ls in lines for l in ls]


class TestPrimaryToolkitInterop:
    def test_analyze_parses_export(self, classes, tmp_path):
        """The matching toolkit's CLI accepts an exported matrix unchanged."""
        torch.manual_seed(0)
        model = DPN(ModelConfig(n=1024, channels=4))
        model.eval()
        spec = EpisodeSpec(way=5, shot=1, queries=2)
        combined = export_distance_matrices(
            model, classes, spec, episodes=2, out_dir=tmp_path, seed=0)
        proc = subprocess.run(
            [sys.executable, "-m", "rcph.cli", "analyze",
             "--dist-matrix", str(combined), "--p", "0.05", "--m", "1000"],
            capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0, proc.stderr
        assert "aggregate" in proc.stdout
