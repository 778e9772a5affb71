"""Bundle loading, suggestion semantics, the HTTP surface, and the CLI."""

from __future__ import annotations

import json
import shutil

import numpy as np
import pytest

from nextline import cli
from nextline.errors import ArtifactError, InputError, IntegrityError
from nextline.pipeline import ARTIFACT_FILES, MANIFEST_NAME
from nextline.service import create_app, load_bundle, suggest
from nextline.vecindex import build_index, save_index

from conftest import CHAIN_LINES


class TestLoadBundle:
    def test_loads_and_reports_stats(self, small_bundle):
        stats = small_bundle.stats()
        assert stats["vocab"] == len(CHAIN_LINES)
        assert stats["dim"] == 128
        assert stats["artifact_bytes"]["total"] > 0

    def test_missing_artifact_named(self, small_bundle_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(small_bundle_dir, broken)
        (broken / ARTIFACT_FILES["pca_model"]).unlink()
        with pytest.raises(ArtifactError) as exc_info:
            load_bundle(broken)
        assert "pca_model" in str(exc_info.value)

    def test_missing_manifest(self, small_bundle_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(small_bundle_dir, broken)
        (broken / MANIFEST_NAME).unlink()
        with pytest.raises(ArtifactError):
            load_bundle(broken)

    def test_count_mismatch_rejected(self, small_bundle_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(small_bundle_dir, broken)
        wrong = build_index(np.ones((2, 128), dtype=np.float32))
        save_index(wrong, broken / ARTIFACT_FILES["text_index"])
        with pytest.raises(IntegrityError):
            load_bundle(broken)

    def test_manifest_version_rejected(self, small_bundle_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(small_bundle_dir, broken)
        manifest = json.loads((broken / MANIFEST_NAME).read_text())
        manifest["format_version"] = 99
        (broken / MANIFEST_NAME).write_text(json.dumps(manifest))
        with pytest.raises(IntegrityError):
            load_bundle(broken)


class TestSuggest:
    def test_next_line_in_top_3(self, small_bundle):
        suggestions, oov = suggest(small_bundle, CHAIN_LINES[1], k=3)
        assert not oov
        assert CHAIN_LINES[2] in [s.line for s in suggestions]

    def test_never_suggests_query_itself(self, small_bundle):
        for line in CHAIN_LINES:
            suggestions, _ = suggest(small_bundle, line, k=10)
            assert line not in [s.line for s in suggestions]

    def test_ranks_contiguous_distances_sorted(self, small_bundle):
        suggestions, _ = suggest(small_bundle, CHAIN_LINES[0], k=10)
        assert [s.rank for s in suggestions] == list(range(1, len(suggestions) + 1))
        dists = [s.distance for s in suggestions]
        assert dists == sorted(dists)

    def test_k_larger_than_vocab(self, small_bundle):
        suggestions, _ = suggest(small_bundle, CHAIN_LINES[0], k=10)
        assert len(suggestions) == len(CHAIN_LINES) - 1

    def test_deterministic(self, small_bundle):
        a, _ = suggest(small_bundle, CHAIN_LINES[2], k=5)
        b, _ = suggest(small_bundle, CHAIN_LINES[2], k=5)
        assert [(s.line, s.distance, s.rank) for s in a] == [
            (s.line, s.distance, s.rank) for s in b
        ]

    def test_normalization_applied(self, small_bundle):
        raw = f"   {CHAIN_LINES[1]}   # trailing note"
        suggestions, oov = suggest(small_bundle, raw, k=3)
        assert not oov
        assert suggestions

    def test_oov_flag_and_proxy(self, small_bundle):
        suggestions, oov = suggest(small_bundle, CHAIN_LINES[1] + " + extra_junk",
                                   k=3)
        assert oov
        assert suggestions
        assert all(s.line in CHAIN_LINES for s in suggestions)

    def test_comment_only_rejected(self, small_bundle):
        with pytest.raises(InputError):
            suggest(small_bundle, "# just a comment")

    def test_blank_rejected(self, small_bundle):
        with pytest.raises(InputError):
            suggest(small_bundle, "   ")

    def test_k_validation(self, small_bundle):
        with pytest.raises(InputError):
            suggest(small_bundle, CHAIN_LINES[0], k=0)


class TestExternalTextMode:
    @pytest.fixture()
    def external_bundle(self, tmp_path, small_corpus):
        from nextline.corpus import LanguageProfile, load_sequence, scan_corpus
        from nextline.embedder import TrainConfig
        from nextline.fallback import LexicalEmbedderConfig, embed_lines
        from nextline.graph import build_vocabulary
        from nextline.pipeline import TrainSettings, train_pipeline

        profile = LanguageProfile()
        seqs = [load_sequence(p, profile) for p in scan_corpus(small_corpus, profile)]
        vocab = build_vocabulary(seqs)
        vectors = embed_lines(vocab.id_to_line,
                              LexicalEmbedderConfig(hash_seed=7)).astype(np.float32)
        emb_path = tmp_path / "ext.npy"
        np.save(emb_path, vectors)
        settings = TrainSettings.with_seed(9)
        settings.train = TrainConfig(epochs=5, seed=10)
        out = tmp_path / "art"
        train_pipeline(small_corpus, out, settings, text_embeddings_path=emb_path)
        bundle = load_bundle(out)
        yield bundle
        bundle.close()

    def test_in_vocab_still_works(self, external_bundle):
        suggestions, oov = suggest(external_bundle, CHAIN_LINES[1], k=3)
        assert not oov and suggestions

    def test_oov_requires_external_encoder(self, external_bundle):
        from nextline.errors import ResolutionError

        with pytest.raises(ResolutionError):
            suggest(external_bundle, "never_seen_before = 1", k=3)


class TestHttp:
    @pytest.fixture()
    def client(self, small_bundle):
        from fastapi.testclient import TestClient

        return TestClient(create_app(small_bundle))

    def test_health(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_stats(self, client):
        payload = client.get("/v1/stats").json()
        assert payload["vocab"] == len(CHAIN_LINES)
        assert payload["dim"] == 128

    def test_suggest_contract(self, client):
        response = client.post("/v1/suggest",
                               json={"line": CHAIN_LINES[1], "k": 3})
        assert response.status_code == 200
        payload = response.json()
        assert payload["oov"] is False
        ranks = [s["rank"] for s in payload["suggestions"]]
        assert ranks == sorted(ranks)
        assert len(payload["suggestions"]) <= 3
        assert {"line", "distance", "rank"} <= set(payload["suggestions"][0])

    def test_comment_only_422(self, client):
        response = client.post("/v1/suggest", json={"line": "# only comment"})
        assert response.status_code == 422

    def test_malformed_json_400(self, client):
        response = client.post("/v1/suggest", content=b"{not json",
                               headers={"content-type": "application/json"})
        assert response.status_code == 400

    def test_wrong_body_shape_400(self, client):
        assert client.post("/v1/suggest", json={"k": 3}).status_code == 400
        assert client.post("/v1/suggest",
                           json={"line": CHAIN_LINES[0], "k": "ten"}).status_code == 400

    def test_default_k_is_10(self, client):
        response = client.post("/v1/suggest", json={"line": CHAIN_LINES[0]})
        assert response.status_code == 200
        assert len(response.json()["suggestions"]) <= 10


class TestCli:
    def test_train_and_suggest(self, tmp_path, small_corpus, capsys):
        out = tmp_path / "artifacts"
        code = cli.main([
            "train", "--corpus", str(small_corpus), "--out", str(out),
            "--epochs", "5", "--seed", "7",
        ])
        assert code == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == sorted(list(ARTIFACT_FILES.values()) + [MANIFEST_NAME])

        code = cli.main(["suggest", "--artifacts", str(out),
                         "--line", CHAIN_LINES[0], "--k", "3"])
        assert code == 0
        printed = capsys.readouterr().out
        assert any(line in printed for line in CHAIN_LINES[1:])

    def test_train_empty_corpus_nonzero_exit(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = cli.main(["train", "--corpus", str(empty),
                         "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_artifacts_exit_code(self, tmp_path, capsys):
        code = cli.main(["suggest", "--artifacts", str(tmp_path / "none"),
                         "--line", "x = 1"])
        assert code == 5

    def test_eval_command(self, tmp_path, small_corpus, small_bundle_dir, capsys):
        report = tmp_path / "report.json"
        code = cli.main(["eval", "--artifacts", str(small_bundle_dir),
                         "--corpus", str(small_corpus), "--out", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["accuracy"]["top_10"] >= payload["accuracy"]["top_1"]
        assert "top-1" in capsys.readouterr().out
