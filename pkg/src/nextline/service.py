"""Serving: load the artifact bundle and answer next-line suggestion queries.

The suggestion rule mirrors training locality: look the (normalized) query
line up in the line->id store, take its graph-embedding row, and return the
nearest k rows of the main index mapped back to lines. Unknown lines detour
through the text index to pick a textually similar proxy line first. The
query's own node (or its proxy) is always excluded from results, since a
line is a useless suggestion for itself.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .corpus import LanguageProfile, normalize_line
from .errors import (
    ArtifactError,
    InputError,
    IntegrityError,
    ResolutionError,
)
from .fallback import LexicalEmbedderConfig, PcaModel, load_pca, resolve_oov
from .mapstore import MapStore
from .pipeline import (
    ARTIFACT_FILES,
    MANIFEST_FORMAT_VERSION,
    MANIFEST_NAME,
    TEXT_MODE_LEXICAL,
)
from .vecindex import VectorIndex, load_index, search

logger = logging.getLogger(__name__)


@dataclass
class Suggestion:
    line: str
    distance: float  # squared L2, single precision
    rank: int        # 1-based, contiguous


@dataclass
class ArtifactBundle:
    """The five inference artifacts plus their manifest."""

    main_index: VectorIndex
    text_index: VectorIndex
    pca: PcaModel
    store: MapStore  # line->id and id->line halves
    manifest: dict
    artifact_dir: Path
    profile: LanguageProfile
    lex: LexicalEmbedderConfig

    @property
    def text_mode(self) -> str:
        return self.manifest.get("text_mode", TEXT_MODE_LEXICAL)

    def stats(self) -> dict:
        sizes = {
            name: (self.artifact_dir / fname).stat().st_size
            for name, fname in ARTIFACT_FILES.items()
        }
        return {
            "vocab": self.main_index.count,
            "dim": self.main_index.dim,
            "artifact_bytes": {**sizes, "total": sum(sizes.values())},
        }

    def close(self) -> None:
        self.store.close()


def load_bundle(artifact_dir: Path | str) -> ArtifactBundle:
    """Open all five artifacts and cross-validate counts, dims, and versions."""
    artifact_dir = Path(artifact_dir)
    manifest_path = artifact_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ArtifactError(f"manifest missing: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != MANIFEST_FORMAT_VERSION:
        raise IntegrityError(
            f"manifest format_version {version}, this build reads "
            f"{MANIFEST_FORMAT_VERSION}"
        )
    paths = {name: artifact_dir / fname for name, fname in ARTIFACT_FILES.items()}
    for name, path in paths.items():
        if not path.is_file():
            raise ArtifactError(f"{name} missing: {path}")

    main_index = load_index(paths["main_index"])
    text_index = load_index(paths["text_index"])
    pca = load_pca(paths["pca_model"])
    store = MapStore.open(paths["line_to_id"], paths["id_to_line"])

    if text_index.count != main_index.count:
        store.close()
        raise IntegrityError(
            f"text index holds {text_index.count} rows but main index holds "
            f"{main_index.count}"
        )
    if store.count != main_index.count:
        store.close()
        raise IntegrityError(
            f"map store holds {store.count} entries but main index holds "
            f"{main_index.count}"
        )
    if main_index.dim != text_index.dim or pca.out_dim != main_index.dim:
        store.close()
        raise IntegrityError(
            f"dimension mismatch: main {main_index.dim}, text {text_index.dim}, "
            f"pca out {pca.out_dim}"
        )

    cfg = manifest.get("config", {})
    prof = cfg.get("profile", {})
    profile = LanguageProfile(
        line_comment_marker=prof.get("line_comment_marker", "#"),
        string_delimiters=tuple(prof.get("string_delimiters", ("'''", '"""', "'", '"'))),
        file_extensions=tuple(prof.get("file_extensions", (".py",))),
    )
    lex_cfg = cfg.get("lexical", {})
    lex = LexicalEmbedderConfig(
        ngram_min=lex_cfg.get("ngram_min", 3),
        ngram_max=lex_cfg.get("ngram_max", 5),
        text_dim=lex_cfg.get("text_dim", 384),
        hash_seed=lex_cfg.get("hash_seed", 1),
    )
    return ArtifactBundle(
        main_index=main_index, text_index=text_index, pca=pca, store=store,
        manifest=manifest, artifact_dir=artifact_dir, profile=profile, lex=lex,
    )


def suggest(
    bundle: ArtifactBundle, raw_line: str, k: int = 10
) -> tuple[list[Suggestion], bool]:
    """Top-k next-line suggestions for one raw input line.

    Returns (suggestions, oov_flag). The flag is set when the normalized line
    was not in the vocabulary and a textual proxy stood in for it.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    line = normalize_line(raw_line, bundle.profile)
    if line is None:
        raise InputError("nothing to suggest from: line is blank or comment-only")

    node = bundle.store.get_id(line)
    oov = node is None
    if oov:
        if bundle.text_mode != TEXT_MODE_LEXICAL:
            raise ResolutionError(
                "bundle was built with external text embeddings; resolve "
                "unknown lines by querying the text index with your encoder's "
                "vector instead"
            )
        node = resolve_oov(line, bundle.text_index, bundle.pca, bundle.lex)

    query = bundle.main_index.row(node)
    results = search(bundle.main_index, query, k + 1)
    suggestions: list[Suggestion] = []
    for result in results:
        if result.id == node:
            continue
        text = bundle.store.get_line(result.id)
        if text is None:  # store/index misalignment is caught at load, but be safe
            continue
        suggestions.append(Suggestion(line=text, distance=result.distance,
                                      rank=len(suggestions) + 1))
        if len(suggestions) == k:
            break
    return suggestions, oov


def create_app(bundle: ArtifactBundle, ui_dir: Path | None = None) -> FastAPI:
    """Build the FastAPI app exposing the /v1 endpoints."""
    app = FastAPI(title="nextline", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    @app.get("/v1/stats")
    async def stats():
        return bundle.stats()

    @app.post("/v1/suggest")
    async def suggest_endpoint(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        if not isinstance(payload, dict) or not isinstance(payload.get("line"), str):
            return JSONResponse(
                {"error": 'body must be {"line": string, "k": integer?}'},
                status_code=400,
            )
        k = payload.get("k", 10)
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            return JSONResponse({"error": "k must be a positive integer"},
                                status_code=400)
        try:
            suggestions, oov = suggest(bundle, payload["line"], k)
        except InputError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        except ResolutionError as exc:
            return JSONResponse({"error": str(exc)}, status_code=500)
        return {
            "oov": oov,
            "suggestions": [
                {"line": s.line, "distance": s.distance, "rank": s.rank}
                for s in suggestions
            ],
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve_http(bundle: ArtifactBundle, host: str = "127.0.0.1", port: int = 8640,
               ui_dir: Path | None = None) -> None:
    import uvicorn

    logger.info("serving %d-line vocabulary on http://%s:%d", bundle.main_index.count,
                host, port)
    uvicorn.run(create_app(bundle, ui_dir=ui_dir), host=host, port=port,
                log_level="warning")
