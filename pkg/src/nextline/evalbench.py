"""Evaluation and benchmarking: top-k accuracy plus size/memory/latency scaling.

Accuracy follows the in-corpus protocol: for every adjacent in-block pair
(a, b) with both lines indexed, it is a top-k hit when b appears among the
k suggestions for a. Pairs with an out-of-vocabulary side are counted
separately and excluded from the denominator.

The scaling benchmark trains one artifact bundle per synthetic vocabulary
size, then measures the on-disk artifact bytes and runs a single-threaded
query session in a subprocess whose resident memory the parent samples at
50 Hz, so the reported peak reflects inference alone.
"""

from __future__ import annotations

import csv
import json
import logging
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import LineSequence
from .embedder import TrainConfig
from .errors import BenchError, EvalError
from .pipeline import ARTIFACT_FILES, TrainSettings, train_pipeline
from .service import ArtifactBundle, suggest
from .walker import WalkConfig

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 3, 10)


@dataclass
class EvalReport:
    transitions_evaluated: int
    accuracy: dict[int, float]  # k -> fraction in [0, 1]
    oov_transitions_skipped: int

    def to_dict(self) -> dict:
        return {
            "transitions_evaluated": self.transitions_evaluated,
            "accuracy": {f"top_{k}": self.accuracy[k] for k in sorted(self.accuracy)},
            "oov_transitions_skipped": self.oov_transitions_skipped,
        }


def evaluate_topk(
    bundle: ArtifactBundle,
    sequences: Iterable[LineSequence],
    ks: Sequence[int] = DEFAULT_KS,
) -> EvalReport:
    """Top-k accuracy over every evaluable adjacent in-block transition."""
    ks = sorted(set(ks))
    max_k = ks[-1]
    hits = {k: 0 for k in ks}
    evaluated = 0
    skipped = 0
    cache: dict[int, list[int]] = {}  # query node -> ranked suggestion ids
    store = bundle.store
    for seq in sequences:
        for block in seq.blocks:
            for a, b in zip(block, block[1:]):
                a_id = store.get_id(a)
                b_id = store.get_id(b)
                if a_id is None or b_id is None:
                    skipped += 1
                    continue
                evaluated += 1
                ranked = cache.get(a_id)
                if ranked is None:
                    suggestions, _ = suggest(bundle, a, max_k)
                    ranked = [store.get_id(s.line) for s in suggestions]
                    cache[a_id] = ranked
                for k in ks:
                    if b_id in ranked[:k]:
                        hits[k] += 1
    if evaluated == 0:
        raise EvalError("no evaluable transitions (corpus empty or fully OOV)")
    accuracy = {k: hits[k] / evaluated for k in ks}
    return EvalReport(transitions_evaluated=evaluated, accuracy=accuracy,
                      oov_transitions_skipped=skipped)


# --- synthetic corpora -------------------------------------------------

def chain_line(chain: int, pos: int, salt: int = 0) -> str:
    """Deterministic, distinct, code-shaped line for synthetic corpora."""
    op = (chain * 131 + pos * 17 + salt) % 997
    return f"v{chain:06d}_{pos:02d} = step_{op:03d}(v{chain:06d}_{pos - 1:02d}, {pos})"


def generate_chain_corpus(
    out_dir: Path,
    num_chains: int,
    chain_length: int = 10,
    repeats: int = 1,
    seed: int = 0,
) -> Path:
    """Write one file per chain; each file repeats its block `repeats` times.

    Chains are disjoint (no line appears in two chains), so the transition
    graph is a disjoint union of weighted paths. All parameters, including
    the seed salt, are recorded by callers for reproducibility.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for chain in range(num_chains):
        lines = [chain_line(chain, pos, salt=seed) for pos in range(chain_length)]
        block = "\n".join(lines)
        content = ("\n\n").join([block] * repeats) + "\n"
        (out_dir / f"chain_{chain:06d}.py").write_text(content, encoding="utf-8")
    return out_dir


def generate_vocab_corpus(out_dir: Path, vocab_size: int, chain_length: int = 10,
                          seed: int = 0) -> Path:
    """Random-chain corpus hitting a target vocabulary size (distinct lines)."""
    num_chains = (vocab_size + chain_length - 1) // chain_length
    return generate_chain_corpus(out_dir, num_chains, chain_length=chain_length,
                                 repeats=1, seed=seed)


# --- scaling benchmark -------------------------------------------------

@dataclass
class ScalingRow:
    vocab_size: int
    artifact_bytes: int
    peak_resident_bytes: int
    mean_query_seconds: float

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "artifact_bytes": self.artifact_bytes,
            "peak_resident_bytes": self.peak_resident_bytes,
            "mean_query_seconds": self.mean_query_seconds,
        }


@dataclass
class BenchSettings:
    """Training knobs for benchmark bundles.

    Artifact sizes depend only on the vocabulary and dimensions, so the
    benchmark trains with a light walk/epoch budget by default.
    """

    epochs: int = 1
    num_walks: int = 5
    walk_length: int = 10
    seed: int = 97
    queries: int = 1000
    chain_length: int = 10

    def to_dict(self) -> dict:
        return {
            "generator": "disjoint random chains",
            "chain_length": self.chain_length,
            "epochs": self.epochs,
            "num_walks": self.num_walks,
            "walk_length": self.walk_length,
            "seed": self.seed,
            "queries": self.queries,
        }


def artifact_dir_bytes(artifact_dir: Path) -> int:
    """Total bytes of the five artifacts (manifest excluded)."""
    return sum((Path(artifact_dir) / fname).stat().st_size
               for fname in ARTIFACT_FILES.values())


_QUERY_SESSION_SNIPPET = """
import json, sys, time
from nextline.evalbench import run_query_session
print(json.dumps(run_query_session(sys.argv[1], int(sys.argv[2]), int(sys.argv[3]))))
"""


def run_query_session(artifact_dir: str, queries: int, seed: int) -> dict:
    """Load a bundle and time single-threaded suggest calls (subprocess body)."""
    from .service import load_bundle

    bundle = load_bundle(artifact_dir)
    rng = np.random.default_rng(seed)
    count = bundle.main_index.count
    ids = rng.integers(0, count, size=queries + 10)
    lines = [bundle.store.get_line(int(i)) for i in ids]
    for line in lines[:10]:  # warm the kernel/caches before timing
        suggest(bundle, line, 10)
    started = time.perf_counter()
    for line in lines[10:]:
        suggest(bundle, line, 10)
    elapsed = time.perf_counter() - started
    bundle.close()
    return {"mean_query_seconds": elapsed / queries, "queries": queries}


def measure_query_session(artifact_dir: Path, queries: int, seed: int) -> tuple[float, int]:
    """Run the query session in a child process; return (mean seconds, peak RSS)."""
    import psutil

    proc = subprocess.Popen(
        [sys.executable, "-c", _QUERY_SESSION_SNIPPET, str(artifact_dir),
         str(queries), str(seed)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    tracker = psutil.Process(proc.pid)
    peak = 0
    while proc.poll() is None:
        try:
            peak = max(peak, tracker.memory_info().rss)
        except psutil.NoSuchProcess:
            break
        time.sleep(0.02)  # 50 Hz sampling
    stdout, stderr = proc.communicate()
    if proc.returncode != 0:
        raise BenchError(f"query session failed: {stderr.strip()[-500:]}")
    payload = json.loads(stdout.strip().splitlines()[-1])
    return float(payload["mean_query_seconds"]), peak


def bench_scaling(
    vocab_sizes: Sequence[int],
    work_dir: Path,
    settings: BenchSettings | None = None,
) -> list[ScalingRow]:
    """Train one bundle per vocabulary size and measure size, memory, latency."""
    settings = settings or BenchSettings()
    if list(vocab_sizes) != sorted(vocab_sizes):
        raise BenchError("vocab sizes must be ascending")
    work_dir = Path(work_dir)
    rows: list[ScalingRow] = []
    for size in vocab_sizes:
        corpus_dir = work_dir / f"corpus_{size}"
        artifact_dir = work_dir / f"artifacts_{size}"
        try:
            generate_vocab_corpus(corpus_dir, size,
                                  chain_length=settings.chain_length,
                                  seed=settings.seed)
            train_settings = TrainSettings.with_seed(settings.seed)
            train_settings.walk = WalkConfig(
                num_walks=settings.num_walks, walk_length=settings.walk_length,
                seed=settings.seed,
            )
            train_settings.train = TrainConfig(
                epochs=settings.epochs, seed=settings.seed + 1,
            )
            train_pipeline(corpus_dir, artifact_dir, train_settings)
            latency, peak = measure_query_session(artifact_dir, settings.queries,
                                                  settings.seed)
        except Exception as exc:
            raise BenchError(f"benchmark failed at vocab size {size}: {exc}") from exc
        row = ScalingRow(
            vocab_size=size,
            artifact_bytes=artifact_dir_bytes(artifact_dir),
            peak_resident_bytes=peak,
            mean_query_seconds=latency,
        )
        logger.info(
            "size %d: %.1f MB artifacts, %.1f MB peak RSS, %.2f ms/query",
            size, row.artifact_bytes / 1e6, row.peak_resident_bytes / 1e6,
            row.mean_query_seconds * 1e3,
        )
        rows.append(row)
    return rows


def rsquared(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_res = float((residuals ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


# --- reports -----------------------------------------------------------

def emit_report(data: EvalReport | list[ScalingRow], path: Path,
                fmt: str = "json", meta: dict | None = None) -> Path:
    """Write a report with stable field names; identical inputs give identical bytes.

    For scaling runs, pass the benchmark settings as meta so the JSON report
    records how its synthetic corpora were generated.
    """
    path = Path(path)
    if fmt == "json":
        if isinstance(data, EvalReport):
            payload = data.to_dict()
        else:
            payload = {"rows": [row.to_dict() for row in data]}
        if meta:
            payload["meta"] = meta
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            if isinstance(data, EvalReport):
                writer.writerow(["k", "accuracy", "transitions_evaluated",
                                 "oov_transitions_skipped"])
                for k in sorted(data.accuracy):
                    writer.writerow([k, repr(data.accuracy[k]),
                                     data.transitions_evaluated,
                                     data.oov_transitions_skipped])
            else:
                writer.writerow(["vocab_size", "artifact_bytes",
                                 "peak_resident_bytes", "mean_query_seconds"])
                for row in data:
                    writer.writerow([row.vocab_size, row.artifact_bytes,
                                     row.peak_resident_bytes,
                                     repr(row.mean_query_seconds)])
    else:
        raise EvalError(f"unknown report format: {fmt!r}")
    return path
