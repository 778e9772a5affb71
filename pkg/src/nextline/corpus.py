"""Corpus ingestion: scan source trees and normalize files into blocks of code lines.

A "code line" here is a whitespace-trimmed source line with any trailing
comment removed. Blank lines and comment-only lines separate blocks; edges
are only ever formed between lines of the same block, never across files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConfigError, InputError

logger = logging.getLogger(__name__)

BLANK_LINE = "blank_line"
NONE = "none"
_SEPARATORS = (BLANK_LINE, NONE)


@dataclass(frozen=True)
class LanguageProfile:
    """What counts as a comment, a string, and a source file for one language."""

    line_comment_marker: str = "#"
    # Longest delimiters must win at a given scan position, so keep triple
    # quotes ahead of their single-character prefixes.
    string_delimiters: tuple[str, ...] = ("'''", '"""', "'", '"')
    file_extensions: tuple[str, ...] = (".py",)

    def __post_init__(self) -> None:
        if not self.line_comment_marker:
            raise ConfigError("line_comment_marker must be non-empty")
        if not self.file_extensions:
            raise ConfigError("file_extensions must be non-empty")

    def ordered_delimiters(self) -> tuple[str, ...]:
        return tuple(sorted(self.string_delimiters, key=len, reverse=True))


@dataclass
class LineSequence:
    """Normalized lines of one source file, grouped into blocks."""

    source_path: str
    blocks: list[list[str]] = field(default_factory=list)

    def line_count(self) -> int:
        return sum(len(b) for b in self.blocks)


def scan_corpus(root_dir: Path | str, profile: LanguageProfile) -> list[Path]:
    """Return every file under root_dir whose extension the profile accepts.

    Paths are sorted lexicographically so downstream output is deterministic
    regardless of filesystem iteration order.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise InputError(f"corpus directory missing or not a directory: {root}")
    matches = [
        p
        for p in root.rglob("*")
        if p.is_file() and p.suffix in profile.file_extensions
    ]
    return sorted(matches, key=lambda p: str(p))


def normalize_line(raw: str, profile: LanguageProfile) -> str | None:
    """Strip the trailing comment and surrounding whitespace from one source line.

    Returns None when nothing remains (blank or comment-only lines). The
    comment marker is only honored outside string literals; a quote-state
    scanner tracks openings within this line only, and an unterminated string
    swallows the rest of the line.
    """
    marker = profile.line_comment_marker
    delimiters = profile.ordered_delimiters()
    in_string: str | None = None
    cut = len(raw)
    i = 0
    n = len(raw)
    while i < n:
        if in_string is not None:
            if raw[i] == "\\":
                i += 2
                continue
            if raw.startswith(in_string, i):
                i += len(in_string)
                in_string = None
                continue
            i += 1
            continue
        if raw.startswith(marker, i):
            cut = i
            break
        matched = False
        for delim in delimiters:
            if raw.startswith(delim, i):
                in_string = delim
                i += len(delim)
                matched = True
                break
        if not matched:
            i += 1
    text = raw[:cut].strip()
    return text if text else None


def segment_blocks(
    file_lines: Iterable[str],
    profile: LanguageProfile,
    separator: str = BLANK_LINE,
    source_path: str = "",
) -> LineSequence:
    """Normalize file lines and group them into blocks.

    Under the blank_line policy a run of dropped lines (blank or
    comment-only) closes the current block; under none the whole file is a
    single block. Files that retain no lines yield an empty block list.
    """
    if separator not in _SEPARATORS:
        raise ConfigError(f"unknown separator policy: {separator!r}")
    blocks: list[list[str]] = []
    current: list[str] = []
    for raw in file_lines:
        line = normalize_line(raw, profile)
        if line is None:
            if separator == BLANK_LINE and current:
                blocks.append(current)
                current = []
            continue
        current.append(line)
    if current:
        blocks.append(current)
    return LineSequence(source_path=source_path, blocks=blocks)


def read_source_lines(path: Path) -> list[str]:
    """Read a source file as UTF-8, replacing invalid bytes with U+FFFD.

    Replacement (rather than skipping the file) keeps corpus coverage
    predictable; a warning records each affected file.
    """
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        text = data.decode("utf-8", errors="replace")
        logger.warning("invalid UTF-8 in %s; bytes replaced", path)
    return text.splitlines()


def load_sequence(
    path: Path, profile: LanguageProfile, separator: str = BLANK_LINE
) -> LineSequence:
    """Read and segment one source file."""
    return segment_blocks(
        read_source_lines(path), profile, separator, source_path=str(path)
    )


def load_corpus(
    root_dir: Path | str, profile: LanguageProfile, separator: str = BLANK_LINE
) -> Iterator[LineSequence]:
    """Scan root_dir and yield one LineSequence per matching file."""
    for path in scan_corpus(root_dir, profile):
        yield load_sequence(path, profile, separator)
