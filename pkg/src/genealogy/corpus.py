"""Event-log parsing and the immutable corpus index.

Event files are newline-delimited.  The first non-blank line must be the
schema header ``#genealogy-events v1``; every following line is a JSON array
with the fixed field order::

    [user_id, community_id, timestamp, title, body, feedback]

Text fields use ordinary JSON string escaping, so a record never spans lines.
"""
from __future__ import annotations

import bisect
import gzip
import io
import json
import os
import pickle
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

from genealogy.lm import TOKENIZER_VERSION, tokenize

SCHEMA_HEADER = "#genealogy-events v1"
INDEX_MAGIC = b"GENEALOGY-INDEX\n"
INDEX_FORMAT_VERSION = 1
MAX_BAD_FRACTION = 0.5


class CorpusError(Exception):
    pass


class FormatError(CorpusError):
    pass


class EmptyCorpusError(CorpusError):
    pass


class InvalidRangeError(CorpusError, ValueError):
    pass


@dataclass(frozen=True)
class Event:
    user_id: str
    community_id: str
    timestamp: int
    title: str
    body: str = ""
    feedback: int = 0

    def __post_init__(self):
        if not self.user_id or not self.community_id:
            raise ValueError("user_id and community_id must be non-empty")
        if self.timestamp <= 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp}")

    def to_record(self) -> list:
        return [self.user_id, self.community_id, self.timestamp,
                self.title, self.body, self.feedback]

    @classmethod
    def from_record(cls, rec) -> "Event":
        if not isinstance(rec, list) or len(rec) != 6:
            raise ValueError("record must be a 6-element array")
        user, comm, ts, title, body, fb = rec
        if not (isinstance(user, str) and isinstance(comm, str)
                and isinstance(title, str) and isinstance(body, str)):
            raise ValueError("id and text fields must be strings")
        for v in (ts, fb):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError("timestamp and feedback must be integers")
        return cls(user, comm, ts, title, body, fb)

    @property
    def text(self) -> str:
        return f"{self.title}\n{self.body}" if self.body else self.title


def format_event(event: Event) -> str:
    return json.dumps(event.to_record(), ensure_ascii=False, separators=(",", ":"))


def write_events(events: Iterable[Event], fh: TextIO) -> int:
    fh.write(SCHEMA_HEADER + "\n")
    n = 0
    for e in events:
        fh.write(format_event(e) + "\n")
        n += 1
    return n


@dataclass(frozen=True)
class ParseResult:
    events: list[Event]
    skipped: int

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


def parse_events(stream: TextIO | str | os.PathLike,
                 max_bad_fraction: float = MAX_BAD_FRACTION) -> ParseResult:
    """Parse an event file, skipping (and counting) malformed records.

    Raises ``FormatError`` when the schema header is missing or more than
    ``max_bad_fraction`` of the records are malformed.  I/O errors propagate.
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, encoding="utf-8") as fh:
            return parse_events(fh, max_bad_fraction)

    events: list[Event] = []
    skipped = 0
    seen_header = False
    for line in stream:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if not seen_header:
            if line.strip() != SCHEMA_HEADER:
                raise FormatError(f"missing schema header {SCHEMA_HEADER!r}")
            seen_header = True
            continue
        try:
            events.append(Event.from_record(json.loads(line)))
        except (ValueError, TypeError):
            skipped += 1
    if not seen_header:
        raise FormatError(f"missing schema header {SCHEMA_HEADER!r}")
    total = len(events) + skipped
    if total and skipped / total > max_bad_fraction:
        raise FormatError(f"{skipped} of {total} records malformed")
    return ParseResult(events, skipped)


@dataclass(frozen=True)
class CommunityInfo:
    creation_time: int
    size: int


@dataclass(frozen=True)
class Posts:
    """Time-sorted post references; ``ids`` index into ``CorpusIndex.posts``."""

    times: tuple[int, ...]
    ids: tuple[int, ...]

    def window(self, t0: int, t1: int) -> tuple[int, ...]:
        """Ids of posts with t0 <= time < t1."""
        lo = bisect.bisect_left(self.times, t0)
        hi = bisect.bisect_left(self.times, t1)
        return self.ids[lo:hi]

    def __len__(self):
        return len(self.ids)


_NO_POSTS = Posts((), ())


@dataclass(frozen=True)
class CorpusIndex:
    posts: tuple[Event, ...]
    tokens: tuple[tuple[str, ...], ...]
    members: dict[str, tuple[tuple[str, int], ...]]
    registry: dict[str, CommunityInfo]
    user_posts: dict[str, Posts]
    user_community_posts: dict[str, dict[str, Posts]]
    community_posts: dict[str, Posts]
    post_times: tuple[int, ...]
    tokenizer_version: str = TOKENIZER_VERSION

    @property
    def communities(self) -> list[str]:
        return sorted(self.registry)

    def creation_time(self, community: str) -> int:
        return self.registry[community].creation_time

    def size(self, community: str) -> int:
        return self.registry[community].size

    def first_members(self, community: str, k: int) -> tuple[tuple[str, int], ...]:
        return self.members[community][:k]

    def posts_of(self, user: str, community: str | None = None) -> Posts:
        if community is None:
            return self.user_posts.get(user, _NO_POSTS)
        return self.user_community_posts.get(user, {}).get(community, _NO_POSTS)

    def user_window(self, user: str, t0: int, t1: int,
                    community: str | None = None) -> tuple[int, ...]:
        return self.posts_of(user, community).window(t0, t1)

    def community_window(self, community: str, t0: int, t1: int) -> tuple[int, ...]:
        return self.community_posts.get(community, _NO_POSTS).window(t0, t1)

    def corpus_window(self, t0: int, t1: int) -> range:
        lo = bisect.bisect_left(self.post_times, t0)
        hi = bisect.bisect_left(self.post_times, t1)
        return range(lo, hi)

    def active_users(self, community: str, t0: int, t1: int) -> set[str]:
        return {self.posts[i].user_id for i in self.community_window(community, t0, t1)}


def _event_key(e: Event):
    return (e.timestamp, e.community_id, e.user_id, e.feedback, e.title, e.body)


def build_index(events: Iterable[Event],
                tokenizer: Callable[[str], list[str]] = tokenize) -> CorpusIndex:
    """Index events; the result does not depend on input order."""
    posts = tuple(sorted(events, key=_event_key))
    if not posts:
        raise EmptyCorpusError("cannot index an empty corpus")

    tokens = tuple(tuple(tokenizer(e.text)) for e in posts)
    first_post: dict[str, dict[str, int]] = defaultdict(dict)
    by_user: dict[str, list[int]] = defaultdict(list)
    by_user_comm: dict[str, dict[str, list[int]]] = defaultdict(lambda: defaultdict(list))
    by_comm: dict[str, list[int]] = defaultdict(list)

    for i, e in enumerate(posts):
        first_post[e.community_id].setdefault(e.user_id, e.timestamp)
        by_user[e.user_id].append(i)
        by_user_comm[e.user_id][e.community_id].append(i)
        by_comm[e.community_id].append(i)

    def as_posts(ids: list[int]) -> Posts:
        return Posts(tuple(posts[i].timestamp for i in ids), tuple(ids))

    members = {}
    registry = {}
    for c, firsts in first_post.items():
        seq = tuple(sorted(firsts.items(), key=lambda ut: (ut[1], ut[0])))
        members[c] = seq
        registry[c] = CommunityInfo(creation_time=seq[0][1], size=len(seq))

    return CorpusIndex(
        posts=posts,
        tokens=tokens,
        members=members,
        registry=registry,
        user_posts={u: as_posts(ids) for u, ids in by_user.items()},
        user_community_posts={u: {c: as_posts(ids) for c, ids in d.items()}
                              for u, d in by_user_comm.items()},
        community_posts={c: as_posts(ids) for c, ids in by_comm.items()},
        post_times=tuple(e.timestamp for e in posts),
    )


def eligible_children(index: CorpusIndex, min_members: int = 100,
                      created_after: int | None = None,
                      created_until: int | None = None) -> set[str]:
    """Communities with more than ``min_members`` members created in
    ``(created_after, created_until]``; ``None`` leaves a side open."""
    if min_members < 1:
        raise ValueError("min_members must be >= 1")
    if created_after is not None and created_until is not None \
            and created_after >= created_until:
        raise InvalidRangeError(f"empty creation range ({created_after}, {created_until}]")
    out = set()
    for c, info in index.registry.items():
        if info.size <= min_members:
            continue
        if created_after is not None and info.creation_time <= created_after:
            continue
        if created_until is not None and info.creation_time > created_until:
            continue
        out.add(c)
    return out


def save_index(index: CorpusIndex, path: str | os.PathLike) -> None:
    payload = gzip.compress(pickle.dumps(index, protocol=pickle.HIGHEST_PROTOCOL), mtime=0)
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(f"{INDEX_FORMAT_VERSION}\n".encode())
        fh.write(payload)


def load_index(path: str | os.PathLike) -> CorpusIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise FormatError(f"{path} is not an index cache file")
        version = int(fh.readline().decode().strip() or -1)
        if version != INDEX_FORMAT_VERSION:
            raise FormatError(f"index format version {version}, expected {INDEX_FORMAT_VERSION}")
        index = pickle.loads(gzip.decompress(fh.read()))
    if not isinstance(index, CorpusIndex):
        raise FormatError(f"{path} does not contain a CorpusIndex")
    return index


def read_events_text(text: str) -> ParseResult:
    return parse_events(io.StringIO(text))


def events_to_text(events: Sequence[Event]) -> str:
    buf = io.StringIO()
    write_events(events, buf)
    return buf.getvalue()
