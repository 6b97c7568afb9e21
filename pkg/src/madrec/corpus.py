"""Review ingestion, k-core filtering, leave-one-out splits and candidate pools."""
from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

# JSON-lines field names of the Amazon review dumps
JSON_FIELDS = {
    "user_id": "reviewerID",
    "item_id": "asin",
    "rating": "overall",
    "text": "reviewText",
    "timestamp": "unixReviewTime",
}


class EmptyDatasetError(ValueError):
    pass


class PoolTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class Review:
    user_id: str
    item_id: str
    rating: float
    text: str
    timestamp: int

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError("user_id and item_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if not 1.0 <= self.rating <= 5.0:
            raise ValueError(f"rating {self.rating} outside [1, 5]")

    def to_json(self) -> dict:
        return {
            JSON_FIELDS["user_id"]: self.user_id,
            JSON_FIELDS["item_id"]: self.item_id,
            JSON_FIELDS["rating"]: self.rating,
            JSON_FIELDS["text"]: self.text,
            JSON_FIELDS["timestamp"]: self.timestamp,
        }


def _chrono_key(r: Review):
    return (r.timestamp, r.item_id)


@dataclass(frozen=True)
class Dataset:
    reviews: tuple[Review, ...]
    users: frozenset[str] = field(default=frozenset())
    items: frozenset[str] = field(default=frozenset())

    @classmethod
    def from_reviews(cls, reviews: Iterable[Review]) -> "Dataset":
        reviews = tuple(reviews)
        return cls(
            reviews=reviews,
            users=frozenset(r.user_id for r in reviews),
            items=frozenset(r.item_id for r in reviews),
        )

    def __len__(self) -> int:
        return len(self.reviews)

    def by_user(self) -> dict[str, list[Review]]:
        """Per-user reviews in chronological order (ties by item id)."""
        out: dict[str, list[Review]] = defaultdict(list)
        for r in self.reviews:
            out[r.user_id].append(r)
        return {u: sorted(rs, key=_chrono_key) for u, rs in out.items()}

    def by_item(self) -> dict[str, list[Review]]:
        out: dict[str, list[Review]] = defaultdict(list)
        for r in self.reviews:
            out[r.item_id].append(r)
        return {i: sorted(rs, key=lambda r: (r.timestamp, r.user_id)) for i, rs in out.items()}

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.reviews:
                fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")


@dataclass
class LoadReport:
    dataset: Dataset
    skipped: int
    duplicates: int


def _parse_record(rec: dict, names: dict[str, str]) -> Review:
    return Review(
        user_id=str(rec[names["user_id"]]).strip(),
        item_id=str(rec[names["item_id"]]).strip(),
        rating=float(rec[names["rating"]]),
        text=str(rec[names["text"]] or ""),
        timestamp=int(float(rec[names["timestamp"]])),
    )


def load_reviews(path: str | Path, format: str = "json_lines") -> LoadReport:
    """Read a review dump; malformed records are skipped and counted.

    Repeated (user, item) pairs keep only the latest review; the number
    dropped is reported as ``duplicates``.
    """
    path = Path(path)
    reviews: list[Review] = []
    skipped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        if format == "json_lines":
            for line in fh:
                if not line.strip():
                    continue
                try:
                    reviews.append(_parse_record(json.loads(line), JSON_FIELDS))
                except (ValueError, KeyError, TypeError):
                    skipped += 1
        elif format == "csv":
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            # a CSV header may use either the role names or the dump names
            names = {role: role if role in header else JSON_FIELDS[role] for role in JSON_FIELDS}
            for row in reader:
                try:
                    reviews.append(_parse_record(row, names))
                except (ValueError, KeyError, TypeError):
                    skipped += 1
        else:
            raise ValueError(f"unknown format {format!r}")

    latest: dict[tuple[str, str], Review] = {}
    for r in reviews:
        key = (r.user_id, r.item_id)
        if key not in latest or r.timestamp >= latest[key].timestamp:
            latest[key] = r
    duplicates = len(reviews) - len(latest)
    if not latest:
        raise EmptyDatasetError(f"no valid reviews in {path} ({skipped} malformed)")
    if skipped:
        logger.warning("skipped %d malformed records in %s", skipped, path)
    return LoadReport(Dataset.from_reviews(latest.values()), skipped, duplicates)


def k_core_filter(ds: Dataset, k: int) -> Dataset:
    """Drop users and items with fewer than ``k`` reviews until nothing changes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    reviews = list(ds.reviews)
    while True:
        ucount = Counter(r.user_id for r in reviews)
        icount = Counter(r.item_id for r in reviews)
        kept = [r for r in reviews if ucount[r.user_id] >= k and icount[r.item_id] >= k]
        if len(kept) == len(reviews):
            break
        reviews = kept
    if len(reviews) == len(ds.reviews):
        return ds
    return Dataset.from_reviews(reviews)


@dataclass(frozen=True)
class LooSplit:
    train: Dataset
    targets: dict[str, tuple[str, int]]
    history: dict[str, list[str]]
    heldout: dict[str, Review] = field(default_factory=dict)
    skipped_users: int = 0


def leave_one_out_split(ds: Dataset) -> LooSplit:
    """Hold out each user's latest review (ties broken by item id ascending)."""
    train: list[Review] = []
    targets: dict[str, tuple[str, int]] = {}
    history: dict[str, list[str]] = {}
    heldout: dict[str, Review] = {}
    skipped = 0
    for user, rs in sorted(ds.by_user().items()):
        if len(rs) < 2:
            skipped += 1
            continue
        last = rs[-1]
        targets[user] = (last.item_id, last.timestamp)
        heldout[user] = last
        history[user] = [r.item_id for r in rs[:-1]]
        train.extend(rs[:-1])
    if skipped:
        logger.warning("%d users with a single review excluded from targets", skipped)
    return LooSplit(Dataset.from_reviews(train), targets, history, heldout, skipped)


@dataclass(frozen=True)
class PopularityIndex:
    counts: dict[str, int]
    max_count: int

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "PopularityIndex":
        counts = dict(Counter(r.item_id for r in ds.reviews))
        return cls(counts, max(counts.values(), default=0))


def popularity(idx: PopularityIndex, item: str) -> float:
    """ln(1 + c_i) / ln(1 + c_max); unseen items score 0."""
    if idx.max_count < 1:
        raise ValueError("popularity index is empty")
    c = idx.counts.get(item, 0)
    return math.log1p(c) / math.log1p(idx.max_count)


def user_rng(seed: int, user: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(user.encode("utf-8"))])


def sample_candidates(split: LooSplit, user: str, pool_size: int, seed: int) -> list[str]:
    """99 seeded uniform negatives (for pool_size=100) plus the held-out item.

    Negatives come from train items the user never interacted with; the
    target lands at a seeded random position.
    """
    if user not in split.targets:
        raise KeyError(f"user {user!r} has no held-out target")
    gt = split.targets[user][0]
    seen = set(split.history.get(user, ())) | {gt}
    universe = sorted(split.train.items - seen)
    n_neg = pool_size - 1
    if n_neg > len(universe) or pool_size < 1:
        raise PoolTooLargeError(
            f"pool_size {pool_size} needs {n_neg} negatives, only {len(universe)} available for {user}"
        )
    rng = user_rng(seed, user)
    picks = rng.choice(len(universe), size=n_neg, replace=False) if n_neg else []
    pool = [universe[i] for i in picks]
    pos = int(rng.integers(0, pool_size))
    pool.insert(pos, gt)
    return pool


def write_split_manifest(split: LooSplit, out_dir: str | Path) -> Path:
    """Write train.jsonl, heldout.jsonl and split.json under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = out_dir / "train.jsonl"
    split.train.write_jsonl(train_path)
    heldout_path = out_dir / "heldout.jsonl"
    Dataset.from_reviews(split.heldout[u] for u in sorted(split.heldout)).write_jsonl(heldout_path)
    manifest = {
        "train_path": train_path.name,
        "heldout_path": heldout_path.name,
        "targets": [{"user": u, "item": it, "ts": ts} for u, (it, ts) in sorted(split.targets.items())],
    }
    path = out_dir / "split.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_split_manifest(path: str | Path) -> LooSplit:
    path = Path(path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    train = load_reviews(path.parent / manifest["train_path"]).dataset
    heldout = {r.user_id: r for r in load_reviews(path.parent / manifest["heldout_path"]).dataset.reviews}
    targets = {t["user"]: (t["item"], int(t["ts"])) for t in manifest["targets"]}
    by_user = train.by_user()
    history = {u: [r.item_id for r in by_user.get(u, [])] for u in targets}
    return LooSplit(train, targets, history, heldout)
