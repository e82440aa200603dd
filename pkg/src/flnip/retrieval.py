"""Feature database, query ranking and the precision/recall evaluation battery."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from flnip.errors import (
    BadMagic,
    ChecksumMismatch,
    CorruptRecord,
    DuplicateId,
    EmptyCorpus,
    LengthMismatch,
    NOutOfRange,
    VersionUnsupported,
)
from flnip.evolver import category_index
from flnip.gaussian import ScaleBank
from flnip.metrics import check_weights, combine, per_block_distances
from flnip.patterns import BINS, FeatureRecord, extract_feature, format_value

DB_MAGIC = "FLNIPDB"
DB_VERSION = 1


@dataclass
class FeatureDatabase:
    """Ordered feature records; insertion order is the tie-break order."""

    records: list[FeatureRecord]
    sigmas: tuple[float, ...]
    _matrix: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.sigmas = tuple(float(s) for s in self.sigmas)
        expected = BINS * (1 + len(self.sigmas))
        seen = set()
        for rec in self.records:
            if len(rec.feature) != expected:
                raise LengthMismatch(f"record {rec.id!r} has length {len(rec.feature)}, expected {expected}")
            if rec.id in seen:
                raise DuplicateId(f"duplicate record id {rec.id!r}")
            if not rec.category:
                raise CorruptRecord(f"record {rec.id!r} has an empty category")
            seen.add(rec.id)

    def __len__(self):
        return len(self.records)

    @property
    def feature_len(self) -> int:
        return BINS * (1 + len(self.sigmas))

    @property
    def n_blocks(self) -> int:
        return 1 + len(self.sigmas)

    @property
    def features(self) -> np.ndarray:
        if self._matrix is None or self._matrix.shape[0] != len(self.records):
            self._matrix = np.array([r.feature for r in self.records], dtype=np.float64).reshape(
                len(self.records), self.feature_len
            )
        return self._matrix

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def labels(self) -> list[str]:
        return [r.category for r in self.records]

    @property
    def categories(self) -> dict[str, list[int]]:
        index: dict[str, list[int]] = {}
        for pos, rec in enumerate(self.records):
            index.setdefault(rec.category, []).append(pos)
        return index

    def __eq__(self, other):
        if not isinstance(other, FeatureDatabase):
            return NotImplemented
        return self.sigmas == other.sigmas and self.records == other.records


def build_index(images, bank: ScaleBank | None = None, threads: int = 1) -> FeatureDatabase:
    """Extract features for ``(id, category, GrayImage)`` triples, keeping input order."""
    bank = bank or ScaleBank()
    images = list(images)
    if not images:
        raise EmptyCorpus("no images to index")
    seen = set()
    for image_id, _, _ in images:
        if image_id in seen:
            raise DuplicateId(f"duplicate image id {image_id!r}")
        seen.add(image_id)

    def work(item):
        image_id, category, image = item
        return extract_feature(image, bank, image_id, category)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            records = list(pool.map(work, images))
    else:
        records = [work(item) for item in images]
    return FeatureDatabase(records, bank.sigmas)


class Hit(NamedTuple):
    id: str
    category: str
    distance: float


@dataclass
class QueryResult:
    query_id: str
    ranked: list[Hit]


def rank(db: FeatureDatabase, q, w, metric="d1") -> tuple[np.ndarray, np.ndarray]:
    """Stable ascending order of all records and their combined distances."""
    q = np.asarray(getattr(q, "feature", q), dtype=np.float64)
    if q.shape != (db.feature_len,):
        raise LengthMismatch(f"query length {q.shape} does not match database length {db.feature_len}")
    w = check_weights(w, db.n_blocks)
    dist = combine(per_block_distances(q, db.features, metric), w)
    order = np.argsort(dist, kind="stable")
    return order, dist


def query(db: FeatureDatabase, q, w, top_k: int, metric="d1") -> QueryResult:
    if top_k < 1:
        raise NOutOfRange("top_k must be >= 1")
    order, dist = rank(db, q, w, metric)
    recs = db.records
    ranked = [Hit(recs[i].id, recs[i].category, float(dist[i])) for i in order[:top_k]]
    return QueryResult(getattr(q, "id", ""), ranked)


def _relevant_in_top(result: QueryResult, truth_category: str, n: int) -> int:
    if not 1 <= n <= len(result.ranked):
        raise NOutOfRange(f"n={n} outside 1..{len(result.ranked)}")
    return sum(hit.category == truth_category for hit in result.ranked[:n])


def precision_at(result: QueryResult, truth_category: str, n: int) -> float:
    return _relevant_in_top(result, truth_category, n) / n


def recall_at(result: QueryResult, truth_category: str, category_size: int, n: int) -> float:
    if category_size < 1:
        raise NOutOfRange("category size must be >= 1")
    return _relevant_in_top(result, truth_category, n) / category_size


@dataclass
class EvalReport:
    n_list: list[int]
    precision: list[float]  # P_tot(n)
    recall: list[float]  # R_tot(n)
    fscore: list[float]
    category_precision: dict[str, list[float]]
    arr: float  # mean recall at n = category size, x100

    def to_tsv(self) -> str:
        lines = ["n\tP_tot\tR_tot\tF"]
        for n, p, r, f in zip(self.n_list, self.precision, self.recall, self.fscore):
            lines.append(f"{n}\t{format_value(p)}\t{format_value(r)}\t{format_value(f)}")
        lines.append(f"ARR\t{format_value(self.arr)}")
        return "\n".join(lines) + "\n"


def fscore(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def distance_matrix(db: FeatureDatabase, w, metric="d1", threads: int = 1) -> np.ndarray:
    """Row i holds the combined distances from record i to every record."""
    w = check_weights(w, db.n_blocks)
    feats = db.features

    def row(i):
        return combine(per_block_distances(feats[i], feats, metric), w)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, range(len(db))))
    else:
        rows = [row(i) for i in range(len(db))]
    return np.array(rows).reshape(len(db), len(db))


def evaluate(db: FeatureDatabase, w, n_list, metric="d1", exclude_self=False, threads: int = 1) -> EvalReport:
    """Use every record as a query and average per category, then over categories."""
    n_list = [int(n) for n in n_list]
    limit = len(db) - 1 if exclude_self else len(db)
    for n in n_list:
        if not 1 <= n <= limit:
            raise NOutOfRange(f"n={n} outside 1..{limit}")
    dist = distance_matrix(db, w, metric, threads)
    codes, sizes = category_index(db.labels)
    if exclude_self:
        np.fill_diagonal(dist, np.inf)
        sizes = sizes - 1
        if np.any(sizes == 0):
            raise NOutOfRange("a singleton category has no relevant records once the query is excluded")
    order = np.argsort(dist, axis=1, kind="stable")
    hits = np.cumsum(codes[order] == codes[:, None], axis=1)
    rows = np.arange(len(db))

    names = list(dict.fromkeys(db.labels))
    masks = {name: np.array([lab == name for lab in db.labels]) for name in names}

    def grand_mean(per_query):
        return float(np.mean([per_query[masks[name]].mean() for name in names]))

    precision, recall, fs = [], [], []
    category_precision = {name: [] for name in names}
    for n in n_list:
        p_q = hits[:, n - 1] / n
        r_q = hits[:, n - 1] / sizes
        p, r = grand_mean(p_q), grand_mean(r_q)
        precision.append(p)
        recall.append(r)
        fs.append(fscore(p, r))
        for name in names:
            category_precision[name].append(float(p_q[masks[name]].mean()))
    arr = 100.0 * grand_mean(hits[rows, sizes - 1] / sizes)
    return EvalReport(n_list, precision, recall, fs, category_precision, arr)


def save_db(db: FeatureDatabase) -> bytes:
    lines = [
        f"{DB_MAGIC} {DB_VERSION}",
        f"{len(db)} {db.feature_len} {','.join(format_value(s) for s in db.sigmas)}",
    ]
    for rec in db.records:
        for text in (rec.id, rec.category):
            if any(ch in text for ch in "\t\n\r"):
                raise ValueError(f"ids and categories may not contain tabs or newlines: {text!r}")
        values = " ".join(format_value(v) for v in rec.feature)
        lines.append(f"{rec.id}\t{rec.category}\t{values}")
    body = ("\n".join(lines) + "\n").encode("utf-8")
    return body + f"CRC32 {zlib.crc32(body):08x}\n".encode("ascii")


def load_db(data: bytes) -> FeatureDatabase:
    first_nl = data.find(b"\n")
    first = data[: first_nl if first_nl >= 0 else len(data)].decode("utf-8", "replace").split(" ")
    if len(first) != 2 or first[0] != DB_MAGIC:
        raise BadMagic("not a feature database file")
    if first[1] != str(DB_VERSION):
        raise VersionUnsupported(f"unsupported database version {first[1]!r}")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptRecord(f"file is not valid UTF-8: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3:
        raise CorruptRecord("file is truncated")
    try:
        count_s, length_s, sigma_s = lines[1].split(" ")
        count, length = int(count_s), int(length_s)
        sigmas = tuple(float(s) for s in sigma_s.split(","))
    except ValueError:
        raise CorruptRecord(f"bad header line {lines[1]!r}") from None
    if count < 0 or length != BINS * (1 + len(sigmas)):
        raise CorruptRecord(f"header inconsistent: length {length} for {len(sigmas)} sigmas")
    if len(lines) != count + 3 or not lines[-1].startswith("CRC32 "):
        raise CorruptRecord(f"expected {count} records followed by a checksum line")

    records = []
    for lineno, line in enumerate(lines[2 : 2 + count], start=3):
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorruptRecord(f"line {lineno}: expected 3 tab-separated fields")
        values = parts[2].split(" ")
        if len(values) != length:
            raise CorruptRecord(f"line {lineno}: {len(values)} values, expected {length}")
        try:
            feature = np.array([float(v) for v in values])
        except ValueError:
            raise CorruptRecord(f"line {lineno}: non-numeric feature value") from None
        records.append(FeatureRecord(parts[0], parts[1], feature))

    body_len = len(data) - len(lines[-1].encode("utf-8")) - (1 if data.endswith(b"\n") else 0)
    stored = lines[-1][len("CRC32 ") :].strip()
    if stored != f"{zlib.crc32(data[:body_len]):08x}":
        raise ChecksumMismatch("checksum does not match file contents")
    try:
        return FeatureDatabase(records, sigmas)
    except (DuplicateId, LengthMismatch) as exc:
        raise CorruptRecord(str(exc)) from None
