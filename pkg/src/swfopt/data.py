"""German credit ingest, encoding, and seeded train/test split plans.

Reads the raw categorical ``german.data`` layout: 20 whitespace-separated
attributes followed by the label (1 = good, 2 = bad).  Attribute order and
category codes follow the dataset's companion documentation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_RECORDS = 1000
N_ATTRIBUTES = 20
YOUNG_AGE_LIMIT = 35
DEFAULT_BUDGET = 5000.0
REQUEST_RANGE = (0.0, 100.0)
TRAIN_SIZE = 800


def _codes(prefix: str, lo: int, hi: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(lo, hi + 1))


# (name, category codes or None for integer attributes)
ATTRIBUTES: tuple[tuple[str, tuple[str, ...] | None], ...] = (
    ("checking_status", _codes("A1", 1, 4)),
    ("duration_months", None),
    ("credit_history", _codes("A3", 0, 4)),
    ("purpose", _codes("A4", 0, 10)),
    ("credit_amount", None),
    ("savings", _codes("A6", 1, 5)),
    ("employment_since", _codes("A7", 1, 5)),
    ("installment_rate", None),
    ("personal_status_sex", _codes("A9", 1, 5)),
    ("other_debtors", _codes("A10", 1, 3)),
    ("residence_since", None),
    ("property", _codes("A12", 1, 4)),
    ("age", None),
    ("other_installment_plans", _codes("A14", 1, 3)),
    ("housing", _codes("A15", 1, 3)),
    ("existing_credits", None),
    ("job", _codes("A17", 1, 4)),
    ("people_liable", None),
    ("telephone", _codes("A19", 1, 2)),
    ("foreign_worker", _codes("A20", 1, 2)),
)
AGE_INDEX = 12
CATEGORICAL = tuple(i for i, (_, c) in enumerate(ATTRIBUTES) if c is not None)
NUMERIC = tuple(i for i, (_, c) in enumerate(ATTRIBUTES) if c is None)


class DataError(ValueError):
    pass


class MalformedLineError(DataError):
    def __init__(self, line_no: int, field_no: int | None, message: str):
        where = f"line {line_no}" + (f", field {field_no}" if field_no is not None else "")
        super().__init__(f"{where}: {message}")
        self.line_no = line_no
        self.field_no = field_no


class WrongRecordCountError(DataError):
    pass


class UnknownCategoryCodeError(DataError):
    pass


@dataclass(frozen=True)
class CreditRecord:
    attributes: tuple[str, ...]
    label: int

    @property
    def age(self) -> int:
        return int(self.attributes[AGE_INDEX])

    @property
    def group(self) -> str:
        return group_of(self)


def group_of(record: CreditRecord) -> str:
    """``"young"`` for applicants strictly younger than 35, else ``"old"``."""
    return "young" if record.age < YOUNG_AGE_LIMIT else "old"


def parse_lines(lines: Iterable[str], expected: int | None = N_RECORDS) -> list[CreditRecord]:
    records = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != N_ATTRIBUTES + 1:
            raise MalformedLineError(line_no, None, f"expected 21 fields, found {len(fields)}")
        for j in NUMERIC:
            try:
                int(fields[j])
            except ValueError:
                raise MalformedLineError(line_no, j + 1, f"expected an integer, got {fields[j]!r}") from None
        if fields[-1] not in ("1", "2"):
            raise MalformedLineError(line_no, 21, f"label must be 1 or 2, got {fields[-1]!r}")
        if int(fields[AGE_INDEX]) <= 0:
            raise MalformedLineError(line_no, AGE_INDEX + 1, "age must be positive")
        records.append(CreditRecord(tuple(fields[:-1]), 1 if fields[-1] == "1" else -1))
    if expected is not None and len(records) != expected:
        raise WrongRecordCountError(f"expected {expected} records, found {len(records)}")
    return records


def parse_german_credit(path: str | Path, expected: int | None = N_RECORDS) -> list[CreditRecord]:
    with open(path) as fh:
        return parse_lines(fh, expected)


def serialize_records(records: Sequence[CreditRecord]) -> str:
    """Inverse of :func:`parse_lines` (raw ``german.data`` layout)."""
    return "".join(
        " ".join(r.attributes + ("1" if r.label == 1 else "2",)) + "\n" for r in records
    )


def dataset_facts(records: Sequence[CreditRecord]) -> dict:
    groups = np.array([group_of(r) for r in records])
    labels = np.array([r.label for r in records])
    facts = {"records": len(records)}
    for g in ("young", "old"):
        mask = groups == g
        facts[f"{g}_count"] = int(mask.sum())
        facts[f"{g}_positive_share"] = float(np.mean(labels[mask] == 1)) if mask.any() else float("nan")
    return facts


# --- encoding ---------------------------------------------------------------

@dataclass(frozen=True)
class Encoder:
    """One-hot categoricals plus standardized integers, intercept first.

    Standardization statistics come from the training rows only.
    """

    means: np.ndarray
    stds: np.ndarray

    @property
    def feature_names(self) -> list[str]:
        names = ["intercept"]
        for j, (name, codes) in enumerate(ATTRIBUTES):
            if codes is None:
                names.append(name)
            else:
                names.extend(f"{name}={c}" for c in codes)
        return names

    def transform(self, records: Sequence[CreditRecord]) -> np.ndarray:
        cols = [np.ones(len(records))]
        num_k = 0
        for j, (name, codes) in enumerate(ATTRIBUTES):
            raw = [r.attributes[j] for r in records]
            if codes is None:
                vals = np.array(raw, dtype=float)
                cols.append((vals - self.means[num_k]) / self.stds[num_k])
                num_k += 1
                continue
            lookup = {c: k for k, c in enumerate(codes)}
            block = np.zeros((len(records), len(codes)))
            for i, v in enumerate(raw):
                k = lookup.get(v)
                if k is None:
                    raise UnknownCategoryCodeError(f"attribute {name}: unknown code {v!r} (record {i})")
                block[i, k] = 1.0
            cols.extend(block.T)
        return np.column_stack(cols)


def fit_encoder(records: Sequence[CreditRecord], train_idx: Sequence[int]) -> Encoder:
    nums = np.array(
        [[float(records[i].attributes[j]) for j in NUMERIC] for i in train_idx]
    )
    stds = nums.std(axis=0)
    stds[stds == 0] = 1.0
    return Encoder(nums.mean(axis=0), stds)


@dataclass
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    feature_names: list[str]

    def subset(self, idx) -> "EncodedDataset":
        return EncodedDataset(self.X[idx], self.y[idx], self.groups[idx], self.feature_names)


def encode(records: Sequence[CreditRecord], train_idx: Sequence[int] | None = None) -> EncodedDataset:
    """Encode all records with statistics fitted on ``train_idx`` (default: all)."""
    if train_idx is None:
        train_idx = range(len(records))
    enc = fit_encoder(records, train_idx)
    return EncodedDataset(
        enc.transform(records),
        np.array([r.label for r in records], dtype=float),
        np.array([group_of(r) for r in records]),
        enc.feature_names,
    )


def write_encoded_csv(path: str | Path, data: EncodedDataset, header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.feature_names + ["label", "group"])
        for x, y, g in zip(data.X, data.y, data.groups):
            w.writerow([repr(float(v)) for v in x] + [int(y), g])


# --- split plans ------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    requests: np.ndarray  # aligned with test_idx
    budget: float = DEFAULT_BUDGET

    def __eq__(self, other):
        if not isinstance(other, SplitPlan):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.budget == other.budget
            and np.array_equal(self.train_idx, other.train_idx)
            and np.array_equal(self.test_idx, other.test_idx)
            and np.array_equal(self.requests, other.requests)
        )

    __hash__ = None

    def to_text(self) -> str:
        return (
            "swfopt-split-plan v1\n"
            f"seed {self.seed}\n"
            f"budget {self.budget!r}\n"
            f"train {' '.join(map(str, self.train_idx.tolist()))}\n"
            f"test {' '.join(map(str, self.test_idx.tolist()))}\n"
            f"requests {' '.join(repr(float(r)) for r in self.requests)}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "SplitPlan":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "swfopt-split-plan v1":
            raise DataError("not a v1 split plan file")
        fields = {}
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            fields[key] = rest
        return cls(
            seed=int(fields["seed"]),
            budget=float(fields["budget"]),
            train_idx=np.array(fields["train"].split(), dtype=np.int64),
            test_idx=np.array(fields["test"].split(), dtype=np.int64),
            requests=np.array(fields["requests"].split(), dtype=float),
        )


def make_split(n_records: int, seed: int, train_size: int = TRAIN_SIZE,
               budget: float = DEFAULT_BUDGET) -> SplitPlan:
    """Uniform unstratified split plus uniform requests for the test rows."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_records)
    train, test = np.sort(perm[:train_size]), np.sort(perm[train_size:])
    requests = rng.uniform(*REQUEST_RANGE, size=test.size)
    return SplitPlan(seed, train, test, requests, budget)


def make_splits(records: Sequence[CreditRecord] | int, n_splits: int = 5, seed_base: int = 0,
                budget: float = DEFAULT_BUDGET) -> list[SplitPlan]:
    """Split ``k`` uses seed ``seed_base + k``."""
    n = records if isinstance(records, int) else len(records)
    train_size = int(round(0.8 * n))
    return [make_split(n, seed_base + k, train_size, budget) for k in range(n_splits)]
