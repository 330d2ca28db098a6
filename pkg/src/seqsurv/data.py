"""Two-time-scale survival data model.

Subjects enter a trial at staggered calendar times and are followed on their
own study clock.  An interim analysis at calendar time ``u`` sees each subject
administratively censored at its elapsed follow-up ``(u - entry)+``; the
:func:`snapshot` operation materializes that view.

Downstream estimators assume enrollment times are independent of outcomes,
censoring, and covariates (accrual patterns do not drift over the study).
That assumption is untestable from a single dataset and is documented here
rather than checked.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ValidationError

CONTROL = 0
TREATMENT = 1


@dataclass(frozen=True)
class SubjectRecord:
    """One enrolled subject, on the raw (uncensored-by-analysis) scale.

    ``time_on_study`` is the minimum of the event and random-censoring times,
    measured from the subject's own entry; ``event`` says which one it was.
    """

    id: str
    arm: int
    entry: float
    time_on_study: float
    event: bool
    covariates: tuple[float, ...] = ()


class SnapshotRecord(NamedTuple):
    """Per-subject derived observation at one calendar time."""

    id: str
    arm: int
    follow_up: float
    event_observed: bool
    covariates: tuple[float, ...]


def validate_dataset(dataset: Sequence[SubjectRecord]) -> None:
    """Check structural invariants, naming the offending subject on failure."""
    if not dataset:
        raise ValidationError("dataset is empty")
    p = len(dataset[0].covariates)
    seen: set[str] = set()
    for rec in dataset:
        if rec.id in seen:
            raise ValidationError(f"duplicate subject id {rec.id!r}")
        seen.add(rec.id)
        if rec.arm not in (CONTROL, TREATMENT):
            raise ValidationError(f"subject {rec.id!r}: arm must be 0 or 1, got {rec.arm!r}")
        if not np.isfinite(rec.entry) or rec.entry < 0:
            raise ValidationError(f"subject {rec.id!r}: entry must be finite and >= 0")
        if not np.isfinite(rec.time_on_study) or rec.time_on_study < 0:
            raise ValidationError(f"subject {rec.id!r}: time_on_study must be finite and >= 0")
        if len(rec.covariates) != p:
            raise ValidationError(
                f"subject {rec.id!r}: covariate vector has length {len(rec.covariates)}, expected {p}"
            )
        if not all(np.isfinite(z) for z in rec.covariates):
            raise ValidationError(f"subject {rec.id!r}: non-finite covariate value")


class Columns(NamedTuple):
    """Columnar view of a dataset; the fast path used by the simulator."""

    ids: tuple[str, ...]
    arm: np.ndarray          # (n,) int8
    entry: np.ndarray        # (n,) float64
    time_on_study: np.ndarray  # (n,) float64
    event: np.ndarray        # (n,) bool
    covariates: np.ndarray   # (n, p) float64


def to_columns(dataset: Sequence[SubjectRecord], *, validate: bool = True) -> Columns:
    if validate:
        validate_dataset(dataset)
    n = len(dataset)
    p = len(dataset[0].covariates)
    cols = Columns(
        ids=tuple(r.id for r in dataset),
        arm=np.fromiter((r.arm for r in dataset), dtype=np.int8, count=n),
        entry=np.fromiter((r.entry for r in dataset), dtype=np.float64, count=n),
        time_on_study=np.fromiter((r.time_on_study for r in dataset), dtype=np.float64, count=n),
        event=np.fromiter((r.event for r in dataset), dtype=bool, count=n),
        covariates=np.array([r.covariates for r in dataset], dtype=np.float64).reshape(n, p),
    )
    return cols


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Snapshot:
    """The dataset as visible at calendar time ``u``.

    All subjects are present, including those not yet enrolled (they carry
    zero follow-up and no event, so they never enter a risk set at a positive
    study time but still count toward group sizes and covariate averages).
    Arrays are write-protected; snapshots are safe to share across threads.
    """

    calendar_time: float
    ids: tuple[str, ...]
    arm: np.ndarray
    follow_up: np.ndarray
    event_observed: np.ndarray
    covariates: np.ndarray

    def __post_init__(self) -> None:
        for a in (self.arm, self.follow_up, self.event_observed, self.covariates):
            _freeze(a)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def arm_size(self, arm: int) -> int:
        return int(np.count_nonzero(self.arm == arm))

    @property
    def records(self) -> Iterator[SnapshotRecord]:
        for i, sid in enumerate(self.ids):
            yield SnapshotRecord(
                id=sid,
                arm=int(self.arm[i]),
                follow_up=float(self.follow_up[i]),
                event_observed=bool(self.event_observed[i]),
                covariates=tuple(float(v) for v in self.covariates[i]),
            )


def snapshot(dataset: Sequence[SubjectRecord] | Columns, u: float) -> Snapshot:
    """Apply administrative censoring at calendar time ``u``.

    Per subject: ``follow_up = min(time_on_study, (u - entry)+)`` and the
    event is observed iff it had occurred by that horizon.  A subject with
    ``entry >= u`` contributes zero follow-up.
    """
    if not np.isfinite(u) or u < 0:
        raise ValidationError(f"calendar time must be finite and >= 0, got {u!r}")
    cols = dataset if isinstance(dataset, Columns) else to_columns(dataset)
    horizon = np.maximum(u - cols.entry, 0.0)
    follow_up = np.minimum(cols.time_on_study, horizon)
    event_observed = cols.event & (cols.time_on_study <= horizon)
    return Snapshot(
        calendar_time=float(u),
        ids=cols.ids,
        arm=cols.arm.copy(),
        follow_up=follow_up,
        event_observed=event_observed,
        covariates=cols.covariates.copy(),
    )


def ingest_csv(path, *, delimiter: str = ",") -> list[SubjectRecord]:
    """Read subjects from a CSV file with header ``id,arm,entry,time,event,z1,...,zp``.

    Covariate columns are recognized by the ``z`` prefix; a file with no such
    columns yields a valid zero-covariate dataset.
    """
    required = ["id", "arm", "entry", "time", "event"]
    records: list[SubjectRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in required}
        zcols = [(name, header.index(name)) for name in header if name.startswith("z")]
        zcols.sort(key=lambda item: _z_index(item[0], path))
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            sid = row[col["id"]].strip()
            arm = _parse_int(row[col["arm"]], path, lineno, "arm")
            if arm not in (0, 1):
                raise ValidationError(f"{path}:{lineno}: arm must be 0 or 1, got {arm}")
            event = _parse_int(row[col["event"]], path, lineno, "event")
            if event not in (0, 1):
                raise ValidationError(f"{path}:{lineno}: event must be 0 or 1, got {event}")
            records.append(
                SubjectRecord(
                    id=sid,
                    arm=arm,
                    entry=_parse_float(row[col["entry"]], path, lineno, "entry"),
                    time_on_study=_parse_float(row[col["time"]], path, lineno, "time"),
                    event=bool(event),
                    covariates=tuple(
                        _parse_float(row[idx], path, lineno, name) for name, idx in zcols
                    ),
                )
            )
    validate_dataset(records)
    return records


def _z_index(name: str, path) -> int:
    try:
        return int(name[1:])
    except ValueError:
        raise ValidationError(f"{path}: covariate column {name!r} is not of the form z<k>") from None


def _parse_float(text: str, path, lineno: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: field {name!r} is not numeric: {text!r}") from None


def _parse_int(text: str, path, lineno: int, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: field {name!r} is not an integer: {text!r}") from None
