"""
Firm panel: record types, CSV ingestion, exit tables, summary statistics
and the per-year design matrix.

One CSV row is one enterprise.  ``exit_year`` is left empty for firms that
are still active at the end of the panel.
"""

import csv
import enum
import hashlib
import math
import os
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadCoordinate, BadField, BadIndustryCode, ConstantColumn,
                     DuplicateId, EmptyFilter, MissingColumn, PanelError,
                     RowError, TooFewRows)

__all__ = [
    "CSV_COLUMNS", "DESIGN_COLUMNS", "Region", "LegalForm", "BlockLevel",
    "IndustryCode", "EnterpriseRecord", "PanelDataset", "ExitRow",
    "ExitTable", "DesignMatrix", "load_panel", "write_panel", "write_rejects",
    "exit_table", "summarize", "build_design", "file_digest",
]

CSV_COLUMNS = ("id", "lon", "lat", "section", "division", "group", "class",
               "established_year", "exit_year", "registered_capital",
               "foreign_pct", "region", "legal_form", "tariffed", "imp_exp")

DESIGN_COLUMNS = ("intercept", "years_of_operation", "registered_capital",
                  "foreign_pct", "region_taiwan", "region_us",
                  "joint_venture", "tariffed", "imp_exp")


class Region(enum.Enum):
    HONG_KONG = "HongKong"
    TAIWAN = "Taiwan"
    US = "US"
    OTHER = "Other"


class LegalForm(enum.Enum):
    FOREIGN_OWNED = "ForeignOwned"
    JOINT_VENTURE = "JointVenture"
    OTHER = "Other"


class BlockLevel(enum.Enum):
    """Industry level within which spatial dependence is allowed."""
    GROUP = "group"
    CLASS = "class"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class IndustryCode:
    """Four nested levels of the industrial classification.

    ``division`` (2 digits) prefixes ``group`` (3 digits), which prefixes
    ``class_`` (4 digits).  ``section`` is a single letter.
    """
    section: str
    division: str
    group: str
    class_: str

    def __post_init__(self):
        s, d, g, c = self.section, self.division, self.group, self.class_
        if not (len(s) == 1 and s.isalpha()):
            raise ValueError(f"section must be a single letter, got {s!r}")
        for name, value, width in (("division", d, 2), ("group", g, 3),
                                   ("class", c, 4)):
            if len(value) != width or not value.isdigit():
                raise ValueError(f"{name} must be {width} digits, got {value!r}")
        if not g.startswith(d):
            raise ValueError(f"group {g!r} does not extend division {d!r}")
        if not c.startswith(g):
            raise ValueError(f"class {c!r} does not extend group {g!r}")

    def at(self, level):
        """Code at ``level`` ('section', 'division', 'group' or 'class')."""
        level = getattr(level, "value", level)
        if level == "class":
            return self.class_
        if level not in ("section", "division", "group"):
            raise ValueError(f"unknown industry level {level!r}")
        return getattr(self, level)


@dataclass(frozen=True)
class EnterpriseRecord:
    id: str
    lon: float
    lat: float
    industry: IndustryCode
    established_year: int
    exit_year: int | None
    registered_capital: float
    foreign_contribution_pct: float
    registration_region: Region
    legal_form: LegalForm
    is_tariffed: bool
    importer_exporter: bool

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"coordinate out of range: ({self.lon}, {self.lat})")
        if self.exit_year is not None and self.exit_year < self.established_year:
            raise ValueError("exit_year precedes established_year")
        if not self.registered_capital >= 0:
            raise ValueError("registered_capital must be nonnegative")
        if not 0.0 <= self.foreign_contribution_pct <= 1.0:
            raise ValueError("foreign_pct must lie in [0, 1]")

    def is_active(self, year):
        return self.established_year <= year and (
            self.exit_year is None or self.exit_year > year)

    def years_of_operation(self, year):
        return max(0, year - self.established_year)


@dataclass(frozen=True)
class PanelDataset:
    records: tuple
    panel_start: int
    panel_end: int
    rejects: tuple = ()
    source: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "rejects", tuple(self.rejects))
        if self.panel_start > self.panel_end:
            raise ValueError("panel_start after panel_end")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("record ids are not unique")

    def __len__(self):
        return len(self.records)

    def filter(self, level, prefix):
        recs = [r for r in self.records
                if r.industry.at(level).startswith(prefix)]
        return PanelDataset(recs, self.panel_start, self.panel_end,
                            source=self.source)

    def active(self, year):
        return [r for r in self.records if r.is_active(year)]


# -- ingestion --------------------------------------------------------------

def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _parse_bool(text, row, name):
    if text == "1":
        return True
    if text == "0":
        return False
    raise BadField(row, f"{name}={text!r}, expected 0 or 1")


def _parse_number(text, row, name, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise BadField(row, f"{name}={text!r}") from None
    if kind is float and not math.isfinite(value):
        raise BadField(row, f"{name}={text!r}")
    return value


def _parse_row(raw, row):
    try:
        lon = float(raw["lon"])
        lat = float(raw["lat"])
    except ValueError:
        raise BadCoordinate(row, f"lon={raw['lon']!r} lat={raw['lat']!r}") from None
    if not (math.isfinite(lon) and math.isfinite(lat)
            and -180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise BadCoordinate(row, f"lon={lon} lat={lat}")
    try:
        industry = IndustryCode(raw["section"].strip(), raw["division"].strip(),
                                raw["group"].strip(), raw["class"].strip())
    except ValueError as exc:
        raise BadIndustryCode(row, str(exc)) from None

    established = _parse_number(raw["established_year"], row,
                                "established_year", int)
    exit_text = raw["exit_year"].strip()
    exit_year = (None if exit_text == ""
                 else _parse_number(exit_text, row, "exit_year", int))
    if exit_year is not None and exit_year < established:
        raise BadField(row, "exit_year precedes established_year")
    capital = _parse_number(raw["registered_capital"], row, "registered_capital")
    if capital < 0:
        raise BadField(row, "registered_capital is negative")
    fpct = _parse_number(raw["foreign_pct"], row, "foreign_pct")
    if not 0.0 <= fpct <= 1.0:
        raise BadField(row, f"foreign_pct={fpct} outside [0, 1]")
    try:
        region = Region(raw["region"].strip())
        legal = LegalForm(raw["legal_form"].strip())
    except ValueError as exc:
        raise BadField(row, str(exc)) from None

    return EnterpriseRecord(
        id=raw["id"].strip(), lon=lon, lat=lat, industry=industry,
        established_year=established, exit_year=exit_year,
        registered_capital=capital, foreign_contribution_pct=fpct,
        registration_region=region, legal_form=legal,
        is_tariffed=_parse_bool(raw["tariffed"].strip(), row, "tariffed"),
        importer_exporter=_parse_bool(raw["imp_exp"].strip(), row, "imp_exp"),
    )


def load_panel(path, schema=None, panel_start=None, panel_end=None,
               strict=False):
    """Read an enterprise CSV into a validated :class:`PanelDataset`.

    ``schema`` maps canonical column names (``CSV_COLUMNS``) to the header
    names used in the file; unmapped columns keep their canonical name.
    Rows that fail validation are collected in ``PanelDataset.rejects`` as
    :class:`~spatial_exit.errors.RowError` instances; with ``strict=True``
    the first bad row is raised instead.

    The panel range defaults to the earliest establishment year through the
    latest exit year (or establishment year when nobody exits).
    """
    schema = dict(schema or {})
    names = {c: schema.get(c, c) for c in CSV_COLUMNS}
    records, rejects, seen = [], [], set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for canon in CSV_COLUMNS:
            if names[canon] not in header:
                raise MissingColumn(names[canon])
        for line, raw in enumerate(reader, start=2):
            raw = {c: (raw[names[c]] or "") for c in CSV_COLUMNS}
            try:
                rec = _parse_row(raw, line)
                if rec.id in seen:
                    raise DuplicateId(line, rec.id)
            except RowError as exc:
                if strict:
                    raise
                rejects.append(exc)
                continue
            seen.add(rec.id)
            records.append(rec)

    if panel_start is None:
        panel_start = min((r.established_year for r in records), default=0)
    if panel_end is None:
        years = [r.exit_year or r.established_year for r in records]
        panel_end = max(years, default=panel_start)
    return PanelDataset(records, panel_start, panel_end, rejects,
                        source=os.fspath(path))


def _atomic_write_text(path, text):
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _record_row(r):
    return [r.id, repr(r.lon), repr(r.lat), r.industry.section,
            r.industry.division, r.industry.group, r.industry.class_,
            str(r.established_year),
            "" if r.exit_year is None else str(r.exit_year),
            repr(r.registered_capital), repr(r.foreign_contribution_pct),
            r.registration_region.value, r.legal_form.value,
            str(int(r.is_tariffed)), str(int(r.importer_exporter))]


def _csv_text(header, rows):
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_panel(records, path):
    """Write records in the canonical CSV layout (atomic replace)."""
    _atomic_write_text(path, _csv_text(CSV_COLUMNS,
                                       [_record_row(r) for r in records]))


def write_rejects(panel, path=None):
    """Write ``<source>.rejects.csv`` listing rejected rows with a reason."""
    if path is None:
        path = f"{panel.source}.rejects.csv"
    rows = [[exc.row, type(exc).__name__, exc.detail] for exc in panel.rejects]
    _atomic_write_text(path, _csv_text(("row", "reason", "detail"), rows))
    return path


# -- tables -----------------------------------------------------------------

@dataclass(frozen=True)
class ExitRow:
    start: int
    end: int
    active_count: int
    exit_count: int

    @property
    def exit_pct(self):
        return self.exit_count / self.active_count if self.active_count else float("nan")

    @property
    def surviving_count(self):
        return self.active_count - self.exit_count

    @property
    def interval(self):
        return f"{self.start}-{self.end}"


@dataclass(frozen=True)
class ExitTable:
    """Yearly exits.

    ``active_count`` counts firms active at the start of the interval and
    ``exit_pct = exit_count / active_count``.  The printed tables of the
    Shenzhen study list the firms *surviving* the interval next to the
    exits, so ``surviving_count`` is kept alongside for that layout.
    """
    rows: tuple
    level: str | None = None
    prefix: str = ""

    def to_csv(self):
        body = [[r.interval, r.active_count, r.exit_count, r.surviving_count,
                 f"{100 * r.exit_pct:.2f}"] for r in self.rows]
        return _csv_text(("interval", "active", "exits", "surviving",
                          "exit_pct"), body)


def exit_table(panel, level=None, prefix=""):
    """Count active firms and exits per one-year interval of the panel."""
    sub = panel if level is None else panel.filter(level, prefix)
    if not len(sub):
        raise EmptyFilter(f"no firm matches {level}={prefix!r}")
    rows = []
    for t in range(sub.panel_start, sub.panel_end):
        active = sub.active(t)
        exits = sum(1 for r in active if r.exit_year == t + 1)
        rows.append(ExitRow(t, t + 1, len(active), exits))
    return ExitTable(tuple(rows), None if level is None else str(level), prefix)


def _describe(values):
    if len(values) < 2:
        sd = float("nan")
    else:
        sd = statistics.stdev(values)
    return {"mean": statistics.fmean(values),
            "median": statistics.median(values), "sd": sd, "n": len(values)}


def summarize(panel, year=None):
    """Categorical shares and numeric moments in the layout of the firm tables.

    Describes the firms active in ``year`` (default ``panel.panel_start``),
    with years of operation measured at that year.  Returns a dict with
    ``"categorical"`` (label -> share in [0, 1]) and ``"numerical"``
    (label -> mean/median/sd/n).
    """
    year = panel.panel_start if year is None else int(year)
    recs = panel.active(year)
    if not recs:
        raise EmptyFilter(f"no firm active in {year}")
    n = len(recs)

    def share(pred):
        return sum(1 for r in recs if pred(r)) / n

    categorical = {
        "Foreign-owned": share(lambda r: r.legal_form is LegalForm.FOREIGN_OWNED),
        "Joint-venture": share(lambda r: r.legal_form is LegalForm.JOINT_VENTURE),
        "U.S. Registered": share(lambda r: r.registration_region is Region.US),
        "Tariffed Industry": share(lambda r: r.is_tariffed),
        "Importer/Exporter": share(lambda r: r.importer_exporter),
    }
    numerical = {
        "Registered Capital": _describe([r.registered_capital for r in recs]),
    }
    jv = [r.foreign_contribution_pct for r in recs
          if r.legal_form is LegalForm.JOINT_VENTURE]
    if jv:
        numerical["Foreign Contribution for Joint-venture"] = _describe(jv)
    numerical["Years of Operation"] = _describe(
        [r.years_of_operation(year) for r in recs])
    return {"categorical": categorical, "numerical": numerical}


def summary_csvs(summary):
    """Render a :func:`summarize` result as (categorical, numerical) CSV text."""
    cat = _csv_text(("variable", "share_pct"),
                    [[k, f"{100 * v:.2f}"] for k, v in summary["categorical"].items()])
    num = _csv_text(("variable", "mean", "median", "sd", "n"),
                    [[k, f"{v['mean']:.2f}", f"{v['median']:.2f}",
                      f"{v['sd']:.2f}", v["n"]]
                     for k, v in summary["numerical"].items()])
    return cat, num


# -- design -----------------------------------------------------------------

@dataclass(frozen=True)
class DesignMatrix:
    """Regressors and outcome for one (year, block level) estimation cell."""
    X: np.ndarray
    y: np.ndarray
    columns: tuple
    year: int
    block_level: BlockLevel
    ids: tuple = field(default=())

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def k(self):
        return self.X.shape[1]

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        h.update("|".join(self.columns).encode())
        return h.hexdigest()


def _design_row(r, year):
    return [
        1.0,
        float(r.years_of_operation(year)),
        math.log1p(r.registered_capital),
        r.foreign_contribution_pct,
        float(r.registration_region is Region.TAIWAN),
        float(r.registration_region is Region.US),
        float(r.legal_form is LegalForm.JOINT_VENTURE),
        float(r.is_tariffed),
        float(r.importer_exporter),
    ]


def build_design(panel, year, block_level):
    """Cross-section of firms active in ``year``; ``y`` marks exit in ``year + 1``.

    Registered capital enters as ``log(1 + capital)``, z-scored within the
    cell.  Hong Kong and "Other" registrations form the baseline region.
    Returns ``(DesignMatrix, active_records)``.
    """
    block_level = BlockLevel.coerce(block_level)
    active = sorted(panel.active(year), key=lambda r: r.id)
    k = len(DESIGN_COLUMNS)
    if len(active) < k + 2:
        raise TooFewRows(f"{len(active)} active firms in {year}, need {k + 2}")
    X = np.array([_design_row(r, year) for r in active], dtype=float)
    y = np.array([float(r.exit_year == year + 1) for r in active])
    for j, name in enumerate(DESIGN_COLUMNS[1:], start=1):
        if np.ptp(X[:, j]) == 0:
            raise ConstantColumn(name)
    cap = X[:, 2]
    X[:, 2] = (cap - cap.mean()) / cap.std(ddof=1)
    X.setflags(write=False)
    y.setflags(write=False)
    return DesignMatrix(X, y, DESIGN_COLUMNS, year, block_level,
                        tuple(r.id for r in active)), active
