"""Discrete scenario spaces, their hyperplane partition, and CSV I/O.

A scenario is a tuple of categorical level indices, one per feature of a
:class:`FeatureSchema`. One feature (e.g. ``town``) is designated as the
hyperplane feature: scenarios sharing its level form one group of the
hierarchical model.

CSV layout::

    scenarios.csv      scenario_id,<feature1>,<feature2>,...
    observations.csv   scenario_id,count

Level names are written verbatim and must not contain commas.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "ScenarioFormatError",
    "FeatureSchema",
    "Scenario",
    "ScenarioSpace",
    "Observation",
    "partition_by_hyperplane",
    "group_counts",
    "load_space",
    "write_space",
    "load_observations",
    "write_observations",
]


class ScenarioFormatError(ValueError):
    """Raised for malformed scenario/observation files or invalid contents."""


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[tuple[str, tuple[str, ...]], ...]
    hyperplane_feature: str

    def __post_init__(self):
        feats = tuple((str(name), tuple(str(lv) for lv in levels)) for name, levels in self.features)
        object.__setattr__(self, "features", feats)
        names = [name for name, _ in feats]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate feature names in {names}")
        for name, levels in feats:
            if not levels:
                raise ValueError(f"feature {name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise ValueError(f"feature {name!r} has duplicate levels")
            if name == "scenario_id":
                raise ValueError("'scenario_id' is reserved")
        if self.hyperplane_feature not in names:
            raise ValueError(f"hyperplane feature {self.hyperplane_feature!r} is not a declared feature")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.features]

    @property
    def level_counts(self) -> list[int]:
        return [len(levels) for _, levels in self.features]

    @property
    def hyperplane_index(self) -> int:
        return self.names.index(self.hyperplane_feature)

    @property
    def hyperplane_levels(self) -> tuple[str, ...]:
        return self.features[self.hyperplane_index][1]

    def levels(self, feature: str) -> tuple[str, ...]:
        return self.features[self.names.index(feature)][1]

    def capacity(self) -> int:
        return math.prod(self.level_counts)


@dataclass(frozen=True)
class Scenario:
    id: int
    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if int(self.id) < 0:
            raise ValueError(f"scenario id must be nonnegative, got {self.id}")


@dataclass(frozen=True)
class Observation:
    scenario_id: int
    count: int

    def __post_init__(self):
        if int(self.count) < 0:
            raise ValueError(f"negative count {self.count} for scenario {self.scenario_id}")


@dataclass(frozen=True)
class ScenarioSpace:
    """Immutable collection of scenarios over a schema.

    Lookups by id go through :meth:`get` / :meth:`index_of`; callers should
    never rely on list positions since ids are the stable reference.
    """

    schema: FeatureSchema
    scenarios: tuple[Scenario, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        scenarios = tuple(self.scenarios)
        object.__setattr__(self, "scenarios", scenarios)
        counts = self.schema.level_counts
        index = {}
        seen_coords = set()
        for pos, s in enumerate(scenarios):
            if len(s.coords) != len(counts):
                raise ValueError(f"scenario {s.id}: expected {len(counts)} coords, got {len(s.coords)}")
            for c, k in zip(s.coords, counts):
                if not 0 <= c < k:
                    raise ValueError(f"scenario {s.id}: level index {c} out of range [0, {k})")
            if s.id in index:
                raise ValueError(f"duplicate scenario id {s.id}")
            if s.coords in seen_coords:
                raise ValueError(f"scenario {s.id} duplicates the coordinates of another scenario")
            index[s.id] = pos
            seen_coords.add(s.coords)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.scenarios)

    def __contains__(self, scenario_id) -> bool:
        return scenario_id in self._index

    @property
    def ids(self) -> list[int]:
        return [s.id for s in self.scenarios]

    def get(self, scenario_id: int) -> Scenario:
        try:
            return self.scenarios[self._index[scenario_id]]
        except KeyError:
            raise KeyError(f"unknown scenario id {scenario_id}") from None

    def index_of(self, scenario_id: int) -> int:
        try:
            return self._index[scenario_id]
        except KeyError:
            raise KeyError(f"unknown scenario id {scenario_id}") from None

    def hyperplane_of(self, scenario_id: int) -> int:
        """Level index of the hyperplane feature for a scenario."""
        return self.get(scenario_id).coords[self.schema.hyperplane_index]

    def hyperplane_indices(self) -> list[int]:
        """Hyperplane level index of every scenario, in space order."""
        h = self.schema.hyperplane_index
        return [s.coords[h] for s in self.scenarios]

    def level_names(self, scenario_id: int) -> dict[str, str]:
        s = self.get(scenario_id)
        return {name: levels[c] for (name, levels), c in zip(self.schema.features, s.coords)}


def partition_by_hyperplane(space: ScenarioSpace) -> dict[str, list[int]]:
    """Group scenario ids by their hyperplane level.

    Keys follow schema level order and only levels that occur are present.
    Within a group ids are sorted, so the result does not depend on the
    order in which scenarios were listed.
    """
    levels = space.schema.hyperplane_levels
    h = space.schema.hyperplane_index
    groups: dict[int, list[int]] = {}
    for s in space.scenarios:
        groups.setdefault(s.coords[h], []).append(s.id)
    return {levels[k]: sorted(groups[k]) for k in sorted(groups)}


def group_counts(observations: Iterable[Observation], space: ScenarioSpace) -> list[list[int]]:
    """Observed counts per hyperplane level (one list per level, schema order)."""
    out: list[list[int]] = [[] for _ in space.schema.hyperplane_levels]
    for obs in observations:
        if obs.scenario_id not in space:
            raise KeyError(f"observation refers to unknown scenario id {obs.scenario_id}")
        out[space.hyperplane_of(obs.scenario_id)].append(int(obs.count))
    return out


def _natural_key(text: str):
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok) for tok in re.split(r"(\d+)", text) if tok]


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScenarioFormatError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            rows.append((reader.line_num, [cell.strip() for cell in row]))
    return [h.strip() for h in header], rows


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioFormatError(f"invalid {what} {text!r}, line {line}") from None


def load_space(path, hyperplane_feature: str, levels: dict[str, Sequence[str]] | None = None) -> ScenarioSpace:
    """Read ``scenarios.csv``.

    Feature levels are taken from ``levels`` when given (unknown values are
    rejected). Otherwise the distinct values of each column are used in
    natural sort order ("Town2" < "Town10", "10" < "150"), which matters for
    ordinal features since strata in :func:`~plane_sample.selection.lhs_select`
    follow level order.
    """
    header, rows = _read_rows(path)
    if not header or header[0] != "scenario_id" or len(header) < 2:
        raise ScenarioFormatError(f"{path}: header must start with 'scenario_id' followed by features, line 1")
    names = header[1:]
    if levels is not None:
        missing = [n for n in names if n not in levels]
        if missing:
            raise ScenarioFormatError(f"{path}: no levels declared for features {missing}")
        level_lists = {n: [str(v) for v in levels[n]] for n in names}
    else:
        level_lists = {n: [] for n in names}
    lookup = {n: {v: i for i, v in enumerate(level_lists[n])} for n in names}

    scenarios = []
    seen = set()
    for line, row in rows:
        if len(row) != len(header):
            raise ScenarioFormatError(f"expected {len(header)} fields, got {len(row)}, line {line}")
        sid = _parse_int(row[0], "scenario_id", line)
        if sid < 0:
            raise ScenarioFormatError(f"negative scenario_id, line {line}")
        if sid in seen:
            raise ScenarioFormatError(f"duplicate scenario_id {sid}, line {line}")
        seen.add(sid)
        coords = []
        for name, value in zip(names, row[1:]):
            table = lookup[name]
            if value not in table:
                if levels is not None:
                    raise ScenarioFormatError(f"unknown level {value!r} for feature {name!r}, line {line}")
                table[value] = len(level_lists[name])
                level_lists[name].append(value)
            coords.append(table[value])
        scenarios.append(Scenario(sid, tuple(coords)))

    if levels is None:
        for n in names:
            order = sorted(range(len(level_lists[n])), key=lambda i: _natural_key(level_lists[n][i]))
            remap = {old: new for new, old in enumerate(order)}
            level_lists[n] = [level_lists[n][i] for i in order]
            k = names.index(n)
            scenarios = [
                Scenario(s.id, s.coords[:k] + (remap[s.coords[k]],) + s.coords[k + 1:]) for s in scenarios
            ]
    try:
        schema = FeatureSchema(tuple((n, tuple(level_lists[n])) for n in names), hyperplane_feature)
        return ScenarioSpace(schema, tuple(scenarios))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from None


def write_space(space: ScenarioSpace, path) -> None:
    names = space.schema.names
    for name, levels in space.schema.features:
        for lv in levels:
            if "," in lv or "\n" in lv:
                raise ValueError(f"level {lv!r} of feature {name!r} cannot be written unquoted")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario_id", *names])
        for s in space.scenarios:
            writer.writerow([s.id, *(levels[c] for (_, levels), c in zip(space.schema.features, s.coords))])


def load_observations(path, space: ScenarioSpace) -> list[Observation]:
    header, rows = _read_rows(path)
    if header != ["scenario_id", "count"]:
        raise ScenarioFormatError(f"{path}: header must be 'scenario_id,count', line 1")
    out = []
    for line, row in rows:
        if len(row) != 2:
            raise ScenarioFormatError(f"expected 2 fields, got {len(row)}, line {line}")
        sid = _parse_int(row[0], "scenario_id", line)
        count = _parse_int(row[1], "count", line)
        if count < 0:
            raise ScenarioFormatError(f"negative count, line {line}")
        if sid not in space:
            raise ScenarioFormatError(f"unknown scenario_id {sid}, line {line}")
        out.append(Observation(sid, count))
    return out


def write_observations(observations: Iterable[Observation], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario_id", "count"])
        for obs in observations:
            writer.writerow([obs.scenario_id, obs.count])
