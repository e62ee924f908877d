"""Failure-inducing change-set minimization over unified diffs.

A unified diff against a baseline tree is split into atomic changes:
within each hunk, maximal runs of changed lines separated by at least two
unchanged lines become separate changes (a single unchanged line glues its
neighbors together and travels with them).  Arbitrary subsets of changes
can then be applied to the baseline; a context mismatch is a conflict,
which the oracle adapter reports as UNRESOLVED.

Changes can be grouped by file, directory, or a caller-supplied key map,
and a dependency relation ("change i requires change j") lets infeasible
subsets be rejected before any process is spawned.
"""

from __future__ import annotations

import hashlib
import posixpath
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from .core import (
    Configuration,
    Delta,
    EngineOptions,
    MinimizationResult,
    Outcome,
    SOURCE_FEASIBILITY,
    TestOracle,
    as_oracle,
    ddmin,
)
from .proc import CommandOracle, CommandOracleSpec, MaterializeConflict

FileTree = dict[str, str]


class DiffParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ChangeConflict(Exception):
    """A change's old lines do not match the tree it is applied to."""


@dataclass(frozen=True)
class AtomicChange:
    """One contiguous edit: replace ``old_lines`` at ``anchor`` with
    ``new_lines``.

    ``anchor`` is the 1-based line number of the first old line in the
    original file; for pure insertions it names the line before which the
    new lines go (len(original)+1 appends at the end).
    """

    file: str
    anchor: int
    old_lines: tuple[str, ...]
    new_lines: tuple[str, ...]
    group_key: Optional[str] = None
    old_no_newline: bool = False
    new_no_newline: bool = False


@dataclass
class ChangeSet:
    baseline_digest: str
    changes: tuple[AtomicChange, ...]
    # child change id -> ids it requires
    dependencies: dict[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        # Stacked change sets may touch the same anchor repeatedly (later
        # changes apply on top of earlier ones), so only sortedness is
        # required here; diff-derived changes are checked strictly by the
        # parser.
        _check_ordering(self.changes, strict=False)
        _check_acyclic(self.dependencies)

    def __len__(self) -> int:
        return len(self.changes)

    def deltas(self) -> list[Delta]:
        return [
            Delta(id=i, label=f"{ch.file}:{ch.anchor}", payload=ch)
            for i, ch in enumerate(self.changes)
        ]


def _check_ordering(changes: Sequence[AtomicChange], strict: bool = True) -> None:
    last_end: dict[str, int] = {}
    last_anchor: dict[str, int] = {}
    for ch in changes:
        start = ch.anchor
        if strict and start <= last_end.get(ch.file, 0):
            raise ValueError(
                f"changes in {ch.file} overlap or are out of order near line {start}"
            )
        if not strict and start < last_anchor.get(ch.file, 0):
            raise ValueError(
                f"changes in {ch.file} are out of anchor order near line {start}"
            )
        # An insertion occupies no old lines but still orders by anchor.
        last_end[ch.file] = start + max(len(ch.old_lines), 1) - 1
        last_anchor[ch.file] = start


def _check_acyclic(dependencies: Mapping[int, frozenset[int]]) -> None:
    state: dict[int, int] = {}  # 1 = visiting, 2 = done

    def visit(node: int, stack: list[int]) -> None:
        mark = state.get(node)
        if mark == 2:
            return
        if mark == 1:
            raise ValueError(f"dependency cycle through change {node}: {stack}")
        state[node] = 1
        for parent in dependencies.get(node, ()):
            visit(parent, stack + [parent])
        state[node] = 2

    for node in dependencies:
        visit(node, [node])


# --- tree helpers -----------------------------------------------------------

def _split_content(text: str) -> tuple[list[str], bool]:
    if text == "":
        return [], False
    lines = text.split("\n")
    if lines[-1] == "":
        return lines[:-1], True
    return lines, False


def _join_content(lines: list[str], trailing_newline: bool) -> str:
    if not lines:
        return ""
    return "\n".join(lines) + ("\n" if trailing_newline else "")


def digest_tree(tree: FileTree) -> str:
    h = hashlib.sha256()
    for path in sorted(tree):
        h.update(path.encode("utf-8") + b"\0")
        h.update(tree[path].encode("utf-8") + b"\0")
    return h.hexdigest()


def load_tree(root: Union[str, Path]) -> FileTree:
    root = Path(root)
    tree: FileTree = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            rel = path.relative_to(root).as_posix()
            tree[rel] = path.read_text(encoding="utf-8")
    return tree


def write_tree(tree: FileTree, root: Union[str, Path]) -> None:
    root = Path(root)
    for rel, content in tree.items():
        dest = root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(content, encoding="utf-8")


# --- unified diff parsing ---------------------------------------------------

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_SKIP_PREFIXES = (
    "diff ", "index ", "new file", "deleted file", "old mode", "new mode",
    "similarity", "rename ", "copy ", "Binary files",
)


def _strip_diff_path(raw: str) -> str:
    path = raw.split("\t")[0].strip()
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return path


@dataclass
class _Entry:
    kind: str       # ' ', '-', '+'
    text: str
    old_ln: int     # for '+': the next original line (insertion point)
    diff_ln: int


def split_unified_diff(diff_text: str) -> list[AtomicChange]:
    """Parse a unified diff into atomic changes.

    Each maximal run of changed lines separated from the next by two or
    more unchanged lines becomes one change; a separating run of exactly
    one unchanged line is folded into a single change (it appears in both
    the old and the new lines).
    """
    lines = diff_text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    changes: list[AtomicChange] = []
    current_file: Optional[str] = None
    old_path: Optional[str] = None
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        lineno = i + 1
        if line.startswith("--- "):
            old_path = _strip_diff_path(line[4:])
            i += 1
            continue
        if line.startswith("+++ "):
            new_path = _strip_diff_path(line[4:])
            current_file = new_path if new_path != "/dev/null" else old_path
            i += 1
            continue
        if line.startswith("@@"):
            match = _HUNK_RE.match(line)
            if match is None:
                raise DiffParseError(f"malformed hunk header {line!r}", lineno)
            if current_file is None:
                raise DiffParseError("hunk before any file header", lineno)
            old_start = int(match.group(1))
            old_count = int(match.group(2) or "1")
            new_count = int(match.group(4) or "1")
            # For an empty old range the header names the line before the
            # insertion point, so the first affected line is one further on.
            old_ln = old_start if old_count > 0 else old_start + 1
            i += 1
            entries: list[_Entry] = []
            seen_old = seen_new = 0
            while i < n and (seen_old < old_count or seen_new < new_count):
                body = lines[i]
                body_ln = i + 1
                if body.startswith("\\"):
                    _mark_no_newline(entries, body_ln)
                    i += 1
                    continue
                if body.startswith(" ") or body == "":
                    entries.append(_Entry(" ", body[1:], old_ln, body_ln))
                    old_ln += 1
                    seen_old += 1
                    seen_new += 1
                elif body.startswith("-"):
                    entries.append(_Entry("-", body[1:], old_ln, body_ln))
                    old_ln += 1
                    seen_old += 1
                elif body.startswith("+"):
                    entries.append(_Entry("+", body[1:], old_ln, body_ln))
                    seen_new += 1
                else:
                    raise DiffParseError(f"unexpected line in hunk: {body!r}", body_ln)
                i += 1
            if seen_old != old_count or seen_new != new_count:
                raise DiffParseError(
                    f"hunk is shorter than its header promises "
                    f"(-{old_count}/+{new_count})",
                    lineno,
                )
            if i < n and lines[i].startswith("\\"):
                _mark_no_newline(entries, i + 1)
                i += 1
            changes.extend(_split_hunk(current_file, entries))
            continue
        if line == "" or line.startswith(_SKIP_PREFIXES):
            i += 1
            continue
        raise DiffParseError(f"unexpected text outside any hunk: {line!r}", lineno)

    changes.sort(key=lambda ch: (ch.file, ch.anchor))
    _check_ordering(changes)
    return changes


def _mark_no_newline(entries: list[_Entry], lineno: int) -> None:
    if not entries:
        raise DiffParseError("newline marker before any hunk line", lineno)
    prev = entries[-1]
    # Flag the side(s) the preceding line belongs to.
    entries[-1] = _Entry(prev.kind + "$", prev.text, prev.old_ln, prev.diff_ln)


def _split_hunk(file: str, entries: list[_Entry]) -> list[AtomicChange]:
    def is_change(e: _Entry) -> bool:
        return e.kind[0] in "+-"

    # Maximal runs of changed entries, as (start, end) index pairs.
    runs: list[list[int]] = []
    idx = 0
    while idx < len(entries):
        if is_change(entries[idx]):
            start = idx
            while idx < len(entries) and is_change(entries[idx]):
                idx += 1
            runs.append([start, idx - 1])
        else:
            idx += 1
    if not runs:
        return []

    # Merge runs whose separating context is a single unchanged line.
    merged = [runs[0]]
    for start, end in runs[1:]:
        gap = start - merged[-1][1] - 1
        if gap < 2:
            merged[-1][1] = end
        else:
            merged.append([start, end])

    changes = []
    for start, end in merged:
        old_lines = []
        new_lines = []
        old_no_nl = new_no_nl = False
        for e in entries[start:end + 1]:
            kind = e.kind[0]
            flagged = e.kind.endswith("$")
            if kind in (" ", "-"):
                old_lines.append(e.text)
                old_no_nl = old_no_nl or flagged
            if kind in (" ", "+"):
                new_lines.append(e.text)
                new_no_nl = new_no_nl or flagged
        changes.append(AtomicChange(
            file=file,
            anchor=entries[start].old_ln,
            old_lines=tuple(old_lines),
            new_lines=tuple(new_lines),
            old_no_newline=old_no_nl,
            new_no_newline=new_no_nl,
        ))
    return changes


def render_unified_diff(changes: Sequence[AtomicChange]) -> str:
    """Render atomic changes as a zero-context unified diff."""
    out: list[str] = []
    per_file: dict[str, list[AtomicChange]] = {}
    for ch in changes:
        per_file.setdefault(ch.file, []).append(ch)
    for file in sorted(per_file):
        out.append(f"--- a/{file}")
        out.append(f"+++ b/{file}")
        offset = 0
        for ch in sorted(per_file[file], key=lambda c: c.anchor):
            old_len = len(ch.old_lines)
            new_len = len(ch.new_lines)
            old_start = ch.anchor if old_len else ch.anchor - 1
            new_start = ch.anchor + offset if new_len else ch.anchor + offset - 1
            out.append(f"@@ -{old_start},{old_len} +{new_start},{new_len} @@")
            for text in ch.old_lines:
                out.append(f"-{text}")
            if ch.old_no_newline:
                out.append("\\ No newline at end of file")
            for text in ch.new_lines:
                out.append(f"+{text}")
            if ch.new_no_newline:
                out.append("\\ No newline at end of file")
            offset += new_len - old_len
    return "\n".join(out) + ("\n" if out else "")


# --- applying subsets -------------------------------------------------------

def apply_subset(
    baseline: FileTree, changeset: ChangeSet, config: Configuration
) -> FileTree:
    """Apply the included changes to the baseline tree.

    Changes are applied per file in ascending anchor order with cumulative
    line-offset adjustment; the old lines must match the current content at
    the adjusted anchor, otherwise ``ChangeConflict`` is raised.
    """
    if config.universe_size != len(changeset.changes):
        raise ValueError(
            f"configuration is over {config.universe_size} deltas, "
            f"change set has {len(changeset.changes)}"
        )
    per_file: dict[str, list[tuple[int, AtomicChange]]] = {}
    for i in config.members:
        ch = changeset.changes[i]
        per_file.setdefault(ch.file, []).append((i, ch))

    tree = dict(baseline)
    for file, pairs in per_file.items():
        lines, trailing = _split_content(tree.get(file, ""))
        offset = 0
        for i, ch in pairs:  # already ascending by anchor
            pos = ch.anchor - 1 + offset
            old = list(ch.old_lines)
            if pos < 0 or pos + len(old) > len(lines):
                raise ChangeConflict(
                    f"change {i} at {file}:{ch.anchor}: range falls outside the file"
                )
            if lines[pos:pos + len(old)] != old:
                raise ChangeConflict(
                    f"change {i} at {file}:{ch.anchor}: context mismatch"
                )
            if ch.old_no_newline and (trailing or pos + len(old) != len(lines)):
                raise ChangeConflict(
                    f"change {i} at {file}:{ch.anchor}: expected no trailing newline"
                )
            lines[pos:pos + len(old)] = list(ch.new_lines)
            if ch.old_no_newline:
                trailing = True
            if ch.new_no_newline:
                if pos + len(ch.new_lines) != len(lines):
                    raise ChangeConflict(
                        f"change {i} at {file}:{ch.anchor}: no-newline change "
                        f"must end the file"
                    )
                trailing = False
            offset += len(ch.new_lines) - len(ch.old_lines)
        tree[file] = _join_content(lines, trailing)
    return tree


def change_materializer(
    baseline: FileTree, changeset: ChangeSet
) -> Callable[[Configuration, Path], list[str]]:
    """Materializer writing the patched tree into the workspace; the test
    command receives the workspace directory as its trailing argument."""

    def materialize(config: Configuration, workspace: Path) -> list[str]:
        try:
            tree = apply_subset(baseline, changeset, config)
        except ChangeConflict as exc:
            raise MaterializeConflict(str(exc)) from exc
        write_tree(tree, workspace)
        return [str(workspace)]

    return materialize


# --- grouping ---------------------------------------------------------------

GroupKey = Union[str, Mapping[int, str]]


@dataclass
class GroupedUniverse:
    """Change ids folded into group deltas; including a group includes all
    of its member changes."""

    keys: tuple[str, ...]                 # group id -> key value
    members: tuple[tuple[int, ...], ...]  # group id -> change ids

    def __len__(self) -> int:
        return len(self.keys)

    def deltas(self) -> list[Delta]:
        return [
            Delta(id=i, label=key, payload=members)
            for i, (key, members) in enumerate(zip(self.keys, self.members))
        ]

    def expand(self, group_config: Configuration, universe_size: int) -> Configuration:
        ids: list[int] = []
        for g in group_config.members:
            ids.extend(self.members[g])
        return Configuration(universe_size, sorted(ids))

    def project(self, change_ids: Sequence[int]) -> Configuration:
        """Group configuration containing every group that owns one of the
        given change ids."""
        wanted = set(change_ids)
        groups = [
            g for g, members in enumerate(self.members)
            if wanted.intersection(members)
        ]
        return Configuration(len(self.keys), groups)


def group_deltas(changeset: ChangeSet, key: GroupKey) -> GroupedUniverse:
    """Fold changes into one delta per distinct key value.

    ``key`` is "file", "directory", or a mapping from change id to an
    arbitrary key string.  Groups are ordered by first appearance.
    """
    def key_of(i: int, ch: AtomicChange) -> str:
        if key == "file":
            return ch.file
        if key == "directory":
            return posixpath.dirname(ch.file) or "."
        if isinstance(key, Mapping):
            if i not in key:
                raise ValueError(f"group map is missing change id {i}")
            return key[i]
        raise ValueError(f"unknown grouping key {key!r}")

    order: list[str] = []
    members: dict[str, list[int]] = {}
    for i, ch in enumerate(changeset.changes):
        k = key_of(i, ch)
        if k not in members:
            order.append(k)
            members[k] = []
        members[k].append(i)
    return GroupedUniverse(
        keys=tuple(order),
        members=tuple(tuple(members[k]) for k in order),
    )


class MappedOracle:
    """Evaluates a coarser universe by expanding each configuration through
    a mapping into the underlying change universe."""

    def __init__(self, oracle, expand: Callable[[Configuration], Configuration]):
        self._oracle = as_oracle(oracle)
        self._expand = expand

    def evaluate(self, config: Configuration) -> Outcome:
        return self.evaluate_ex(config)[0]

    def evaluate_ex(self, config: Configuration) -> tuple[Outcome, str]:
        expanded = self._expand(config)
        ex = getattr(self._oracle, "evaluate_ex", None)
        if ex is not None:
            return ex(expanded)
        return self._oracle.evaluate(expanded), "oracle"


# --- dependencies / feasibility ---------------------------------------------

def parse_dependencies(text: str) -> dict[int, frozenset[int]]:
    """Parse `CHILD<TAB>PARENT` lines (decimal change ids) into edges."""
    edges: dict[int, set[int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected CHILD<TAB>PARENT, got {line!r}")
        try:
            child, parent = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: ids must be decimal integers") from exc
        edges.setdefault(child, set()).add(parent)
    return {child: frozenset(parents) for child, parents in edges.items()}


def parse_group_map(text: str) -> dict[int, str]:
    """Parse `CHANGE-ID<TAB>KEY` lines into a custom grouping map."""
    mapping: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected CHANGE-ID<TAB>KEY, got {line!r}")
        try:
            mapping[int(parts[0])] = parts[1]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: change id must be a decimal integer") from exc
    return mapping


def is_closed(config: Configuration, dependencies: Mapping[int, frozenset[int]]) -> bool:
    bits = config.bits
    for member in config.members:
        for parent in dependencies.get(member, ()):
            if not bits >> parent & 1:
                return False
    return True


class FeasibilityOracle:
    """Answers UNRESOLVED for configurations not closed under "requires"
    edges, without consulting the underlying oracle."""

    def __init__(self, oracle, dependencies: Mapping[int, frozenset[int]]):
        _check_acyclic(dependencies)
        self._oracle = as_oracle(oracle)
        self.dependencies = dict(dependencies)

    def evaluate(self, config: Configuration) -> Outcome:
        return self.evaluate_ex(config)[0]

    def evaluate_ex(self, config: Configuration) -> tuple[Outcome, str]:
        if not is_closed(config, self.dependencies):
            return Outcome.UNRESOLVED, SOURCE_FEASIBILITY
        ex = getattr(self._oracle, "evaluate_ex", None)
        if ex is not None:
            return ex(config)
        return self._oracle.evaluate(config), "oracle"


def feasibility_filter(changeset: ChangeSet) -> Callable[[TestOracle], FeasibilityOracle]:
    """Decorator rejecting subsets that violate the dependency order."""

    def decorate(oracle) -> FeasibilityOracle:
        return FeasibilityOracle(oracle, changeset.dependencies)

    return decorate


# --- driver -------------------------------------------------------------------

@dataclass
class ChangePass:
    label: str  # "groups" or "changes"
    result: MinimizationResult


@dataclass
class ChangeMinimization:
    final: Configuration  # over the raw change universe
    passes: list[ChangePass]
    diff_text: str
    oracle: CommandOracle

    @property
    def final_result(self) -> MinimizationResult:
        return self.passes[-1].result


def minimize_changes(
    baseline: FileTree,
    changeset: ChangeSet,
    spec: CommandOracleSpec,
    groups: Optional[GroupKey] = None,
    options: Optional[EngineOptions] = None,
) -> ChangeMinimization:
    """Shrink the change set to a 1-minimal failure-inducing subset.

    With ``groups``, a first pass minimizes over group deltas and a second
    pass then minimizes over the winning groups' member changes.  Infeasible
    subsets (per the dependency relation) are rejected before any process
    is spawned.
    """
    n = len(changeset)
    command = CommandOracle(spec.with_materializer(change_materializer(baseline, changeset)))
    oracle = (
        FeasibilityOracle(command, changeset.dependencies)
        if changeset.dependencies else command
    )
    passes: list[ChangePass] = []

    member_ids = list(range(n))
    if groups is not None:
        grouped = group_deltas(changeset, groups)
        group_oracle = MappedOracle(oracle, lambda cfg: grouped.expand(cfg, n))
        group_result = ddmin(Configuration.full(len(grouped)), group_oracle, options)
        passes.append(ChangePass("groups", group_result))
        member_ids = sorted(grouped.expand(group_result.final, n).members)

    mapping = list(member_ids)
    member_oracle = MappedOracle(
        oracle, lambda cfg: Configuration(n, [mapping[i] for i in cfg.members])
    )
    member_result = ddmin(Configuration.full(len(mapping)), member_oracle, options)
    passes.append(ChangePass("changes", member_result))
    final = Configuration(n, [mapping[i] for i in member_result.final.members])
    diff_text = render_unified_diff([changeset.changes[i] for i in final.members])
    return ChangeMinimization(
        final=final, passes=passes, diff_text=diff_text, oracle=command
    )
