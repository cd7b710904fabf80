"""Tolerant lexical and structural analysis of possibly-malformed Python source.

Everything in this module must keep working on code a real parser rejects:
half-finished functions, unterminated strings, unbalanced brackets, and
inconsistent indentation. The scanner therefore works on characters and
physical lines, never on an AST, and degrades gracefully: malformed regions
are flagged, not fatal.

The central primitive is a one-pass character scan (:func:`_scan`) that masks
string literals and comments, tracks bracket depth, and records per-line
continuation state. Logical-line grouping, delimiter balance, top-level unit
segmentation, tolerant re-indentation, name extraction, and the heuristic
syntax check are all views over that single scan.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass
from typing import Optional

TAB_WIDTH = 8

# Column-0 keywords that force a new statement even while brackets are open.
# This is the tolerance that lets a delimiter-broken function be followed by
# a recognizable fresh definition instead of swallowing the rest of the file.
_SEVER_RE = re.compile(r"^(?:@|(?:def|class|import|from|async|if)\b)")

# Clause keywords never open a new top-level unit; they extend the previous one.
_CLAUSE_RE = re.compile(r"^(?:else\b|elif\b|except\b|finally\b|case\b)")

_MAIN_GUARD_RE = re.compile(r"^if\b[^:]*__name__[^:]*__main__|^if\b[^:]*__main__[^:]*__name__")

_DEF_RE = re.compile(r"^\s*(?:async\s+)?def\s+([A-Za-z_]\w*)")
_CLASS_RE = re.compile(r"^\s*class\s+([A-Za-z_]\w*)")

_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


@dataclass(frozen=True)
class LogicalLine:
    """One statement after joining explicit and implicit continuations."""

    physical_span: tuple[int, int]  # 1-based inclusive
    indent_width: int  # columns; tabs advance to the next multiple of 8
    text: str  # comment-stripped source text of the statement
    in_string_carry: bool  # statement contains a string left open at EOF


@dataclass(frozen=True)
class BalanceReport:
    final_depth: int
    first_excess_close: Optional[tuple[int, int]]  # 1-based (line, col)
    unterminated_string: bool
    max_depth: int


@dataclass(frozen=True)
class Unit:
    """A maximal column-0 construct: the granule of truncation."""

    kind: str  # import_stmt|function_def|class_def|main_guard|decorated_def|bare_statement
    name: Optional[str]
    line_span: tuple[int, int]  # 1-based inclusive
    complete: bool


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    reason: str  # ok|unbalanced|unterminated_string|incomplete_unit|inconsistent_indent


class _LineInfo:
    __slots__ = (
        "raw",
        "masked",
        "indent",
        "carry_in",
        "carry_out",
        "delta",
        "backslash",
        "blank",
        "comment_col",
        "string_spans",
    )

    def __init__(self, raw: str) -> None:
        self.raw = raw
        self.masked = raw
        self.indent = 0
        self.carry_in = False
        self.carry_out = False
        self.delta = 0
        self.backslash = False
        self.blank = True
        self.comment_col: Optional[int] = None
        self.string_spans: list[tuple[int, int]] = []


class _Scan:
    __slots__ = (
        "lines",
        "final_depth",
        "first_excess_close",
        "unterminated_string",
        "max_depth",
    )

    def __init__(self) -> None:
        self.lines: list[_LineInfo] = []
        self.final_depth = 0
        self.first_excess_close: Optional[tuple[int, int]] = None
        self.unterminated_string = False
        self.max_depth = 0


def _indent_cols(line: str) -> int:
    col = 0
    for ch in line:
        if ch == " ":
            col += 1
        elif ch == "\t":
            col = (col // TAB_WIDTH + 1) * TAB_WIDTH
        elif ch == "\f":
            continue
        else:
            break
    return col


def _scan(source: str) -> _Scan:
    scan = _Scan()
    raw_lines = source.split("\n")
    depth = 0
    in_string = False
    quote = ""
    triple = False
    escape = False

    for lineno, raw in enumerate(raw_lines, start=1):
        info = _LineInfo(raw)
        info.carry_in = in_string
        masked = list(raw)
        line_delta = 0
        str_start = 0 if in_string else -1
        i = 0
        n = len(raw)
        ended_with_backslash = False
        while i < n:
            ch = raw[i]
            if in_string:
                if escape:
                    escape = False
                    masked[i] = " "
                    i += 1
                    continue
                if ch == "\\":
                    escape = True
                    masked[i] = " "
                    i += 1
                    continue
                if ch == quote and (not triple or raw[i : i + 3] == quote * 3):
                    width = 3 if triple else 1
                    for k in range(i, min(i + width, n)):
                        masked[k] = " "
                    info.string_spans.append((str_start, i))
                    in_string = False
                    str_start = -1
                    i += width
                    continue
                masked[i] = " "
                i += 1
                continue
            if ch == "#":
                info.comment_col = i
                for k in range(i, n):
                    masked[k] = " "
                break
            if ch in "'\"":
                if raw[i : i + 3] == ch * 3:
                    in_string, quote, triple = True, ch, True
                    for k in range(i, i + 3):
                        masked[k] = " "
                    str_start = i + 3
                    i += 3
                else:
                    in_string, quote, triple = True, ch, False
                    masked[i] = " "
                    str_start = i + 1
                i += 1
                continue
            if ch in "([{":
                depth += 1
                line_delta += 1
                scan.max_depth = max(scan.max_depth, depth)
            elif ch in ")]}":
                if depth == 0:
                    if scan.first_excess_close is None:
                        scan.first_excess_close = (lineno, i + 1)
                else:
                    depth -= 1
                    line_delta -= 1
            elif ch == "\\" and i == n - 1:
                ended_with_backslash = True
            i += 1

        if in_string:
            if escape:
                # Backslash-newline inside a short string: string continues.
                escape = False
                info.carry_out = True
            elif triple:
                info.carry_out = True
            else:
                # A single-quoted string hit end-of-line: record and resume.
                scan.unterminated_string = True
                info.string_spans.append((str_start, n))
                in_string = False
        if in_string and str_start >= 0:
            info.string_spans.append((str_start, n))

        info.masked = "".join(masked)
        info.indent = _indent_cols(raw)
        info.delta = line_delta
        info.backslash = ended_with_backslash and not info.carry_out
        info.blank = not info.carry_in and not info.carry_out and info.masked.strip() == ""
        scan.lines.append(info)

    if in_string:
        scan.unterminated_string = True
    scan.final_depth = depth
    return scan


def _logical_starts(scan: _Scan) -> list[tuple[int, int]]:
    """Group physical lines into statements; returns (start, end) 0-based pairs."""
    groups: list[tuple[int, int]] = []
    lines = scan.lines
    i = 0
    n = len(lines)
    while i < n:
        if lines[i].blank and not lines[i].carry_in:
            i += 1
            continue
        start = i
        local_depth = 0
        while True:
            local_depth = max(0, local_depth + lines[i].delta)
            join = False
            if lines[i].carry_out:
                join = True
            elif lines[i].backslash:
                join = True
            elif local_depth > 0 and i + 1 < n:
                nxt = lines[i + 1]
                severs = (
                    not nxt.carry_in
                    and nxt.indent == 0
                    and _SEVER_RE.match(nxt.masked) is not None
                )
                join = not severs
            if not join or i + 1 >= n:
                break
            i += 1
        groups.append((start, i))
        i += 1
    return groups


def logical_lines(source: str) -> list[LogicalLine]:
    """Statements of ``source`` after joining continuations.

    Backslash continuations, implicit continuations inside open brackets, and
    triple-quoted string interiors all join into one logical line. Comments
    are stripped from the text; blank and comment-only lines belong to no
    logical line.
    """
    scan = _scan(source)
    out: list[LogicalLine] = []
    for start, end in _logical_starts(scan):
        parts = []
        carries = False
        for idx in range(start, end + 1):
            info = scan.lines[idx]
            text = info.raw
            if info.comment_col is not None:
                text = text[: info.comment_col].rstrip()
            parts.append(text)
            if (info.carry_out and idx == len(scan.lines) - 1) or (
                info.carry_out and idx == end
            ):
                carries = True
        out.append(
            LogicalLine(
                physical_span=(start + 1, end + 1),
                indent_width=scan.lines[start].indent,
                text="\n".join(parts),
                in_string_carry=carries and scan.unterminated_string,
            )
        )
    return out


def delimiter_balance(source: str) -> BalanceReport:
    """Bracket and quote accounting outside strings and comments."""
    scan = _scan(source)
    return BalanceReport(
        final_depth=scan.final_depth,
        first_excess_close=scan.first_excess_close,
        unterminated_string=scan.unterminated_string,
        max_depth=scan.max_depth,
    )


def _reindent_impl(source: str) -> tuple[str, bool]:
    scan = _scan(source)
    out = [info.raw for info in scan.lines]
    stack = [0]
    consistent = True
    for start, _end in _logical_starts(scan):
        info = scan.lines[start]
        width = info.indent
        if width > stack[-1]:
            stack.append(width)
        elif width in stack:
            while stack[-1] != width:
                stack.pop()
        else:
            # Width matches no open level: snap to the nearest lower entry.
            consistent = False
            while stack[-1] > width:
                stack.pop()
        depth = len(stack) - 1
        stripped = info.raw.lstrip(" \t\f")
        out[start] = "\t" * depth + stripped
    return "\n".join(out), consistent


def reindent(source: str) -> str:
    """Rewrite each statement's leading whitespace as one tab per block level.

    Indent widths are measured with 8-column tab stops. A width greater than
    the top of the stack opens a level; a width equal to an open level pops
    back to it; a width strictly between two open levels pops to the nearer
    lower one — that tolerance is what makes mismatched dedents compilable
    again. Continuation lines and string interiors are left byte-identical.
    """
    return _reindent_impl(source)[0]


def indentation_consistent(source: str) -> bool:
    """True when every dedent lands exactly on an open indentation level."""
    return _reindent_impl(source)[1]


def _unit_complete(sub_source: str) -> bool:
    bal = delimiter_balance(sub_source)
    if bal.final_depth != 0 or bal.first_excess_close is not None:
        return False
    if bal.unterminated_string:
        return False
    logs = logical_lines(sub_source)
    if not logs:
        return False
    last = logs[-1]
    text = last.text.rstrip()
    if text.endswith(":"):
        return False
    if text.endswith("\\"):
        return False
    return True


def segment_top_level(source: str) -> list[Unit]:
    """Split ``source`` into column-0 units: the granules Step-2 removes.

    A unit starts at every column-0 statement that is not a clause keyword
    (``else``/``elif``/``except``/``finally``/``case``) and runs until the
    next such statement. Decorators are glued to the definition they precede.
    Comments count as blank for boundary purposes but stay inside the
    enclosing span.
    """
    scan = _scan(source)
    groups = _logical_starts(scan)
    starts: list[int] = []
    for start, _end in groups:
        info = scan.lines[start]
        if info.indent != 0:
            continue
        if _CLAUSE_RE.match(info.masked.strip()):
            continue
        starts.append(start)
    if not starts:
        return []

    lines = scan.lines
    last_code = max(i for i, info in enumerate(lines) if not info.blank)

    raw_units: list[tuple[int, int]] = []
    for pos, s in enumerate(starts):
        end = (starts[pos + 1] - 1) if pos + 1 < len(starts) else last_code
        while end > s and lines[end].blank:
            end -= 1
        raw_units.append((s, end))

    # Glue decorator runs onto the definition that follows them.
    merged: list[tuple[int, int, bool]] = []
    i = 0
    while i < len(raw_units):
        s, e = raw_units[i]
        decorated = lines[s].masked.lstrip().startswith("@")
        j = i
        while (
            lines[raw_units[j][0]].masked.lstrip().startswith("@")
            and j + 1 < len(raw_units)
        ):
            j += 1
        if j != i:
            head = lines[raw_units[j][0]].masked.lstrip()
            if head.startswith(("def", "class", "async")):
                merged.append((s, raw_units[j][1], True))
                i = j + 1
                continue
        merged.append((s, e, decorated))
        i += 1

    units: list[Unit] = []
    for s, e, decorated in merged:
        header = None
        for idx in range(s, e + 1):
            stripped = lines[idx].masked.lstrip()
            if not lines[idx].blank and not stripped.startswith("@"):
                header = idx
                break
        head_text = lines[header].masked.strip() if header is not None else ""
        name = None
        if decorated and header is None:
            kind = "decorated_def"
        elif m := _DEF_RE.match(head_text):
            kind = "decorated_def" if decorated else "function_def"
            name = m.group(1)
        elif m := _CLASS_RE.match(head_text):
            kind = "decorated_def" if decorated else "class_def"
            name = m.group(1)
        elif head_text.startswith(("import ", "import\t")) or head_text.startswith(
            ("from ", "from\t")
        ):
            kind = "import_stmt"
        elif header is not None and _MAIN_GUARD_RE.match(lines[header].raw.strip()):
            # Matched on raw text: "__main__" usually sits inside a string.
            kind = "main_guard"
        elif decorated:
            kind = "decorated_def"
        else:
            kind = "bare_statement"
        sub = "\n".join(info.raw for info in lines[s : e + 1])
        complete = _unit_complete(sub)
        if kind == "decorated_def" and name is None:
            complete = False
        units.append(Unit(kind=kind, name=name, line_span=(s + 1, e + 1), complete=complete))
    return units


def masked_source(source: str) -> str:
    """``source`` with string interiors and comments blanked to spaces."""
    scan = _scan(source)
    return "\n".join(info.masked for info in scan.lines)


def string_contents(source: str) -> list[str]:
    """Raw characters inside every string literal, in order of appearance."""
    scan = _scan(source)
    out: list[str] = []
    for info in scan.lines:
        for a, b in info.string_spans:
            out.append(info.raw[a:b])
    return out


_IMPORT_LINE_RE = re.compile(r"^\s*(import|from)\b")


def imported_names(source: str) -> set[str]:
    """Names bound by import statements (module roots, members, aliases)."""
    bound: set[str] = set()
    for log in logical_lines(source):
        text = " ".join(log.text.split())
        if text.startswith("import "):
            for seg in text[len("import ") :].split(","):
                seg = seg.strip()
                if not seg:
                    continue
                if " as " in seg:
                    bound.add(seg.split(" as ")[1].strip())
                else:
                    bound.add(seg.split(".")[0].strip())
        elif text.startswith("from ") and " import " in text:
            rhs = text.split(" import ", 1)[1]
            for seg in rhs.split(","):
                seg = seg.strip().strip("()")
                if not seg or seg == "*":
                    continue
                if " as " in seg:
                    bound.add(seg.split(" as ")[1].strip())
                else:
                    bound.add(seg)
    return {b for b in bound if _IDENT_RE.fullmatch(b)}


def defined_names(source: str) -> set[str]:
    """Function/class names, assignment targets, parameters, imports.

    Lexical approximation: good enough to ask "does this file define
    something close to the name the interpreter said was missing?".
    """
    masked = masked_source(source)
    names: set[str] = set(imported_names(source))

    for m in re.finditer(r"\b(?:def|class)\s+([A-Za-z_]\w*)", masked):
        names.add(m.group(1))
    for m in re.finditer(r"\bdef\s+[A-Za-z_]\w*\s*\(([^)]*)\)", masked):
        for chunk in m.group(1).split(","):
            head = chunk.split("=")[0].split(":")[0].strip().lstrip("*").strip()
            if _IDENT_RE.fullmatch(head):
                names.add(head)
    for m in re.finditer(r"\blambda\b([^:]*):", masked):
        for chunk in m.group(1).split(","):
            head = chunk.split("=")[0].strip().lstrip("*").strip()
            if _IDENT_RE.fullmatch(head):
                names.add(head)
    for m in re.finditer(r"\bfor\s+(.+?)\s+in\b", masked):
        for ident in _IDENT_RE.findall(m.group(1)):
            names.add(ident)
    for m in re.finditer(r"\bas\s+([A-Za-z_]\w*)", masked):
        names.add(m.group(1))
    for m in re.finditer(r"([A-Za-z_]\w*)\s*:=", masked):
        names.add(m.group(1))

    for log in logical_lines(source):
        flat = _flatten_masked(log.text)
        target = _assignment_target(flat)
        if target:
            names.update(target)
    return {n for n in names if not keyword.iskeyword(n)}


def _flatten_masked(text: str) -> str:
    scan = _scan(text)
    return " ".join(info.masked for info in scan.lines)


_AUG_OPS = ("+", "-", "*", "/", "//", "%", "@", "&", "|", "^", ">>", "<<", "**")


def _assignment_target(flat: str) -> set[str]:
    depth = 0
    i = 0
    n = len(flat)
    eq = -1
    while i < n:
        ch = flat[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth = max(0, depth - 1)
        elif ch == "=" and depth == 0:
            prev = flat[i - 1] if i else ""
            nxt = flat[i + 1] if i + 1 < n else ""
            if nxt != "=" and prev not in "<>!=:":
                eq = i
                break
            if nxt == "=":
                i += 1
        i += 1
    if eq < 0:
        return set()
    lhs = flat[:eq].rstrip()
    for op in _AUG_OPS:
        if lhs.endswith(op):
            lhs = lhs[: -len(op)]
            break
    out: set[str] = set()
    for part in lhs.split(","):
        part = part.strip().strip("()").strip()
        if ":" in part:  # annotated assignment
            part = part.split(":")[0].strip()
        if _IDENT_RE.fullmatch(part):
            out.add(part)
    return out


def referenced_names(source: str) -> set[str]:
    """Identifiers used as value roots: call targets, attribute-chain roots.

    Attribute members (anything right of a dot) and import-statement tokens
    are excluded; definition names and store targets may still appear when
    they are also read, which is the desired behavior for ``x = x``.
    """
    masked = masked_source(source)
    names: set[str] = set()
    import_lines = {
        i
        for i, line in enumerate(masked.split("\n"))
        if _IMPORT_LINE_RE.match(line)
    }
    for lineno, line in enumerate(masked.split("\n")):
        if lineno in import_lines:
            continue
        for m in _IDENT_RE.finditer(line):
            name = m.group(0)
            if keyword.iskeyword(name):
                continue
            prev = line[m.start() - 1] if m.start() else ""
            if prev.isalnum() or prev == "_":
                continue  # tail of a number literal such as 1.5e3
            before = line[: m.start()].rstrip()
            if before.endswith("."):
                continue
            if re.search(r"\b(?:def|class)\s*$", before):
                continue
            names.add(name)
    return names


def syntactic_check(source: str) -> CheckResult:
    """Interpreter-free plausibility check, strictly weaker than a compile.

    Accepts iff delimiters balance, no string is left open, no top-level unit
    is incomplete, and every dedent lands on an open indentation level. By
    construction it never rejects code the real compiler accepts (verified
    over the fixture corpus), but it will accept some code the compiler
    rejects — callers treat "ok" as "worth trying", not "valid".
    """
    if source.strip() == "":
        return CheckResult(ok=True, reason="ok")
    bal = delimiter_balance(source)
    if bal.final_depth != 0 or bal.first_excess_close is not None:
        return CheckResult(ok=False, reason="unbalanced")
    if bal.unterminated_string:
        return CheckResult(ok=False, reason="unterminated_string")
    if any(not u.complete for u in segment_top_level(source)):
        return CheckResult(ok=False, reason="incomplete_unit")
    if not indentation_consistent(source):
        return CheckResult(ok=False, reason="inconsistent_indent")
    return CheckResult(ok=True, reason="ok")
