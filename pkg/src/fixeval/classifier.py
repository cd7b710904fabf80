"""Failure taxonomy: error types, cause attribution, and fixability.

A failed execution is first mapped onto one of fourteen error types (the
exception classes worth distinguishing, everything else is Other), then —
where rules permit — attributed to a cause that explains *why* models produce
that failure. Each attribution carries a confidence tag: ``exact`` rules are
deterministic facts about the source and message; ``heuristic`` rules encode
judgment calls such as near-miss name matching.

Cause attribution inspects the source text whose execution produced the
outcome, never the interpreter state: the classifier must work from recorded
outcomes alone.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass

from . import pyscan
from .moduledb import ModuleDatabase


class ErrorType(enum.Enum):
    ASSERTION = "AssertionError"
    NAME = "NameError"
    SYNTAX = "SyntaxError"
    VALUE = "ValueError"
    INDEX = "IndexError"
    TYPE = "TypeError"
    ATTRIBUTE = "AttributeError"
    TIMEOUT = "TimeoutError"
    INDENTATION = "IndentationError"
    MODULE_NOT_FOUND = "ModuleNotFoundError"
    KEY = "KeyError"
    UNBOUND_LOCAL = "UnboundLocalError"
    RECURSION = "RecursionError"
    NOT_IMPLEMENTED = "NotImplementedError"
    OTHER = "Other"


class Cause(enum.Enum):
    TEST_CASE_FAILURE = "Test Case Failure"
    EMPTY_FUNCTION = "Empty Function"
    MISREMEMBERED_NAME = "Misremembered Name"
    MISSING_CONTENT = "Missing Content"
    MISSING_IMPORT = "Missing Import"
    UNBALANCED_DELIMITERS = "Unbalanced Delimiters"
    FUNCTION_OVERFLOW = "Function Overflow"
    EMPTY_SEQUENCE = "Empty Sequence"
    INTENTIONAL_RAISE = "Intentional Raise"
    INAPPROPRIATE_ARGUMENT = "Inappropriate Argument"
    OUT_OF_BOUNDS = "Out of Bounds"
    INCOMPATIBLE_OPERATION = "Incompatible Operation"
    NONEXISTENT_ATTRIBUTE = "Non-existent Attribute"
    EXECUTION_TIMEOUT = "Execution Timeout"
    INCONSISTENT_INDENTATION = "Inconsistent Indentation"
    MISSING_MODULE = "Missing Module"
    NONEXISTENT_KEY = "Non-existent Key"
    UNASSIGNED_VARIABLE = "Unassigned Variable"
    INFINITE_RECURSION = "Infinite Recursion"
    UNKNOWN = "Unknown"


EXACT = "exact"
HEURISTIC = "heuristic"
UNKNOWN_CONFIDENCE = "unknown"


@dataclass(frozen=True)
class CauseAttribution:
    cause: Cause
    confidence: str  # exact | heuristic | unknown


@dataclass(frozen=True)
class FixabilityProfile:
    consistency: bool
    locality: bool
    low_complexity: bool

    @property
    def fixable(self) -> bool:
        return self.consistency and self.locality and self.low_complexity


# Frozen judgment grid: does the cause recur predictably (consistency), is the
# damage confined to an identifiable region (locality), and is the mechanical
# change small (low complexity)? Only causes scoring yes on all three are
# worth automating.
_FIXABILITY: dict[Cause, tuple[bool, bool, bool]] = {
    Cause.TEST_CASE_FAILURE: (False, False, False),
    Cause.EMPTY_FUNCTION: (True, True, False),
    Cause.MISREMEMBERED_NAME: (False, False, False),
    Cause.MISSING_CONTENT: (True, True, False),
    Cause.MISSING_IMPORT: (True, True, True),
    Cause.UNBALANCED_DELIMITERS: (False, True, False),
    Cause.FUNCTION_OVERFLOW: (True, True, True),
    Cause.EMPTY_SEQUENCE: (False, True, False),
    Cause.INTENTIONAL_RAISE: (False, True, False),
    Cause.INAPPROPRIATE_ARGUMENT: (False, True, False),
    Cause.OUT_OF_BOUNDS: (False, True, False),
    Cause.INCOMPATIBLE_OPERATION: (False, False, False),
    Cause.NONEXISTENT_ATTRIBUTE: (False, True, False),
    Cause.EXECUTION_TIMEOUT: (False, False, False),
    Cause.INCONSISTENT_INDENTATION: (True, True, True),
    Cause.MISSING_MODULE: (False, True, True),
    Cause.NONEXISTENT_KEY: (False, False, False),
    Cause.UNASSIGNED_VARIABLE: (False, False, False),
    Cause.INFINITE_RECURSION: (False, False, False),
}

# Causes that can only ever attach to these parent error types.
CAUSES_BY_TYPE: dict[ErrorType, tuple[Cause, ...]] = {
    ErrorType.ASSERTION: (Cause.TEST_CASE_FAILURE, Cause.EMPTY_FUNCTION),
    ErrorType.NAME: (
        Cause.MISSING_IMPORT,
        Cause.MISSING_CONTENT,
        Cause.MISREMEMBERED_NAME,
    ),
    ErrorType.SYNTAX: (Cause.UNBALANCED_DELIMITERS, Cause.FUNCTION_OVERFLOW),
    ErrorType.VALUE: (
        Cause.EMPTY_SEQUENCE,
        Cause.INTENTIONAL_RAISE,
        Cause.INAPPROPRIATE_ARGUMENT,
    ),
    ErrorType.INDEX: (Cause.OUT_OF_BOUNDS,),
    ErrorType.TYPE: (Cause.INCOMPATIBLE_OPERATION,),
    ErrorType.ATTRIBUTE: (Cause.NONEXISTENT_ATTRIBUTE,),
    ErrorType.TIMEOUT: (Cause.EXECUTION_TIMEOUT,),
    ErrorType.INDENTATION: (Cause.INCONSISTENT_INDENTATION,),
    ErrorType.MODULE_NOT_FOUND: (Cause.MISSING_MODULE,),
    ErrorType.KEY: (Cause.NONEXISTENT_KEY,),
    ErrorType.UNBOUND_LOCAL: (Cause.UNASSIGNED_VARIABLE,),
    ErrorType.RECURSION: (Cause.INFINITE_RECURSION,),
    ErrorType.NOT_IMPLEMENTED: (Cause.INTENTIONAL_RAISE,),
    ErrorType.OTHER: (),
}


@dataclass(frozen=True)
class ErrorRecord:
    task_id: str
    model_id: str
    run_index: int
    error_type: ErrorType
    cause: Cause
    confidence: str
    fixable: bool

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "model_id": self.model_id,
            "run_index": self.run_index,
            "error_type": self.error_type.value,
            "cause": self.cause.value,
            "confidence": self.confidence,
            "fixable": self.fixable,
        }


_TYPE_BY_CLASS = {member.value: member for member in ErrorType if member is not ErrorType.OTHER}


def classify_error(outcome) -> ErrorType:
    """Total classification of a non-pass outcome into the taxonomy."""
    if outcome.status == "pass":
        raise ValueError("cannot classify a passing outcome")
    if outcome.status == "timeout":
        return ErrorType.TIMEOUT
    cls = outcome.exception_class or ""
    if outcome.status == "compile_error":
        if cls in ("IndentationError", "TabError"):
            return ErrorType.INDENTATION
        if cls == "SyntaxError":
            return ErrorType.SYNTAX
        return ErrorType.OTHER
    if cls == "TabError":
        return ErrorType.INDENTATION
    return _TYPE_BY_CLASS.get(cls, ErrorType.OTHER)


_NAME_ERROR_RE = re.compile(r"name '([^']*)' is not defined")
_RAISE_VALUE_ERROR_RE = re.compile(r"\braise\s+ValueError\b")
_STRING_HEAD_RE = re.compile(r"^[rbufRBUF]{0,2}['\"]")


def extract_undefined_name(message: str | None) -> str | None:
    """The quoted identifier from an undefined-name message, if present."""
    if not message:
        return None
    if m := _NAME_ERROR_RE.search(message):
        return m.group(1)
    return None


def _levenshtein_within(a: str, b: str, limit: int) -> bool:
    if abs(len(a) - len(b)) > limit:
        return False
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if min(cur) > limit:
            return False
        prev = cur
    return prev[-1] <= limit


def _names_nearly_equal(a: str, b: str) -> bool:
    if a == b:
        return False  # identical names are use-before-def, not a misremembering
    fold = lambda s: s.replace("_", "").lower()
    if fold(a) == fold(b):
        return True
    # Edit distance is only meaningful once names are long enough that two
    # edits cannot bridge unrelated identifiers.
    if min(len(a), len(b)) < 4:
        return False
    return _levenshtein_within(a, b, 2)


def _entry_point_body_empty(source: str, entry_point: str | None) -> bool:
    """True when the function(s) that matter have no real body.

    With a known entry point, only that function is inspected; otherwise the
    check falls back to "every top-level function is empty". A body counts as
    empty when it consists solely of pass / ellipsis / docstring lines, or is
    missing entirely.
    """
    if not source.strip():
        return True
    units = pyscan.segment_top_level(source)
    defs = [u for u in units if u.kind in ("function_def", "decorated_def")]
    if entry_point is not None:
        defs = [u for u in defs if u.name == entry_point]
        if not defs:
            return False
    elif not defs:
        return False
    lines = source.split("\n")
    for unit in defs:
        span_text = "\n".join(lines[unit.line_span[0] - 1 : unit.line_span[1]])
        logical = pyscan.logical_lines(span_text)
        body = [
            log
            for log in logical[1:]
            if log.indent_width > logical[0].indent_width
        ]
        for log in body:
            stripped = log.text.strip()
            if stripped in ("pass", "..."):
                continue
            if _STRING_HEAD_RE.match(stripped):
                continue
            return False
    return True


def attribute_cause(
    outcome,
    source: str,
    db: ModuleDatabase,
    entry_point: str | None = None,
) -> CauseAttribution:
    """Attribute a cause to an already-classified failure.

    ``source`` is the text whose execution produced ``outcome``. Rules are
    per error type; anything outside the rule set returns Unknown.
    """
    error_type = classify_error(outcome)
    message = outcome.message or ""

    if error_type is ErrorType.NAME:
        name = extract_undefined_name(message)
        if name and name in db:
            return CauseAttribution(Cause.MISSING_IMPORT, EXACT)
        if not source.strip():
            return CauseAttribution(Cause.MISSING_CONTENT, EXACT)
        if name:
            defined = pyscan.defined_names(source)
            if any(_names_nearly_equal(name, d) for d in defined):
                return CauseAttribution(Cause.MISREMEMBERED_NAME, HEURISTIC)
        return CauseAttribution(Cause.UNKNOWN, UNKNOWN_CONFIDENCE)

    if error_type is ErrorType.ASSERTION:
        if _entry_point_body_empty(source, entry_point):
            return CauseAttribution(Cause.EMPTY_FUNCTION, EXACT)
        return CauseAttribution(Cause.TEST_CASE_FAILURE, EXACT)

    if error_type is ErrorType.SYNTAX:
        balance = pyscan.delimiter_balance(source)
        if balance.final_depth != 0 or balance.first_excess_close is not None:
            return CauseAttribution(Cause.UNBALANCED_DELIMITERS, EXACT)
        units = pyscan.segment_top_level(source)
        if units and not units[-1].complete:
            return CauseAttribution(Cause.FUNCTION_OVERFLOW, EXACT)
        return CauseAttribution(Cause.UNKNOWN, UNKNOWN_CONFIDENCE)

    if error_type is ErrorType.VALUE:
        if "empty" in message.lower():
            return CauseAttribution(Cause.EMPTY_SEQUENCE, HEURISTIC)
        if _RAISE_VALUE_ERROR_RE.search(pyscan.masked_source(source)):
            return CauseAttribution(Cause.INTENTIONAL_RAISE, HEURISTIC)
        return CauseAttribution(Cause.INAPPROPRIATE_ARGUMENT, HEURISTIC)

    direct = {
        ErrorType.INDENTATION: Cause.INCONSISTENT_INDENTATION,
        ErrorType.MODULE_NOT_FOUND: Cause.MISSING_MODULE,
        ErrorType.KEY: Cause.NONEXISTENT_KEY,
        ErrorType.UNBOUND_LOCAL: Cause.UNASSIGNED_VARIABLE,
        ErrorType.RECURSION: Cause.INFINITE_RECURSION,
        ErrorType.TIMEOUT: Cause.EXECUTION_TIMEOUT,
        ErrorType.ATTRIBUTE: Cause.NONEXISTENT_ATTRIBUTE,
        ErrorType.INDEX: Cause.OUT_OF_BOUNDS,
        ErrorType.TYPE: Cause.INCOMPATIBLE_OPERATION,
        ErrorType.NOT_IMPLEMENTED: Cause.INTENTIONAL_RAISE,
    }
    if error_type in direct:
        return CauseAttribution(direct[error_type], EXACT)
    return CauseAttribution(Cause.UNKNOWN, UNKNOWN_CONFIDENCE)


def fixability(cause: Cause) -> FixabilityProfile:
    """The static fixability row for a cause; Unknown has no row."""
    if cause is Cause.UNKNOWN:
        raise ValueError("Unknown cause has no fixability profile")
    consistency, locality, low_complexity = _FIXABILITY[cause]
    return FixabilityProfile(consistency, locality, low_complexity)


def error_distribution(
    records: list[ErrorRecord], group_by: str = "model"
) -> dict[str, Counter]:
    """Counts of error types per model (or per run index)."""
    if group_by not in ("model", "run"):
        raise ValueError(f"group_by must be 'model' or 'run', got {group_by!r}")
    table: dict[str, Counter] = {}
    for record in records:
        key = record.model_id if group_by == "model" else str(record.run_index)
        table.setdefault(key, Counter())[record.error_type] += 1
    return table


def build_error_record(
    task_id: str,
    model_id: str,
    run_index: int,
    outcome,
    source: str,
    db: ModuleDatabase,
    entry_point: str | None = None,
) -> ErrorRecord:
    """Classify + attribute one failure and package it for reporting."""
    error_type = classify_error(outcome)
    attribution = attribute_cause(outcome, source, db, entry_point=entry_point)
    if attribution.cause is Cause.UNKNOWN:
        fixable = False
    else:
        fixable = fixability(attribution.cause).fixable
    return ErrorRecord(
        task_id=task_id,
        model_id=model_id,
        run_index=run_index,
        error_type=error_type,
        cause=attribution.cause,
        confidence=attribution.confidence,
        fixable=fixable,
    )
