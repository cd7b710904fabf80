"""Lookup table mapping undefined names to the import statements that bind them.

The database is a small, human-editable text file. Two record kinds:

    module <name>                      # "import <name>" binds <name>
    member <name> <module> <form>      # form is "plain" or "from"

A ``plain`` member is an alias binding (``import numpy as np``); a ``from``
member is a direct member import (``from math import sqrt``). Member rows for
the same name are priority-ordered by file position. ``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

PLAIN_IMPORT = "plain_import"
FROM_IMPORT = "from_import"

_FORM_TOKENS = {"plain": PLAIN_IMPORT, "from": FROM_IMPORT}


class ModuleDatabaseError(ValueError):
    """Raised when a database file is malformed."""


@dataclass(frozen=True)
class ModuleDatabase:
    modules: frozenset[str]
    members: dict[str, tuple[tuple[str, str], ...]]  # name -> ((module, form), ...)

    def __contains__(self, name: str) -> bool:
        return name in self.modules or name in self.members

    def import_statement_for(self, name: str) -> str | None:
        """The import line that would bind ``name``, or None when unknown.

        A plain module wins over a member of the same name, so a missing
        ``hashlib`` becomes ``import hashlib`` even if some module also
        exports a ``hashlib`` member.
        """
        if name in self.modules:
            return f"import {name}"
        if name in self.members:
            module, form = self.members[name][0]
            if form == PLAIN_IMPORT:
                return f"import {module} as {name}"
            return f"from {module} import {name}"
        return None


def load_module_db(path: str | Path) -> ModuleDatabase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModuleDatabaseError(f"module database not found: {path}") from None
    return parse_module_db(text, origin=str(path))


def parse_module_db(text: str, origin: str = "<string>") -> ModuleDatabase:
    modules: set[str] = set()
    members: dict[str, list[tuple[str, str]]] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "module" and len(fields) == 2:
            modules.add(fields[1])
        elif fields[0] == "member" and len(fields) == 4:
            name, module, form_token = fields[1], fields[2], fields[3]
            if form_token not in _FORM_TOKENS:
                raise ModuleDatabaseError(
                    f"{origin}:{lineno}: unknown import form {form_token!r}"
                )
            entry = (module, _FORM_TOKENS[form_token])
            if entry in members.get(name, []):
                raise ModuleDatabaseError(
                    f"{origin}:{lineno}: duplicate member entry for {name!r}"
                )
            members.setdefault(name, []).append(entry)
        else:
            raise ModuleDatabaseError(f"{origin}:{lineno}: unparseable record {raw!r}")
    for name, entries in members.items():
        for module, _form in entries:
            if module not in modules:
                raise ModuleDatabaseError(
                    f"{origin}: member {name!r} references unlisted module {module!r}"
                )
    return ModuleDatabase(
        modules=frozenset(modules),
        members={name: tuple(entries) for name, entries in members.items()},
    )


def default_module_db() -> ModuleDatabase:
    """The bundled database: stdlib modules plus common member imports."""
    text = (resources.files("fixeval") / "data" / "module_db.txt").read_text("utf-8")
    return parse_module_db(text, origin="fixeval/data/module_db.txt")
