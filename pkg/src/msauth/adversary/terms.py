"""Symbolic protocol values: XOR-sets of atoms over a free hash constructor.

An atom is a named primitive, ``h(t1, ..., tn)`` of terms, or the first 8
bytes of a wide atom.  A term is a set of atoms combined by XOR; equal atoms
cancel, so the frozenset *is* the normal form.  Left-aligned zero padding is
invisible here: ``pad(N) ^ h(...)`` is just ``N ^ h(...)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

from ..core import DIGEST_WIDTH, ID_WIDTH, xor

TRUNC_WIDTH = ID_WIDTH


@dataclass(frozen=True)
class Name:
    label: str
    width: int

    depth = 0

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Hash:
    args: tuple["Term", ...]

    width = DIGEST_WIDTH

    @cached_property
    def depth(self) -> int:
        return 1 + max((a.depth for a in self.args), default=0)

    def __str__(self) -> str:
        return "h(" + "||".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class Trunc:
    """First ``TRUNC_WIDTH`` bytes of a wide atom."""

    inner: Union[Name, Hash]

    width = TRUNC_WIDTH

    @property
    def depth(self) -> int:
        return self.inner.depth

    def __str__(self) -> str:
        return f"trunc({self.inner})"


Atom = Union[Name, Hash, Trunc]


@dataclass(frozen=True)
class Term:
    atoms: frozenset = field(default_factory=frozenset)

    def __xor__(self, other: "Term") -> "Term":
        return Term(self.atoms ^ other.atoms)

    def __bool__(self) -> bool:
        return bool(self.atoms)

    @property
    def width(self) -> int:
        return max((a.width for a in self.atoms), default=0)

    @property
    def depth(self) -> int:
        return max((a.depth for a in self.atoms), default=0)

    def sorted_atoms(self) -> list:
        return sorted(self.atoms, key=lambda a: (a.depth, str(a)))

    def __str__(self) -> str:
        if not self.atoms:
            return "0"
        return " ^ ".join(str(a) for a in self.sorted_atoms())

    __repr__ = __str__


ZERO = Term()


def atom(a: Atom) -> Term:
    return Term(frozenset([a]))


def name(label: str, width: int = ID_WIDTH) -> Term:
    return atom(Name(label, width))


def h(*args: Term) -> Term:
    return atom(Hash(tuple(args)))


def xor_terms(*terms: Term) -> Term:
    acc = ZERO
    for t in terms:
        acc = acc ^ t
    return acc


def trunc(t: Term) -> Term:
    """Linear map: narrow atoms pass through, wide ones become Trunc atoms."""
    out = set()
    for a in t.atoms:
        b = a if a.width <= TRUNC_WIDTH else Trunc(a)
        out ^= {b}
    return Term(frozenset(out))


def subterm_atoms(t: Term) -> Iterable[Atom]:
    """Every hash/trunc atom reachable inside ``t``, outermost first."""
    for a in t.atoms:
        if isinstance(a, Hash):
            yield a
            for arg in a.args:
                yield from subterm_atoms(arg)
        elif isinstance(a, Trunc):
            yield a
            yield from subterm_atoms(atom(a.inner))


class Binding:
    """Ground values for atoms.

    ``names`` maps labels to bytes; ``fixed`` pins specific hash atoms whose
    inputs are deliberately forgotten (e.g. h(q||x) once q is discarded).
    """

    def __init__(self, names: Mapping[str, bytes], fixed: Mapping[Atom, bytes] | None = None):
        self.names = dict(names)
        self.fixed = dict(fixed or {})

    def atom_value(self, a: Atom) -> bytes:
        if a in self.fixed:
            return self.fixed[a]
        if isinstance(a, Name):
            v = self.names[a.label]
            if len(v) != a.width:
                raise ValueError(f"{a.label}: bound to {len(v)} bytes, declared {a.width}")
            return v
        if isinstance(a, Hash):
            return hashlib.sha256(b"".join(self.value(arg, arg.width) for arg in a.args)).digest()
        return self.atom_value(a.inner)[:TRUNC_WIDTH]

    def value(self, t: Term, width: int | None = None) -> bytes:
        """Concrete bytes of ``t``, truncated or zero-padded to ``width``."""
        w = t.width if width is None else width
        v = xor(*(self.atom_value(a) for a in t.atoms)) if t.atoms else b""
        return (v + bytes(max(0, w - len(v))))[:w]
