"""Attacker knowledge: saturation under XOR, hashing and truncation.

Each known value is a *generator* with a recipe (how the attacker got it) and
its concrete bytes.  XOR closure is never enumerated; it is the GF(2) span of
the generators, with atoms as coordinates, kept as an int-bitset echelon
basis.  The hash rule only fires for hash atoms that occur somewhere in the
knowledge or in a goal, since a hash of anything else is a fresh atom that
cannot cancel against anything.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional

from ..errors import ResourceBudgetExceeded
from ..core import xor
from .terms import TRUNC_WIDTH, Atom, Hash, Term, Trunc, atom, subterm_atoms, trunc

DEFAULT_DEPTH = 3
DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class Fact:
    label: str
    term: Term
    value: Optional[bytes] = None


@dataclass
class Generator:
    index: int
    kind: str  # "fact" | "guess" | "hash" | "trunc"
    term: Term
    value: Optional[bytes]
    label: str = ""
    recipe: tuple[int, ...] = ()  # generator-combination bitmasks of the inputs


def _bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class KnowledgeSet:
    def __init__(
        self,
        facts: Iterable[Fact] = (),
        depth: int = DEFAULT_DEPTH,
        cap: int = DEFAULT_CAP,
        goals: Iterable[Term] = (),
    ):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = depth
        self.cap = cap
        self.atoms: list[Atom] = []
        self.atom_index: dict[Atom, int] = {}
        self.generators: list[Generator] = []
        self.relations: list[int] = []
        self._basis: dict[int, tuple[int, int]] = {}  # pivot bit -> (vector, combo)
        self._candidates: list[Atom] = []
        self._candidate_set: set[Atom] = set()
        self._fired: set[Atom] = set()
        self._truncated: set[int] = set()
        for f in facts:
            self.add_fact(f)
        for g in goals:
            self.add_candidates(g)

    # -- bookkeeping

    def _budget(self) -> None:
        if len(self.atoms) + len(self.generators) > self.cap:
            raise ResourceBudgetExceeded(f"more than {self.cap} atoms+generators")

    def _vector(self, t: Term) -> int:
        v = 0
        for a in t.atoms:
            i = self.atom_index.get(a)
            if i is None:
                i = len(self.atoms)
                self.atoms.append(a)
                self.atom_index[a] = i
                self._budget()
            v |= 1 << i
        return v

    def add_candidates(self, t: Term) -> None:
        for a in subterm_atoms(t):
            if a not in self._candidate_set:
                self._candidate_set.add(a)
                self._candidates.append(a)

    def _reduce(self, v: int) -> tuple[int, int]:
        combo = 0
        while v:
            top = v.bit_length() - 1
            row = self._basis.get(top)
            if row is None:
                break
            v ^= row[0]
            combo ^= row[1]
        return v, combo

    def _push(self, kind: str, term: Term, value: Optional[bytes], label: str = "",
              recipe: tuple[int, ...] = ()) -> Generator:
        g = Generator(len(self.generators), kind, term, value, label, recipe)
        self.generators.append(g)
        self._budget()
        self.add_candidates(term)
        residual, combo = self._reduce(self._vector(term))
        combo ^= 1 << g.index
        if residual:
            self._basis[residual.bit_length() - 1] = (residual, combo)
        else:
            self.relations.append(combo)
        return g

    def add_fact(self, f: Fact) -> Generator:
        return self._push("fact", f.term, f.value, f.label)

    def add_guess(self, label: str, term: Term, value: Optional[bytes] = None) -> Generator:
        return self._push("guess", term, value, label)

    # -- closure

    def saturate(self) -> "KnowledgeSet":
        changed = True
        while changed:
            changed = False
            for a in list(self._candidates):
                if a in self._fired or not isinstance(a, Hash) or a.depth > self.depth:
                    continue
                combos = []
                for arg in a.args:
                    residual, combo = self._reduce(self._vector(arg))
                    if residual:
                        break
                    combos.append(combo)
                else:
                    self._fired.add(a)
                    value = self._hash_value(a, combos)
                    self._push("hash", atom(a), value, str(a), tuple(combos))
                    changed = True
            for g in list(self.generators):
                if g.index in self._truncated:
                    continue
                self._truncated.add(g.index)
                if g.term.width <= TRUNC_WIDTH:
                    continue
                value = None if g.value is None else g.value[:TRUNC_WIDTH]
                self._push("trunc", trunc(g.term), value, f"trunc#{g.index}", (1 << g.index,))
                changed = True
        return self

    def _hash_value(self, a: Hash, combos: list[int]) -> Optional[bytes]:
        parts = []
        for arg, combo in zip(a.args, combos):
            v = self.combo_value(combo, arg.width)
            if v is None:
                return None
            parts.append(v)
        return hashlib.sha256(b"".join(parts)).digest()

    def combo_value(self, combo: int, width: int) -> Optional[bytes]:
        vals = []
        for i in _bits(combo):
            v = self.generators[i].value
            if v is None:
                return None
            vals.append(v)
        out = xor(*vals) if vals else b""
        return (out + bytes(max(0, width - len(out))))[:width]

    # -- queries

    def derivable(self, goal: Term) -> bool:
        self.add_candidates(goal)
        self.saturate()
        residual, _ = self._reduce(self._vector(goal))
        return residual == 0

    def __contains__(self, goal: Term) -> bool:
        return self.derivable(goal)

    def recipe(self, goal: Term) -> Optional[int]:
        """Generator combination producing ``goal``, or None if underivable."""
        if not self.derivable(goal):
            return None
        return self._reduce(self._vector(goal))[1]

    def attacker_value(self, goal: Term) -> Optional[bytes]:
        """Bytes the concrete attacker obtains by replaying the derivation."""
        combo = self.recipe(goal)
        if combo is None:
            return None
        return self.combo_value(combo, goal.width)

    @property
    def rank(self) -> int:
        return len(self._basis)

    def stats(self) -> dict:
        return {
            "depth": self.depth,
            "atoms": len(self.atoms),
            "generators": len(self.generators),
            "rank": self.rank,
            "relations": len(self.relations),
            "hash_rule_firings": len(self._fired),
        }


def saturate(ks: KnowledgeSet, depth: Optional[int] = None) -> KnowledgeSet:
    if depth is not None:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        ks.depth = depth
    return ks.saturate()


def derivable(ks: KnowledgeSet, goal: Term) -> bool:
    return ks.derivable(goal)


# -- offline guessing


def _rank(rows: Iterable[int]) -> int:
    basis: dict[int, int] = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)


def replay_terms(ks: KnowledgeSet, substitute: dict[int, Term]) -> list[Term]:
    """Re-run every generator's recipe with some generators' terms swapped."""
    out: list[Term] = []

    def combo_term(combo: int) -> Term:
        t = Term()
        for i in _bits(combo):
            t = t ^ out[i]
        return t

    for g in ks.generators:
        if g.index in substitute:
            out.append(substitute[g.index])
        elif g.kind == "hash":
            out.append(atom(Hash(tuple(combo_term(c) for c in g.recipe))))
        elif g.kind == "trunc":
            out.append(trunc(combo_term(g.recipe[0])))
        else:
            out.append(g.term)
    return out


def guess_is_verifiable(ks: KnowledgeSet, guess: Generator, wrong: Term) -> bool:
    """True iff some test the attacker can run separates a right guess from a wrong one.

    Frame 1 is the saturated knowledge where the guess is the real secret.
    Frame 2 replays the same recipes with ``wrong`` in place of the guess.
    The frames are distinguishable iff their generator matrices have
    different kernels, i.e. rank(F1) == rank(F2) == rank([F1 | F2]) fails.
    """
    ks.saturate()
    second = replay_terms(ks, {guess.index: wrong})
    index2: dict[Atom, int] = {}

    def vec2(t: Term) -> int:
        v = 0
        for a in t.atoms:
            v |= 1 << index2.setdefault(a, len(index2))
        return v

    rows1 = [ks._vector(g.term) for g in ks.generators]
    rows2 = [vec2(t) for t in second]
    shift = len(ks.atoms)
    r1, r2 = _rank(rows1), _rank(rows2)
    r12 = _rank(a | (b << shift) for a, b in zip(rows1, rows2))
    return not (r1 == r2 == r12)


def _fit(v: bytes, width: int) -> bytes:
    """Cut a zero tail down to the symbolic width; keep anything longer."""
    if len(v) > width and not any(v[width:]):
        return v[:width]
    return v


def consistent_guesses(ks: KnowledgeSet, guess: Generator, candidates: Iterable[bytes]) -> list[bytes]:
    """Concrete dictionary attack: keep the candidates under which every
    relation the attacker knows still XORs to zero."""
    ks.saturate()
    out = []
    for cand in candidates:
        values: list[Optional[bytes]] = []

        def combo_value(combo: int) -> Optional[bytes]:
            vals = [values[i] for i in _bits(combo)]
            if any(v is None for v in vals):
                return None
            return xor(*vals) if vals else b""

        for g in ks.generators:
            if g.index == guess.index:
                values.append(cand)
            elif g.kind == "hash":
                h_atom = next(iter(g.term.atoms))
                parts = [combo_value(c) for c in g.recipe]
                if any(p is None for p in parts):
                    values.append(None)
                    continue
                data = b"".join(_fit(p, arg.width) for p, arg in zip(parts, h_atom.args))
                values.append(hashlib.sha256(data).digest())
            elif g.kind == "trunc":
                src = combo_value(g.recipe[0])
                values.append(None if src is None else src[:TRUNC_WIDTH])
            else:
                values.append(g.value)
        ok = True
        for rel in ks.relations:
            v = combo_value(rel)
            if v is None or any(v):
                ok = False
                break
        if ok:
            out.append(cand)
    return out
