"""Regex compilation to total DFAs, plus the length-set analysis used by
the over- and under-approximation passes.

Intersection is done by product, complement by flipping the accepting set
of a total automaton, and concatenation/star through an epsilon-free NFA
followed by subset construction.  Automata are minimized after every
composite step to keep nested complements from blowing up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .terms import (RE, RCat, RComp, REmpty, REps, RInter, RLit, RStar,
                    RUnion, RWord, regex_chars)


class LiteralOutsideAlphabetError(Exception):
    pass


@dataclass(frozen=True)
class Dfa:
    """A complete DFA: the transition table is total over the alphabet."""

    alphabet: tuple            # sorted characters
    transitions: tuple         # transitions[state][symbol index] -> state
    start: int
    accepting: frozenset

    def step(self, state: int, char: str) -> int:
        return self.transitions[state][self.alphabet.index(char)]

    @property
    def n_states(self) -> int:
        return len(self.transitions)


def accepts(d: Dfa, w: str) -> bool:
    state = d.start
    idx = {c: i for i, c in enumerate(d.alphabet)}
    for ch in w:
        if ch not in idx:
            return False
        state = d.transitions[state][idx[ch]]
    return state in d.accepting


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _dfa_empty(alphabet: tuple) -> Dfa:
    return Dfa(alphabet, ((0,) * len(alphabet),), 0, frozenset())


def _dfa_word(alphabet: tuple, chars: str) -> Dfa:
    # chain of len(chars)+1 states plus a sink
    k = len(chars)
    sink = k + 1
    rows = []
    for i in range(k + 2):
        row = []
        for c in alphabet:
            if i < k and c == chars[i]:
                row.append(i + 1)
            else:
                row.append(sink)
        rows.append(tuple(row))
    return Dfa(alphabet, tuple(rows), 0, frozenset((k,)))


def _minimize(d: Dfa) -> Dfa:
    # drop unreachable states, then Moore partition refinement
    reach = {d.start}
    stack = [d.start]
    while stack:
        q = stack.pop()
        for t in d.transitions[q]:
            if t not in reach:
                reach.add(t)
                stack.append(t)
    states = sorted(reach)
    remap = {q: i for i, q in enumerate(states)}
    trans = [tuple(remap[d.transitions[q][i]] for i in range(len(d.alphabet)))
             for q in states]
    acc = frozenset(remap[q] for q in d.accepting if q in reach)
    n = len(states)

    block = [1 if q in acc else 0 for q in range(n)]
    while True:
        sig = {}
        new_block = [0] * n
        for q in range(n):
            key = (block[q],) + tuple(block[t] for t in trans[q])
            if key not in sig:
                sig[key] = len(sig)
            new_block[q] = sig[key]
        if new_block == block:
            break
        block = new_block

    n_blocks = max(block) + 1 if n else 0
    rep = {}
    for q in range(n):
        rep.setdefault(block[q], q)
    # renumber blocks by first occurrence for determinism
    order = sorted(rep, key=lambda b: rep[b])
    renum = {b: i for i, b in enumerate(order)}
    out_trans = []
    for b in order:
        q = rep[b]
        out_trans.append(tuple(renum[block[t]] for t in trans[q]))
    out_acc = frozenset(renum[block[q]] for q in range(n) if q in acc)
    return Dfa(d.alphabet, tuple(out_trans), renum[block[remap[d.start]]],
               out_acc)


def product(d1: Dfa, d2: Dfa, combine: Callable[[bool, bool], bool]) -> Dfa:
    if d1.alphabet != d2.alphabet:
        raise ValueError("product over mismatched alphabets")
    na = len(d1.alphabet)
    idx = {}
    trans = []
    acc = set()

    def state_of(p: tuple) -> int:
        if p not in idx:
            idx[p] = len(idx)
            trans.append(None)
            if combine(p[0] in d1.accepting, p[1] in d2.accepting):
                acc.add(idx[p])
        return idx[p]

    start = state_of((d1.start, d2.start))
    work = [(d1.start, d2.start)]
    seen = {work[0]}
    while work:
        p = work.pop()
        row = []
        for i in range(na):
            np = (d1.transitions[p[0]][i], d2.transitions[p[1]][i])
            row.append(state_of(np))
            if np not in seen:
                seen.add(np)
                work.append(np)
        trans[idx[p]] = tuple(row)
    return _minimize(Dfa(d1.alphabet, tuple(trans), start, frozenset(acc)))


def _nfa_of_dfa(d: Dfa):
    # returns (n_states, starts, accepting, delta) with delta[q][i] a frozenset
    delta = [[frozenset((d.transitions[q][i],)) for i in range(len(d.alphabet))]
             for q in range(d.n_states)]
    return d.n_states, frozenset((d.start,)), set(d.accepting), delta


def _determinize(alphabet: tuple, starts: frozenset, accepting: set,
                 delta) -> Dfa:
    na = len(alphabet)
    idx = {starts: 0}
    order = [starts]
    trans = []
    i = 0
    while i < len(order):
        cur = order[i]
        row = []
        for a in range(na):
            nxt = frozenset().union(*(delta[q][a] for q in cur)) if cur else frozenset()
            if nxt not in idx:
                idx[nxt] = len(order)
                order.append(nxt)
            row.append(idx[nxt])
        trans.append(tuple(row))
        i += 1
    acc = frozenset(i for i, s in enumerate(order) if s & accepting)
    return _minimize(Dfa(alphabet, tuple(trans), 0, acc))


def _concat(d1: Dfa, d2: Dfa) -> Dfa:
    n1, s1, a1, delta1 = _nfa_of_dfa(d1)
    n2, s2, a2, delta2 = _nfa_of_dfa(d2)
    na = len(d1.alphabet)
    shift = n1
    delta = [[delta1[q][a] for a in range(na)] for q in range(n1)]
    delta += [[frozenset(t + shift for t in delta2[q][a]) for a in range(na)]
              for q in range(n2)]
    # epsilon-free concatenation: accepting part-1 states also make the
    # moves part 2 would make from its start
    start2_rows = [frozenset(t + shift for t in
                             frozenset().union(*(delta2[p][a] for p in s2)))
                   for a in range(na)]
    for q in a1:
        for a in range(na):
            delta[q][a] = delta[q][a] | start2_rows[a]
    accepting = {t + shift for t in a2}
    if s2 & a2:
        accepting |= a1
    return _determinize(d1.alphabet, s1, accepting, delta)


def _star(d: Dfa) -> Dfa:
    n, s, a, delta0 = _nfa_of_dfa(d)
    na = len(d.alphabet)
    start_rows = [frozenset().union(*(delta0[p][x] for p in s)) for x in range(na)]
    delta = [[delta0[q][x] | (start_rows[x] if q in a else frozenset())
              for x in range(na)] for q in range(n)]
    # fresh accepting start state for the empty word
    fresh = n
    delta.append([start_rows[x] for x in range(na)])
    accepting = set(a) | {fresh}
    return _determinize(d.alphabet, frozenset((fresh,)), accepting, delta)


def compile_regex(r: RE, alphabet: Iterable[str]) -> Dfa:
    """Compile a regex to a minimized total DFA over the given alphabet."""
    sigma = tuple(sorted(set(alphabet)))
    extra = regex_chars(r) - set(sigma)
    if extra:
        raise LiteralOutsideAlphabetError(
            f"regex uses characters outside the alphabet: {sorted(extra)}")
    return _compile(r, sigma)


_compiled_cache: dict = {}


def compiled(r: RE, alphabet: tuple) -> Dfa:
    """Memoized compile_regex for immutable regex/alphabet pairs."""
    key = (r, alphabet)
    if key not in _compiled_cache:
        _compiled_cache[key] = compile_regex(r, alphabet)
    return _compiled_cache[key]


def _compile(r: RE, sigma: tuple) -> Dfa:
    if isinstance(r, REmpty):
        return _dfa_empty(sigma)
    if isinstance(r, REps):
        return _dfa_word(sigma, "")
    if isinstance(r, RLit):
        return _dfa_word(sigma, r.char)
    if isinstance(r, RWord):
        return _dfa_word(sigma, r.chars)
    if isinstance(r, RCat):
        return _concat(_compile(r.left, sigma), _compile(r.right, sigma))
    if isinstance(r, RUnion):
        return product(_compile(r.left, sigma), _compile(r.right, sigma),
                       lambda a, b: a or b)
    if isinstance(r, RInter):
        return product(_compile(r.left, sigma), _compile(r.right, sigma),
                       lambda a, b: a and b)
    if isinstance(r, RComp):
        d = _compile(r.inner, sigma)
        return _minimize(Dfa(d.alphabet, d.transitions, d.start,
                             frozenset(range(d.n_states)) - d.accepting))
    if isinstance(r, RStar):
        return _star(_compile(r.inner, sigma))
    raise TypeError(f"not a regex: {r!r}")


def intersect_all(dfas: list) -> Dfa:
    out = dfas[0]
    for d in dfas[1:]:
        out = product(out, d, lambda a, b: a and b)
    return out


def sigma_star(alphabet: Iterable[str]) -> Dfa:
    sigma = tuple(sorted(set(alphabet)))
    return Dfa(sigma, ((0,) * len(sigma),), 0, frozenset((0,)))


def joint_product(specs: list) -> Dfa:
    """Words driving several (dfa, source, target) runs at once.

    Accepts w iff for every spec (d, p, q), running w on d from p ends in
    q.  Used to satisfy all occurrences of one string variable across the
    membership constraints consistently.  All automata must share one
    alphabet.
    """
    alphabet = specs[0][0].alphabet
    if any(d.alphabet != alphabet for d, _, _ in specs):
        raise ValueError("joint product over mismatched alphabets")
    na = len(alphabet)
    idx: dict = {}
    trans: list = []

    def state_of(t: tuple) -> int:
        if t not in idx:
            idx[t] = len(idx)
            trans.append(None)
        return idx[t]

    start = tuple(p for _, p, _ in specs)
    goal = tuple(q for _, _, q in specs)
    state_of(start)
    work = [start]
    while work:
        cur = work.pop()
        if trans[idx[cur]] is not None:
            continue
        row = []
        for a in range(na):
            nxt = tuple(d.transitions[q][a] for (d, _, _), q in zip(specs, cur))
            row.append(state_of(nxt))
            if trans[idx[nxt]] is None and nxt != cur:
                work.append(nxt)
        trans[idx[cur]] = tuple(row)
    for i, row in enumerate(trans):
        if row is None:
            trans[i] = tuple(i for _ in range(na))
    acc = frozenset((idx[goal],)) if goal in idx else frozenset()
    return _minimize(Dfa(alphabet, tuple(trans), idx[start], acc))


# ---------------------------------------------------------------------------
# Length sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemilinearLengthSet:
    """An ultimately periodic set of non-negative integers: a finite part
    plus arithmetic progressions {offset + k*period | k >= 0}."""

    finite: frozenset
    progressions: tuple  # pairs (offset, period), period > 0

    def contains(self, n: int) -> bool:
        if n in self.finite:
            return True
        return any(n >= off and (n - off) % p == 0
                   for off, p in self.progressions)

    def is_empty(self) -> bool:
        return not self.finite and not self.progressions

    def sample(self, limit: int) -> list:
        """The members below limit, ascending."""
        return [n for n in range(limit) if self.contains(n)]


def _normalize_length_set(prefix_flags: list, cycle_flags: list,
                          mu: int) -> SemilinearLengthSet:
    lam = len(cycle_flags)
    finite = {i for i, f in enumerate(prefix_flags) if f}
    progs: list = []
    if any(cycle_flags):
        # smallest period dividing lam that reproduces the cycle pattern
        p = next(p for p in range(1, lam + 1)
                 if lam % p == 0 and
                 all(cycle_flags[i] == cycle_flags[(i + p) % lam]
                     for i in range(lam)))
        # offsets are the accepting residues in the first cycle window,
        # pulled down while the finite part extends them
        for i in range(p):
            if cycle_flags[i]:
                off = mu + i
                while off - p >= 0 and off - p in finite:
                    finite.discard(off - p)
                    off -= p
                progs.append((off, p))
    progs.sort()
    # merge congruent progressions, keep the smallest offset
    merged: dict = {}
    for off, p in progs:
        key = (p, off % p)
        if key not in merged or off < merged[key]:
            merged[key] = off
    progs = sorted((off, p) for (p, _), off in merged.items())
    covered = lambda n: any(n >= off and (n - off) % p == 0 for off, p in progs)
    finite = frozenset(n for n in finite if not covered(n))
    return SemilinearLengthSet(finite, tuple(progs))


def length_set(d: Dfa) -> SemilinearLengthSet:
    """The exact set of word lengths accepted by the DFA.

    Projects the automaton to a unary one (a step reaches every state
    reachable by any symbol) and analyses the lasso of the resulting
    deterministic subset sequence.
    """
    frontier = frozenset((d.start,))
    seen = {frontier: 0}
    flags = [bool(frontier & d.accepting)]
    seq = [frontier]
    while True:
        nxt = frozenset(t for q in seq[-1] for t in d.transitions[q])
        if nxt in seen:
            mu = seen[nxt]
            lam = len(seq) - mu
            return _normalize_length_set(flags[:mu], flags[mu:mu + lam], mu)
        seen[nxt] = len(seq)
        seq.append(nxt)
        flags.append(bool(nxt & d.accepting))


def lengths_reachable(d: Dfa, limit: int) -> set:
    """Accepted lengths up to limit by plain frontier stepping (no lasso
    analysis); serves as an independent check on length_set."""
    out = set()
    frontier = {d.start}
    for n in range(limit + 1):
        if frontier & d.accepting:
            out.add(n)
        frontier = {t for q in frontier for t in d.transitions[q]}
    return out


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------

def witness_with_length(d: Dfa, allowed: Callable[[int], bool],
                        cap: int) -> Optional[str]:
    """Shortest accepted word whose length satisfies the predicate, searching
    lengths 0..cap; ties broken lexicographically over the sorted alphabet."""
    if cap < 0:
        raise ValueError("cap must be non-negative")
    layer = {d.start: ""}
    for n in range(cap + 1):
        if allowed(n):
            hits = sorted(w for q, w in layer.items() if q in d.accepting)
            if hits:
                return hits[0]
        nxt: dict = {}
        for q, w in sorted(layer.items(), key=lambda kv: kv[1]):
            for i, c in enumerate(d.alphabet):
                t = d.transitions[q][i]
                cand = w + c
                if t not in nxt or cand < nxt[t]:
                    nxt[t] = cand
        layer = nxt
        if not layer:
            return None
    return None
