"""Rules over pattern/region atoms and their symbolic evaluation.

Atoms are indexed region-major: atom ``j*K + i`` is the pair
``pattern_i(X), region_j(X)``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidDataset

THETA_SLACK = 1e-9


@dataclass(frozen=True)
class Atom:
    kind: str  # "pattern", "region" or "head"
    index: int
    variable: int | None = None

    def __str__(self):
        if self.kind == "head":
            return f"class_{self.index}"
        return f"{self.kind}_{self.index}(X{self.variable})"


@dataclass
class Rule:
    head: int
    body: tuple  # sorted tuple of (pattern, region) pairs
    tau: float | None = None
    precision: float | None = None
    recall: float | None = None

    def __post_init__(self):
        self.body = tuple(sorted((int(p), int(r)) for p, r in self.body))

    @property
    def key(self):
        return (self.head, self.body)

    def atoms(self) -> list:
        out = []
        for var, (pattern, region) in enumerate(self.body):
            out.append(Atom("pattern", pattern, var))
            out.append(Atom("region", region, var))
        return out

    def atom_indices(self, K: int) -> list:
        return [region * K + pattern for pattern, region in self.body]

    def to_dict(self) -> dict:
        return {
            "head": self.head,
            "body": [list(pair) for pair in self.body],
            "tau": self.tau,
            "precision": self.precision,
            "recall": self.recall,
            "text": format_rule(self),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        return cls(d["head"], tuple(tuple(p) for p in d["body"]), d.get("tau"),
                   d.get("precision"), d.get("recall"))


# -- the symbolic consequence operator -----------------------------------------


def program_matrix(bodies, n: int):
    """Exact matrix encoding of a same-head program given as lists of atom indices."""
    M = np.zeros((len(bodies), n))
    for row, body in enumerate(bodies):
        body = sorted(set(body))
        if not body:
            raise InvalidArgument("rule bodies must be non-empty")
        M[row, body] = 1.0 / len(body)
    return M


def tp_step(prog, v):
    """``theta(M_P v)`` per rule and the OR of those values for the head."""
    prog = np.asarray(prog, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if prog.shape[1] != v.shape[-1]:
        raise InvalidArgument(f"program has {prog.shape[1]} atoms, interpretation {v.shape[-1]}")
    fired = (v @ prog.T) >= 1.0 - THETA_SLACK
    return fired, fired.any(axis=-1)


# -- extraction and scoring ---------------------------------------------------


def _body_from_atoms(atoms, K: int):
    return tuple((int(a) % K, int(a) // K) for a in atoms)


def extract_rules(M_P, tau: float, target: int, K: int) -> list:
    """One rule per program-tensor row, bodies = atoms weighted above ``tau``."""
    if not 0.0 < tau < 1.0:
        raise InvalidArgument("tau must lie in (0, 1)")
    M_P = np.asarray(M_P)
    seen = set()
    rules = []
    for row in M_P:
        atoms = np.flatnonzero(row > tau)
        if atoms.size == 0:
            continue
        rule = Rule(target, _body_from_atoms(atoms, K), tau=tau)
        if rule.body in seen:
            continue
        seen.add(rule.body)
        rules.append(rule)
    return rules


def rule_satisfied(rule: Rule, d, K: int) -> bool:
    """All body pairs are on in the discretized interpretation ``d``."""
    if not rule.body:
        raise InvalidArgument("cannot evaluate a rule with an empty body")
    d = np.asarray(d)
    return bool(np.all(d[..., rule.atom_indices(K)] == 1.0, axis=-1))


def rules_fire(rule: Rule, D, K: int):
    """Vectorised :func:`rule_satisfied` over rows of ``D``."""
    if not rule.body:
        raise InvalidArgument("cannot evaluate a rule with an empty body")
    D = np.asarray(D)
    return np.all(D[:, rule.atom_indices(K)] == 1.0, axis=1)


def rule_metrics(rule: Rule, D, labels, K: int):
    """Precision and recall of ``rule`` on discretized vectors ``D``.

    Precision is ``None`` when the body never fires.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise InvalidDataset("rule_metrics: empty dataset")
    positive = labels == rule.head
    n_head = int(positive.sum())
    if n_head == 0:
        raise InvalidDataset(f"no instance of class {rule.head} to compute recall")
    fires = rules_fire(rule, D, K)
    n_body = int(fires.sum())
    n_both = int((fires & positive).sum())
    precision = n_both / n_body if n_body else None
    return precision, n_both / n_head


def classify_with_rules(ruleset, d, fallback: int, K: int, class_counts=None) -> int:
    """Head class of the most precise firing rule, else ``fallback``.

    Equal precision between rules of different classes is settled in favour
    of the class that was more frequent in training.
    """
    counts = Counter(class_counts or {})
    best = None
    for rule in ruleset:
        if rule.precision is None:
            raise InvalidArgument("rules must carry a training precision")
        if not rule_satisfied(rule, d, K):
            continue
        key = (rule.precision, counts[rule.head])
        if best is None or key > best[0]:
            best = (key, rule.head)
    return fallback if best is None else best[1]


def classify_batch(ruleset, D, fallback: int, K: int, class_counts=None):
    D = np.asarray(D)
    counts = Counter(class_counts or {})
    out = np.full(len(D), fallback)
    best = np.full(len(D), -np.inf)
    best_count = np.full(len(D), -1)
    for rule in ruleset:
        if rule.precision is None:
            raise InvalidArgument("rules must carry a training precision")
        fires = rules_fire(rule, D, K)
        c = counts[rule.head]
        better = fires & ((rule.precision > best) | ((rule.precision == best) & (c > best_count)))
        out[better] = rule.head
        best[better] = rule.precision
        best_count[better] = c
    return out


# -- text form -----------------------------------------------------------------


def _fmt(x):
    return "-" if x is None else f"{x:.2f}"


def format_rule(rule: Rule) -> str:
    body = ", ".join(f"pattern_{p}(X{v}), region_{r}(X{v})" for v, (p, r) in enumerate(rule.body))
    return (f"class_{rule.head} :- {body}. "
            f"% p={_fmt(rule.precision)} r={_fmt(rule.recall)} tau={_fmt(rule.tau)}")


_RULE_RE = re.compile(r"^class_(\d+) :- (.+)\. % p=(\S+) r=(\S+) tau=(\S+)$")
_PAIR_RE = re.compile(r"pattern_(\d+)\(X(\d+)\), region_(\d+)\(X(\d+)\)")


def parse_rule(text: str) -> Rule:
    """Inverse of :func:`format_rule` (metrics come back rounded to 2 places)."""
    m = _RULE_RE.match(text.strip())
    if not m:
        raise InvalidArgument(f"not a rule: {text!r}")
    head, body_txt, p, r, tau = m.groups()
    pairs = []
    for var, pm in enumerate(_PAIR_RE.finditer(body_txt)):
        pattern, v1, region, v2 = map(int, pm.groups())
        if v1 != v2 or v1 != var:
            raise InvalidArgument(f"pair {var} does not share variable X{var}: {text!r}")
        pairs.append((pattern, region))
    if not pairs or _PAIR_RE.sub("", body_txt).strip(", ") != "":
        raise InvalidArgument(f"malformed rule body: {body_txt!r}")
    val = lambda s: None if s == "-" else float(s)
    return Rule(int(head), tuple(pairs), val(tau), val(p), val(r))
