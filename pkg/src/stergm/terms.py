"""Parser for model term lists such as ``"edges, nodematch(decision,C)"``.

Grammar::

    term_list := "" | term ("," term)*
    term      := "edges" | "triangles"
               | "nodematch(" ident "," value ")"
               | "absdiff(" ident ("," "scale=" real)? ")"

Whitespace between tokens is ignored.  Error offsets are byte offsets into
the UTF-8 encoded input.
"""

from __future__ import annotations

import re
from typing import Sequence

from .graph import CATEGORICAL_ATTRIBUTES, NUMERIC_ATTRIBUTES, Decision
from .statistics import DEFAULT_ABSDIFF_SCALE, AbsDiff, Edges, NodeMatch, Term, TermError, Triangles

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),=])
    """,
    re.VERBOSE,
)


class TermSyntaxError(ValueError):
    def __init__(self, message: str, text: str, offset: int):
        self.offset = len(text[:offset].encode("utf-8"))
        self.text = text
        super().__init__(f"{message} at byte {self.offset} in {text!r}")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise TermSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str, value: str | None = None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = repr(value) if value is not None else kind
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise TermSyntaxError(f"expected {want}, found {got}", self.text, tok[2])
        self.i += 1
        return tok

    def term_list(self) -> list[Term]:
        if self.peek()[0] == "end":
            return []
        terms = [self.term()]
        while self.peek()[1] == ",":
            self.take("punct", ",")
            terms.append(self.term())
        self.take("end")
        return terms

    def term(self) -> Term:
        _, name, pos = self.take("ident")
        key = name.lower()
        if key == "edges":
            return Edges()
        if key == "triangles":
            return Triangles()
        if key == "nodematch":
            self.take("punct", "(")
            attr = self.attribute(CATEGORICAL_ATTRIBUTES)
            self.take("punct", ",")
            _, raw, vpos = self.take("ident")
            try:
                value = Decision.parse(raw)
            except ValueError:
                raise TermSyntaxError(f"unknown value {raw!r} for attribute {attr!r}", self.text, vpos) from None
            self.take("punct", ")")
            return NodeMatch(attr, value)
        if key == "absdiff":
            self.take("punct", "(")
            attr = self.attribute(NUMERIC_ATTRIBUTES)
            scale = DEFAULT_ABSDIFF_SCALE
            if self.peek()[1] == ",":
                self.take("punct", ",")
                _, kw, kpos = self.take("ident")
                if kw != "scale":
                    raise TermSyntaxError(f"unknown option {kw!r}; expected 'scale'", self.text, kpos)
                self.take("punct", "=")
                _, num, npos = self.take("number")
                scale = float(num)
                if not scale > 0:
                    raise TermSyntaxError("scale must be positive", self.text, npos)
            self.take("punct", ")")
            return AbsDiff(attr, scale)
        raise TermSyntaxError(f"unknown term {name!r}", self.text, pos)

    def attribute(self, allowed: Sequence[str]) -> str:
        _, name, pos = self.take("ident")
        if name not in allowed:
            raise TermSyntaxError(
                f"attribute {name!r} not allowed here; expected one of {', '.join(allowed)}", self.text, pos
            )
        return name


def parse_terms(text: str) -> list[Term]:
    try:
        return _Parser(text).term_list()
    except TermError as exc:
        raise TermSyntaxError(str(exc), text, 0) from exc


def render_terms(terms: Sequence[Term]) -> str:
    return ",".join(t.render() for t in terms)
