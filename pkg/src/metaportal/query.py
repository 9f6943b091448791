"""Boolean query languages over the harmonized schema.

Basic queries are bags of free-text terms; the advanced language adds
fielded terms, phrases, existence checks, date ranges, and AND/OR/NOT with
AND binding tighter than OR. Operators are uppercase only, so lowercase
``and``/``or`` pasted from a basic query stay ordinary search terms; bare
atoms juxtaposed without an operator are conjoined for the same reason.

Both matchers treat a term or phrase as a contiguous token run, so a term
containing punctuation ("rna-seq") behaves exactly like the quoted phrase
of its parts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .schema import DATE_QUERY_FIELDS, QUERY_FIELDS, is_calendar_date


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


@dataclass(frozen=True)
class Term:
    text: str
    field: str | None = None


@dataclass(frozen=True)
class Phrase:
    text: str
    field: str | None = None


@dataclass(frozen=True)
class Exists:
    field: str


@dataclass(frozen=True)
class DateRange:
    field: str
    lo: str | None = None
    hi: str | None = None


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And requires at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("Or requires at least two children")


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class MatchAll:
    pass


QueryNode = object

_WORD_STOP = set(' \t\r\n()[]":')
_OPERATORS = {"AND", "OR", "NOT"}


def parse_basic(q: str) -> QueryNode:
    """Whitespace-separated fieldless terms, AND-ed; double quotes make phrases."""
    atoms: list[QueryNode] = []
    i, n = 0, len(q)
    while i < n:
        ch = q[i]
        if ch.isspace():
            i += 1
        elif ch == '"':
            end = q.find('"', i + 1)
            if end < 0:
                raise QuerySyntaxError("unbalanced quote", i)
            if end > i + 1:
                atoms.append(Phrase(q[i + 1 : end]))
            i = end + 1
        else:
            j = i
            while j < n and not q[j].isspace() and q[j] != '"':
                j += 1
            atoms.append(Term(q[i:j]))
            i = j
    if not atoms:
        return MatchAll()
    if len(atoms) == 1:
        return atoms[0]
    return And(tuple(atoms))


@dataclass(frozen=True)
class _Token:
    kind: str  # word | quoted | ( | ) | [ | ] | :
    text: str
    pos: int


def _lex(expr: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(expr)
    while i < n:
        ch = expr[i]
        if ch.isspace():
            i += 1
        elif ch in "()[]:":
            tokens.append(_Token(ch, ch, i))
            i += 1
        elif ch == '"':
            end = expr.find('"', i + 1)
            if end < 0:
                raise QuerySyntaxError("unbalanced quote", i)
            tokens.append(_Token("quoted", expr[i + 1 : end], i))
            i = end + 1
        else:
            j = i
            while j < n and expr[j] not in _WORD_STOP:
                j += 1
            tokens.append(_Token("word", expr[i:j], i))
            i = j
    return tokens


class _Parser:
    def __init__(self, expr: str):
        self.expr = expr
        self.tokens = _lex(expr)
        self.i = 0

    def peek(self, ahead: int = 0) -> _Token | None:
        idx = self.i + ahead
        return self.tokens[idx] if idx < len(self.tokens) else None

    def next(self) -> _Token | None:
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None):
        pos = tok.pos if tok is not None else len(self.expr)
        raise QuerySyntaxError(message, pos)

    def parse(self) -> QueryNode:
        if not self.tokens:
            return MatchAll()
        node = self.parse_or()
        if self.peek() is not None:
            self.fail("unexpected input after expression", self.peek())
        return node

    def parse_or(self) -> QueryNode:
        children = [self.parse_and()]
        while (tok := self.peek()) and tok.kind == "word" and tok.text == "OR":
            self.next()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def _starts_atom(self, tok: _Token | None) -> bool:
        if tok is None:
            return False
        if tok.kind in ("(", "quoted"):
            return True
        return tok.kind == "word" and tok.text not in ("AND", "OR")

    def parse_and(self) -> QueryNode:
        children = [self.parse_unary()]
        while True:
            tok = self.peek()
            if tok and tok.kind == "word" and tok.text == "AND":
                self.next()
                children.append(self.parse_unary())
            elif self._starts_atom(tok):
                children.append(self.parse_unary())
            else:
                break
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_unary(self) -> QueryNode:
        tok = self.peek()
        if tok and tok.kind == "word" and tok.text == "NOT":
            self.next()
            return Not(self.parse_unary())
        return self.parse_atom()

    def _check_field(self, name: str, tok: _Token) -> str:
        if name not in QUERY_FIELDS:
            self.fail(f"unknown field: {name}", tok)
        return name

    def _parse_range(self, field: str, field_tok: _Token) -> DateRange:
        if field not in DATE_QUERY_FIELDS:
            self.fail(f"range query on non-date field: {field}", field_tok)
        open_tok = self.next()  # consumes '['
        lo_tok = self.next()
        to_tok = self.next()
        hi_tok = self.next()
        close_tok = self.next()
        parts = (lo_tok, to_tok, hi_tok, close_tok)
        if any(p is None for p in parts) or close_tok.kind != "]":
            self.fail("malformed date range", open_tok)
        if to_tok.kind != "word" or to_tok.text != "TO":
            self.fail("malformed date range: expected TO", to_tok)
        bounds = []
        for bound_tok in (lo_tok, hi_tok):
            if bound_tok.kind != "word":
                self.fail("malformed date range", bound_tok)
            if bound_tok.text == "*":
                bounds.append(None)
            elif is_calendar_date(bound_tok.text):
                bounds.append(bound_tok.text)
            else:
                self.fail(f"malformed date range: bad date {bound_tok.text!r}", bound_tok)
        return DateRange(field, bounds[0], bounds[1])

    def parse_atom(self) -> QueryNode:
        tok = self.next()
        if tok is None:
            self.fail("expected expression")
        if tok.kind == "(":
            node = self.parse_or()
            closing = self.next()
            if closing is None or closing.kind != ")":
                self.fail("unclosed parenthesis", tok)
            return node
        if tok.kind == "quoted":
            if not tok.text:
                self.fail("empty phrase", tok)
            return Phrase(tok.text)
        if tok.kind != "word":
            self.fail(f"unexpected {tok.text!r}", tok)
        if tok.text in _OPERATORS:
            self.fail(f"unexpected operator {tok.text}", tok)
        colon = self.peek()
        if colon and colon.kind == ":":
            self.next()
            if tok.text == "_exists_":
                field_tok = self.next()
                if field_tok is None or field_tok.kind != "word":
                    self.fail("expected field after _exists_:", tok)
                return Exists(self._check_field(field_tok.text, field_tok))
            field = self._check_field(tok.text, tok)
            value = self.peek()
            if value is None:
                self.fail("expected value after field", tok)
            if value.kind == "[":
                return self._parse_range(field, tok)
            self.next()
            if value.kind == "quoted":
                if not value.text:
                    self.fail("empty phrase", value)
                return Phrase(value.text, field)
            if value.kind != "word" or value.text in _OPERATORS:
                self.fail("expected value after field", value)
            return Term(value.text, field)
        if tok.text == "*":
            return MatchAll()
        return Term(tok.text)


def parse_advanced(expr: str) -> QueryNode:
    """Parse the fielded boolean language; errors carry a character position."""
    return _Parser(expr).parse()


def _printable_word(text: str) -> bool:
    return bool(text) and text not in _OPERATORS and text != "*" and not any(c in _WORD_STOP for c in text)


def to_canonical(node: QueryNode) -> str:
    """Fully parenthesized canonical text; parse_advanced inverts it exactly."""
    if isinstance(node, MatchAll):
        return "*"
    if isinstance(node, Term):
        if not _printable_word(node.text):
            raise ValueError(f"term text not printable as a bare token: {node.text!r}")
        return f"{node.field}:{node.text}" if node.field else node.text
    if isinstance(node, Phrase):
        if '"' in node.text or not node.text:
            raise ValueError(f"phrase text not printable: {node.text!r}")
        quoted = f'"{node.text}"'
        return f"{node.field}:{quoted}" if node.field else quoted
    if isinstance(node, Exists):
        return f"_exists_:{node.field}"
    if isinstance(node, DateRange):
        return f"{node.field}:[{node.lo or '*'} TO {node.hi or '*'}]"
    if isinstance(node, Not):
        return f"(NOT {to_canonical(node.child)})"
    if isinstance(node, And):
        return "(" + " AND ".join(to_canonical(c) for c in node.children) + ")"
    if isinstance(node, Or):
        return "(" + " OR ".join(to_canonical(c) for c in node.children) + ")"
    raise TypeError(f"not a query node: {node!r}")


def canonical_echo(q: str | None, advanced: str | None) -> tuple[QueryNode, str]:
    """Parse whichever query arrived and return (ast, canonical echo).

    Basic terms whose text cannot print as a bare token are echoed as the
    equivalent phrase (terms and phrases share the contiguous-run matcher).
    """
    if advanced is not None:
        ast = parse_advanced(advanced)
        return ast, to_canonical(ast)
    ast = parse_basic(q or "")

    def echo(node: QueryNode) -> str:
        if isinstance(node, Term) and not _printable_word(node.text):
            return to_canonical(Phrase(node.text.replace('"', " ") or "?"))
        if isinstance(node, And):
            return "(" + " AND ".join(echo(c) for c in node.children) + ")"
        return to_canonical(node)

    return ast, echo(ast)
