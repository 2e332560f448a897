"""S-expression reader for program text.

Turns source text into a tree of Atom and SList nodes, each carrying the
1-based line/column where it starts. Knows nothing about modules or opcodes.
"""

from dataclasses import dataclass
from typing import Union

from codeflow.errors import CftSyntaxError

# Atom kinds
KEYWORD = "keyword"   # opcodes, keywords, numbers, offset=N
ID = "id"             # $name
STRING = "string"

_DELIMS = frozenset("() \t\r\n;\"")

# Deepest list nesting accepted. The parser recurses once per folded level,
# so this also bounds its depth.
MAX_NESTING = 200


@dataclass(frozen=True)
class Atom:
    kind: str
    value: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: tuple["Node", ...]
    line: int
    col: int

    @property
    def head(self) -> str:
        """Keyword at the head of the list, or "" when it has none."""
        if self.items and isinstance(self.items[0], Atom) and self.items[0].kind == KEYWORD:
            return self.items[0].value
        return ""


Node = Union[Atom, SList]


def decode_source(source: Union[str, bytes]) -> str:
    """Decode bytes as UTF-8, reporting the position of the first bad byte."""
    if isinstance(source, str):
        return source
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as e:
        good = source[:e.start].decode("utf-8")
        line = good.count("\n") + 1
        col = len(good) - (good.rfind("\n") + 1) + 1
        raise CftSyntaxError(line, col, "invalid UTF-8 byte") from None


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.depth = 0

    def error(self, message: str, line: int = 0, col: int = 0) -> CftSyntaxError:
        return CftSyntaxError(line or self.line, col or self.col, message)

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def skip_space(self):
        while self.pos < len(self.text):
            ch = self._peek()
            if ch in " \t\r\n":
                self._advance()
            elif ch == ";" and self._peek(1) == ";":
                while self.pos < len(self.text) and self._peek() != "\n":
                    self._advance()
            elif ch == "(" and self._peek(1) == ";":
                self._skip_block_comment()
            else:
                return

    def _skip_block_comment(self):
        line, col = self.line, self.col
        depth = 0
        while self.pos < len(self.text):
            if self._peek() == "(" and self._peek(1) == ";":
                depth += 1
                self._advance(2)
            elif self._peek() == ";" and self._peek(1) == ")":
                depth -= 1
                self._advance(2)
                if depth == 0:
                    return
            else:
                self._advance()
        raise self.error("unterminated block comment", line, col)

    def read_all(self) -> list[Node]:
        nodes = []
        self.skip_space()
        while self.pos < len(self.text):
            nodes.append(self.read_node())
            self.skip_space()
        return nodes

    def read_node(self) -> Node:
        ch = self._peek()
        if ch == "(":
            return self._read_list()
        if ch == ")":
            raise self.error("unexpected ')'")
        if ch == '"':
            return self._read_string()
        return self._read_atom()

    def _read_list(self) -> SList:
        line, col = self.line, self.col
        if self.depth >= MAX_NESTING:
            raise self.error(f"nesting too deep (more than {MAX_NESTING} levels)")
        self.depth += 1
        self._advance()
        items = []
        while True:
            self.skip_space()
            if self.pos >= len(self.text):
                raise self.error("unclosed '('", line, col)
            if self._peek() == ")":
                self._advance()
                self.depth -= 1
                return SList(tuple(items), line, col)
            items.append(self.read_node())

    def _read_string(self) -> Atom:
        line, col = self.line, self.col
        self._advance()
        out = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string", line, col)
            ch = self._peek()
            if ch == '"':
                self._advance()
                return Atom(STRING, "".join(out), line, col)
            if ch == "\n":
                raise self.error("newline in string")
            if ch == "\\":
                out.append(self._read_escape())
                continue
            out.append(ch)
            self._advance()

    def _read_escape(self) -> str:
        line, col = self.line, self.col
        nxt = self._peek(1)
        simple = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'"}
        if nxt in simple:
            self._advance(2)
            return simple[nxt]
        pair = self._peek(1) + self._peek(2)
        if len(pair) == 2 and all(c in "0123456789abcdefABCDEF" for c in pair):
            self._advance(3)
            return chr(int(pair, 16))
        raise self.error("bad string escape", line, col)

    def _read_atom(self) -> Atom:
        line, col = self.line, self.col
        start = self.pos
        while self.pos < len(self.text) and self._peek() not in _DELIMS:
            self._advance()
        value = self.text[start:self.pos]
        if not value:
            raise self.error(f"unexpected character {self._peek()!r}")
        if value.startswith("$"):
            if len(value) == 1:
                raise self.error("empty identifier", line, col)
            return Atom(ID, value[1:], line, col)
        return Atom(KEYWORD, value, line, col)


def read(source: Union[str, bytes]) -> list[Node]:
    """Read all top-level S-expressions from source."""
    return _Reader(decode_source(source)).read_all()
