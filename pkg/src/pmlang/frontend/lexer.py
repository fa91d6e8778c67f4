"""Tokenizer for `.pm` sources."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from ..diagnostics import CompileError, Span


class LexError(CompileError):
    code = "E1001"


class TokenKind(str, Enum):
    IDENT = "identifier"
    INT = "integer-literal"
    REAL = "real-literal"
    STRING = "string-literal"
    BOOL = "boolean-literal"
    OP = "operator"
    KEYWORD = "keyword"
    PUNCT = "punctuation"
    PRAGMA = "pragma"
    EOF = "end of input"


KEYWORDS = frozenset(
    {
        "module", "param", "dimensions", "from", "in", "on", "using",
        "foreach", "timeloop", "to", "step", "deqn", "if", "else",
        "neighbors", "create_topology", "create_particles", "load_particles",
        "create_neighlist", "apply_bc", "update_neighlist", "write",
        "sqrt", "laplacian", "d_dt", "inline",
        "int", "real", "bool", "string", "vector", "matrix", "particle",
        "particle_list", "field", "property", "displacement", "topology",
        "boundary", "neighlist",
    }
)

# Longest operators first so that `->` wins over `-` and `<=` over `<`.
OPERATORS = (
    "->", "&&", "||", "==", "!=", "<=", ">=", "∇²",
    "→", "<", ">", "+", "-", "*", "/", "^", "!", "=", "√", "∂", "·",
)
PUNCTUATION = "()[]{},;:"

# Unicode spellings normalized to their ASCII lexemes in Token.value.
ALIASES = {"→": "->", "√": "sqrt", "∇²": "laplacian", "·": "*"}

_REAL = re.compile(r"(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)")
_INT = re.compile(r"\d+")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: Span

    @property
    def value(self) -> str:
        """Lexeme with unicode aliases mapped to their ASCII spelling."""
        return ALIASES.get(self.lexeme, self.lexeme)

    def is_(self, kind: TokenKind, value: str | None = None) -> bool:
        return self.kind is kind and (value is None or self.value == value)

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.lexeme!r}, {self.span})"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def make(kind: TokenKind, text: str) -> Token:
        return Token(kind, text, Span(line, col, len(text), i))

    while i < n:
        c = source[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            col += j - i
            i = j
            continue

        tok = None
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _REAL.match(source, i)
            if m:
                tok = make(TokenKind.REAL, m.group())
            else:
                tok = make(TokenKind.INT, _INT.match(source, i).group())
            end = i + len(tok.lexeme)
            if end < n and (source[end].isalpha() or source[end] == "_"):
                raise LexError(f"malformed number near {source[i:end + 1]!r}", Span(line, col, end + 1 - i, i), "E1003")
        elif c.isalpha() or c == "_":
            m = _IDENT.match(source, i)
            if m is None:
                raise LexError(f"unexpected character {c!r}", Span(line, col, 1, i))
            word = m.group()
            if word in ("true", "false"):
                tok = make(TokenKind.BOOL, word)
            elif word in KEYWORDS:
                tok = make(TokenKind.KEYWORD, word)
            else:
                tok = make(TokenKind.IDENT, word)
        elif c == '"':
            j = i + 1
            while j < n and source[j] != '"' and source[j] != "\n":
                j += 1 + (source[j] == "\\")
            if j >= n or source[j] != '"':
                raise LexError("unterminated string literal", Span(line, col, j - i, i), "E1002")
            tok = make(TokenKind.STRING, source[i:j + 1])
        elif c == "@":
            m = _IDENT.match(source, i + 1)
            if m is None:
                raise LexError("unexpected character '@'", Span(line, col, 1, i))
            tok = make(TokenKind.PRAGMA, "@" + m.group())
        else:
            for op in OPERATORS:
                if source.startswith(op, i):
                    tok = make(TokenKind.OP, op)
                    break
            else:
                if c in PUNCTUATION:
                    tok = make(TokenKind.PUNCT, c)
                else:
                    raise LexError(f"unexpected character {c!r}", Span(line, col, 1, i))
        tokens.append(tok)
        i += len(tok.lexeme)
        col += len(tok.lexeme)

    tokens.append(Token(TokenKind.EOF, "", Span(line, col, 0, n)))
    return tokens
