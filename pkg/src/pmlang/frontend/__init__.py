"""Lexing, parsing and post-parse validation of `.pm` sources."""

from .context import validate_context
from .lexer import LexError, Token, TokenKind, tokenize
from .parser import ParseError, parse_dim_file, parse_expression, parse_module
from .printer import format_expr, format_module

__all__ = [
    "LexError",
    "ParseError",
    "Token",
    "TokenKind",
    "format_expr",
    "format_module",
    "parse_dim_file",
    "parse_expression",
    "parse_module",
    "tokenize",
    "validate_context",
]
