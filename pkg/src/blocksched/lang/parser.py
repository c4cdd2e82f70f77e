"""Hand-rolled tokenizer and recursive-descent parser.

Surface syntax: semicolon-separated statements, ``if b then c1 else c2``,
``while b do c``, braces for command blocks and function bodies, function
literals written ``name(params){expr}``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .astnodes import (
    Assign,
    BinOp,
    Bool,
    Call,
    Cmd,
    Expr,
    FuncDef,
    If,
    Neg,
    Not,
    Null,
    Num,
    Seq,
    Skip,
    Var,
    While,
)

KEYWORDS = {
    "skip", "if", "then", "else", "while", "do",
    "True", "False", "null", "not", "and", "or",
}

SYMBOLS = ("==", "=", "<", "+", "-", "*", "(", ")", "{", "}", ";", ",")


class LangSyntaxError(SyntaxError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'kw' | 'sym' | 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            while i < n and source[i].isdigit():
                i += 1
            tokens.append(Token("num", source[start:i], line, col))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, line, col))
            col += i - start
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise LangSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, msg: str):
        tok = self.peek()
        raise LangSyntaxError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise LangSyntaxError(f"expected {want!r}, found {tok.text!r}",
                                  tok.line, tok.col)
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    # -- commands --

    def parse_program(self) -> Cmd:
        cmd = self.parse_cmds()
        if not self.at("eof"):
            self.fail(f"trailing input {self.peek().text!r}")
        return cmd

    def parse_cmds(self) -> Cmd:
        cmd = self.parse_cmd()
        while self.at("sym", ";"):
            self.next()
            if self.at("eof") or self.at("sym", "}"):
                break
            cmd = Seq(cmd, self.parse_cmd())
        return cmd

    def parse_cmd(self) -> Cmd:
        if self.at("kw", "skip"):
            self.next()
            return Skip()
        if self.at("sym", "{"):
            self.next()
            inner = self.parse_cmds()
            self.expect("sym", "}")
            return inner
        if self.at("kw", "if"):
            self.next()
            cond = self.parse_expr()
            self.expect("kw", "then")
            then = self.parse_cmd()
            self.expect("kw", "else")
            els = self.parse_cmd()
            return If(cond, then, els)
        if self.at("kw", "while"):
            self.next()
            cond = self.parse_expr()
            self.expect("kw", "do")
            body = self.parse_cmd()
            return While(cond, body)
        if self.at("ident") and self.peek(1).kind == "sym" and self.peek(1).text == "=":
            name = self.next().text
            self.next()
            return Assign(name, self.parse_expr())
        self.fail(f"expected a statement, found {self.peek().text!r}")

    # -- expressions (precedence climbing) --

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at("kw", "or"):
            self.next()
            e = BinOp("or", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_not()
        while self.at("kw", "and"):
            self.next()
            e = BinOp("and", e, self.parse_not())
        return e

    def parse_not(self) -> Expr:
        if self.at("kw", "not"):
            self.next()
            return Not(self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        if self.at("sym", "==") or self.at("sym", "<"):
            op = self.next().text
            return BinOp(op, e, self.parse_add())
        return e

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.next().text
            e = BinOp(op, e, self.parse_mul())
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.at("sym", "*"):
            self.next()
            e = BinOp("*", e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.at("sym", "-"):
            self.next()
            return Neg(self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_atom()
        while self.at("sym", "("):
            self.next()
            args = self.parse_args()
            self.expect("sym", ")")
            e = Call(e, tuple(args))
        return e

    def parse_args(self) -> list[Expr]:
        if self.at("sym", ")"):
            return []
        args = [self.parse_expr()]
        while self.at("sym", ","):
            self.next()
            args.append(self.parse_expr())
        return args

    def parse_atom(self) -> Expr:
        if self.at("num"):
            return Num(int(self.next().text))
        if self.at("kw", "True"):
            self.next()
            return Bool(True)
        if self.at("kw", "False"):
            self.next()
            return Bool(False)
        if self.at("kw", "null"):
            self.next()
            return Null()
        if self.at("sym", "("):
            self.next()
            e = self.parse_expr()
            self.expect("sym", ")")
            return e
        if self.at("ident"):
            name = self.next().text
            # a paren group followed by a brace body is a function literal
            if self.at("sym", "("):
                save = self.pos
                self.next()
                args = self.parse_args()
                self.expect("sym", ")")
                if self.at("sym", "{"):
                    if not all(isinstance(a, Var) for a in args):
                        self.fail("function parameters must be names")
                    self.next()
                    body = self.parse_expr()
                    self.expect("sym", "}")
                    return FuncDef(name, tuple(a.name for a in args), body)
                self.pos = save  # plain call; let postfix handle it
            return Var(name)
        self.fail(f"expected an expression, found {self.peek().text!r}")


def parse(source: str) -> Cmd:
    """Parse a program; raises LangSyntaxError with line and column."""
    return _Parser(tokenize(source)).parse_program()


def parse_expr(source: str) -> Expr:
    p = _Parser(tokenize(source))
    e = p.parse_expr()
    if not p.at("eof"):
        p.fail(f"trailing input {p.peek().text!r}")
    return e
