"""A small imperative language with an execution tracer and a trace-driven
replayer that can skip events.

Grammar (statements end with ';', one statement per line):

    program := stmt*
    stmt    := IDENT "=" expr ";"
             | IDENT "=" "input" "(" STRING? ")" ";"
             | "print" "(" arg ("," arg)* ")" ";"
             | "while" "(" expr ")" "{" stmt* "}"
    arg     := STRING | expr
    expr    := integer arithmetic and comparisons with the usual precedence

Strings support \\n, \\t, \\" and \\\\ escapes.  Variables hold integers and
start out undefined; an undefined value coerces to 0 in arithmetic and
comparisons and prints as the empty string.  Reading consumes the next
stdin token and echoes the prompt (if any) to the output.

Tracing records one event per executed statement, one loop-head event per
condition evaluation, and one loop-end event per completed iteration (the
closing brace line).  Replay executes a chosen subset of recorded events
in trace order: control-flow events are no-ops because the flow is already
spelled out by the trace, and skipped reads consume no input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .core import Configuration

DEFAULT_STEP_BUDGET = 1_000_000

KIND_STATEMENT = "statement"
KIND_LOOP_HEAD = "loop-head"
KIND_LOOP_END = "loop-end"

STATUS_COMPLETED = "completed"
STATUS_RUNTIME_ERROR = "runtime-error"
STATUS_BUDGET_EXHAUSTED = "budget-exhausted"


class ToyParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class ToyRuntimeError(Exception):
    pass


class _Budget(Exception):
    pass


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[IntLit, VarRef, BinOp, Neg]


@dataclass(frozen=True)
class StrLit:
    value: str


PrintArg = Union[StrLit, IntLit, VarRef, BinOp, Neg]


@dataclass(frozen=True)
class Assign:
    line: int
    name: str
    expr: Expr


@dataclass(frozen=True)
class Read:
    line: int
    name: str
    prompt: str


@dataclass(frozen=True)
class PrintStmt:
    line: int
    args: tuple[PrintArg, ...]


@dataclass(frozen=True)
class LoopEnd:
    """The closing brace of a loop body; marks the back edge."""

    line: int


@dataclass(frozen=True)
class While:
    line: int
    cond: Expr
    body: tuple["Stmt", ...]  # ends with the LoopEnd marker


Stmt = Union[Assign, Read, PrintStmt, While, LoopEnd]


@dataclass(frozen=True)
class Program:
    statements: tuple[Stmt, ...]
    source_lines: tuple[str, ...]

    def flattened(self) -> list[Stmt]:
        out: list[Stmt] = []

        def walk(stmts: Sequence[Stmt]) -> None:
            for s in stmts:
                out.append(s)
                if isinstance(s, While):
                    walk(s.body)

        walk(self.statements)
        return out

    def line_map(self) -> dict[int, Stmt]:
        return {s.line: s for s in self.flattened()}

    def source_line(self, line: int) -> str:
        if 1 <= line <= len(self.source_lines):
            return self.source_lines[line - 1]
        return ""


# --- lexer -------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "ident" | "int" | "string" | "op" | "eof"
    value: str
    line: int
    col: int


_KEYWORDS = {"while", "input", "print"}
_TWO_CHAR_OPS = ("<=", ">=", "==", "!=")
_ONE_CHAR_OPS = "=+-*/<>(){},;"
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch == '"':
            i += 1
            col += 1
            value = []
            while i < n and text[i] != '"':
                if text[i] == "\n":
                    raise ToyParseError("unterminated string", line, start_col)
                if text[i] == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise ToyParseError("unknown escape", line, col)
                    value.append(_ESCAPES[text[i + 1]])
                    i += 2
                    col += 2
                else:
                    value.append(text[i])
                    i += 1
                    col += 1
            if i >= n:
                raise ToyParseError("unterminated string", line, start_col)
            i += 1
            col += 1
            tokens.append(_Token("string", "".join(value), line, start_col))
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if text[i:i + 2] in _TWO_CHAR_OPS:
            tokens.append(_Token("op", text[i:i + 2], line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(_Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ToyParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0
        self._used_lines: set[int] = set()

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def _expect(self, kind: str, value: Optional[str] = None) -> _Token:
        tok = self._peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            raise ToyParseError(f"expected {want!r}, found {tok.value!r}", tok.line, tok.col)
        return self._next()

    def _claim_line(self, tok: _Token) -> int:
        if tok.line in self._used_lines:
            raise ToyParseError("one statement per line", tok.line, tok.col)
        self._used_lines.add(tok.line)
        return tok.line

    def parse_program(self) -> tuple[Stmt, ...]:
        stmts: list[Stmt] = []
        while self._peek().kind != "eof":
            stmts.append(self._statement())
        return tuple(stmts)

    def _statement(self) -> Stmt:
        tok = self._peek()
        if tok.kind == "ident" and tok.value == "while":
            return self._while()
        if tok.kind == "ident" and tok.value == "print":
            return self._print()
        if tok.kind == "ident" and tok.value not in _KEYWORDS:
            return self._assign_or_read()
        raise ToyParseError(f"expected a statement, found {tok.value!r}", tok.line, tok.col)

    def _assign_or_read(self) -> Stmt:
        name_tok = self._next()
        line = self._claim_line(name_tok)
        self._expect("op", "=")
        nxt = self._peek()
        if nxt.kind == "ident" and nxt.value == "input":
            self._next()
            self._expect("op", "(")
            prompt = ""
            if self._peek().kind == "string":
                prompt = self._next().value
            self._expect("op", ")")
            self._expect("op", ";")
            return Read(line=line, name=name_tok.value, prompt=prompt)
        expr = self._expr()
        self._expect("op", ";")
        return Assign(line=line, name=name_tok.value, expr=expr)

    def _print(self) -> Stmt:
        tok = self._next()
        line = self._claim_line(tok)
        self._expect("op", "(")
        args: list[PrintArg] = [self._arg()]
        while self._peek().value == ",":
            self._next()
            args.append(self._arg())
        self._expect("op", ")")
        self._expect("op", ";")
        return PrintStmt(line=line, args=tuple(args))

    def _arg(self) -> PrintArg:
        if self._peek().kind == "string":
            return StrLit(self._next().value)
        return self._expr()

    def _while(self) -> Stmt:
        tok = self._next()
        line = self._claim_line(tok)
        self._expect("op", "(")
        cond = self._expr()
        self._expect("op", ")")
        self._expect("op", "{")
        body: list[Stmt] = []
        while not (self._peek().kind == "op" and self._peek().value == "}"):
            if self._peek().kind == "eof":
                raise ToyParseError("unterminated loop body", tok.line, tok.col)
            body.append(self._statement())
        brace = self._next()
        body.append(LoopEnd(line=self._claim_line(brace)))
        return While(line=line, cond=cond, body=tuple(body))

    # Precedence: comparison < additive < multiplicative < unary < primary.
    def _expr(self) -> Expr:
        left = self._additive()
        while self._peek().kind == "op" and self._peek().value in ("<=", "<", "==", "!=", ">", ">="):
            op = self._next().value
            left = BinOp(op, left, self._additive())
        return left

    def _additive(self) -> Expr:
        left = self._multiplicative()
        while self._peek().kind == "op" and self._peek().value in ("+", "-"):
            op = self._next().value
            left = BinOp(op, left, self._multiplicative())
        return left

    def _multiplicative(self) -> Expr:
        left = self._unary()
        while self._peek().kind == "op" and self._peek().value in ("*", "/"):
            op = self._next().value
            left = BinOp(op, left, self._unary())
        return left

    def _unary(self) -> Expr:
        if self._peek().kind == "op" and self._peek().value == "-":
            self._next()
            return Neg(self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        tok = self._peek()
        if tok.kind == "int":
            self._next()
            return IntLit(int(tok.value))
        if tok.kind == "ident" and tok.value not in _KEYWORDS:
            self._next()
            return VarRef(tok.value)
        if tok.kind == "op" and tok.value == "(":
            self._next()
            inner = self._expr()
            self._expect("op", ")")
            return inner
        raise ToyParseError(f"expected an expression, found {tok.value!r}", tok.line, tok.col)


def parse_program(text: str) -> Program:
    tokens = _lex(text)
    statements = _Parser(tokens).parse_program()
    return Program(statements=statements, source_lines=tuple(text.split("\n")))


# --- values and evaluation ---------------------------------------------------

class _UndefType:
    _instance: Optional["_UndefType"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Undef"


UNDEF = _UndefType()
Value = Union[int, _UndefType]
Store = dict[str, Value]


def _as_int(value: Value) -> int:
    return 0 if value is UNDEF else value


def _render(value: Value) -> str:
    return "" if value is UNDEF else str(value)


def _eval(expr: Expr, store: Store) -> int:
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, VarRef):
        return _as_int(store.get(expr.name, UNDEF))
    if isinstance(expr, Neg):
        return -_eval(expr.operand, store)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, store)
        right = _eval(expr.right, store)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if right == 0:
                raise ToyRuntimeError("division by zero")
            # Integer division truncating toward zero.
            return int(left / right)
        if expr.op == "<=":
            return int(left <= right)
        if expr.op == "<":
            return int(left < right)
        if expr.op == "==":
            return int(left == right)
        if expr.op == "!=":
            return int(left != right)
        if expr.op == ">":
            return int(left > right)
        if expr.op == ">=":
            return int(left >= right)
    raise ToyRuntimeError(f"cannot evaluate {expr!r}")


# --- tracing and replay ------------------------------------------------------

@dataclass(frozen=True)
class Event:
    line: int
    seq: int  # 1-based execution time
    kind: str

    @property
    def label(self) -> str:
        return f"{self.line}_{self.seq}"


Trace = list[Event]


@dataclass
class ReplayOutput:
    stdout: str
    status: str
    error: Optional[str] = None


class _Machine:
    def __init__(self, stdin_tokens: Sequence[int], budget: int):
        self.store: Store = {}
        self.out: list[str] = []
        self.tokens = list(stdin_tokens)
        self.next_token = 0
        self.budget = budget
        self.steps = 0

    def step(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise _Budget()

    def execute(self, stmt: Stmt) -> None:
        """Run the effect of one non-control statement."""
        if isinstance(stmt, Assign):
            self.store[stmt.name] = _eval(stmt.expr, self.store)
        elif isinstance(stmt, Read):
            self.out.append(stmt.prompt)
            if self.next_token >= len(self.tokens):
                raise ToyRuntimeError(f"line {stmt.line}: input underrun")
            self.store[stmt.name] = self.tokens[self.next_token]
            self.next_token += 1
        elif isinstance(stmt, PrintStmt):
            for arg in stmt.args:
                if isinstance(arg, StrLit):
                    self.out.append(arg.value)
                else:
                    self.out.append(_render_eval(arg, self.store))
        elif isinstance(stmt, LoopEnd):
            pass
        else:
            raise ToyRuntimeError(f"cannot execute {stmt!r}")

    def output(self) -> str:
        return "".join(self.out)


def _render_eval(expr: Expr, store: Store) -> str:
    # Print shows the raw variable: undefined renders empty, not 0.
    if isinstance(expr, VarRef):
        return _render(store.get(expr.name, UNDEF))
    return str(_eval(expr, store))


def trace_program(
    program: Program,
    stdin_tokens: Sequence[int],
    budget: int = DEFAULT_STEP_BUDGET,
) -> tuple[Trace, ReplayOutput]:
    """Execute the program, recording the sequence of events."""
    machine = _Machine(stdin_tokens, budget)
    events: Trace = []

    def emit(line: int, kind: str) -> None:
        machine.step()
        events.append(Event(line=line, seq=len(events) + 1, kind=kind))

    def run(stmts: Sequence[Stmt]) -> None:
        for stmt in stmts:
            if isinstance(stmt, While):
                while True:
                    emit(stmt.line, KIND_LOOP_HEAD)
                    if _eval(stmt.cond, machine.store) == 0:
                        break
                    run(stmt.body)
            elif isinstance(stmt, LoopEnd):
                emit(stmt.line, KIND_LOOP_END)
            else:
                emit(stmt.line, KIND_STATEMENT)
                machine.execute(stmt)

    try:
        run(program.statements)
        status, error = STATUS_COMPLETED, None
    except ToyRuntimeError as exc:
        status, error = STATUS_RUNTIME_ERROR, str(exc)
    except _Budget:
        status, error = STATUS_BUDGET_EXHAUSTED, f"exceeded {budget} events"
    return events, ReplayOutput(stdout=machine.output(), status=status, error=error)


def replay_events(
    program: Program,
    trace: Trace,
    config: Configuration,
    stdin_tokens: Sequence[int],
    budget: int = DEFAULT_STEP_BUDGET,
) -> ReplayOutput:
    """Execute exactly the included trace events, in trace order.

    Loop heads and loop ends are no-ops (conditions are never evaluated;
    the trace already dictates the flow).  Skipped events have no effect
    at all, and skipped reads consume no stdin tokens.
    """
    if config.universe_size != len(trace):
        raise ValueError(
            f"configuration is over {config.universe_size} deltas, "
            f"trace has {len(trace)} events"
        )
    line_map = program.line_map()
    machine = _Machine(stdin_tokens, budget)
    included = config.bits
    try:
        for event in trace:
            if not included >> (event.seq - 1) & 1:
                continue
            machine.step()
            if event.kind != KIND_STATEMENT:
                continue
            stmt = line_map.get(event.line)
            if stmt is None or isinstance(stmt, While):
                raise ToyRuntimeError(f"event at line {event.line} is not a statement")
            machine.execute(stmt)
        status, error = STATUS_COMPLETED, None
    except ToyRuntimeError as exc:
        status, error = STATUS_RUNTIME_ERROR, str(exc)
    except _Budget:
        status, error = STATUS_BUDGET_EXHAUSTED, f"exceeded {budget} events"
    return ReplayOutput(stdout=machine.output(), status=status, error=error)


# --- trace file format -------------------------------------------------------

def format_trace(trace: Trace) -> str:
    """One event per line: SEQ<TAB>LINE<TAB>KIND."""
    return "".join(f"{e.seq}\t{e.line}\t{e.kind}\n" for e in trace)


def parse_trace(text: str) -> Trace:
    events: Trace = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[2] not in (KIND_STATEMENT, KIND_LOOP_HEAD, KIND_LOOP_END):
            raise ValueError(f"line {lineno}: malformed trace line {line!r}")
        events.append(Event(seq=int(parts[0]), line=int(parts[1]), kind=parts[2]))
    for i, event in enumerate(events, start=1):
        if event.seq != i:
            raise ValueError(f"trace seq values must be dense 1..{len(events)}")
    return events


def write_trace(trace: Trace, path: Union[str, Path]) -> None:
    Path(path).write_text(format_trace(trace), encoding="utf-8")


def read_trace(path: Union[str, Path]) -> Trace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))
