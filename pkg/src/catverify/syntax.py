"""Program AST for the Async toy language.

A program is a list of procedure declarations plus an init block. Procedures
have no parameters, no return values and no local variables; everything goes
through global variables. Synchronous calls are written ``m()``, asynchronous
ones ``!m()``. Four file primitives (open/close/read/write) exist so that
programs have observable resource behavior worth specifying.
"""

from __future__ import annotations

from dataclasses import dataclass


class AsyncSyntaxError(Exception):
    """Parse or validation failure; carries a source position when known."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


# --- expressions -------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: object  # int | str | bool

    def __str__(self):
        if isinstance(self.value, bool):
            return "true" if self.value else "false"
        if isinstance(self.value, str):
            return '"%s"' % self.value
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * == != < <= > >= && ||
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        return f"({self.lhs} {self.op} {self.rhs})"


@dataclass(frozen=True)
class Not:
    arg: "Expr"

    def __str__(self):
        return f"!{self.arg}"


Expr = Lit | Var | BinOp | Not

DEFAULT_VALUE = 0


def values_equal(a, b):
    """Type-sensitive value equality: bools never equal ints."""
    if (type(a) is bool) != (type(b) is bool):
        return False
    return type(a) is type(b) and a == b


def eval_expr(expr: Expr, bindings) -> object:
    """Total expression evaluation over a variable mapping.

    Type-mismatched operations (and unbound variables) yield the designated
    default value instead of raising, so evaluation never fails.
    """
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        v = bindings.get(expr.name)
        return DEFAULT_VALUE if v is None else v
    if isinstance(expr, Not):
        v = eval_expr(expr.arg, bindings)
        return (not v) if type(v) is bool else DEFAULT_VALUE
    if isinstance(expr, BinOp):
        a = eval_expr(expr.lhs, bindings)
        b = eval_expr(expr.rhs, bindings)
        return apply_binop(expr.op, a, b)
    raise TypeError(f"not an expression: {expr!r}")


def apply_binop(op, a, b):
    int_args = type(a) is int and type(b) is int
    bool_args = type(a) is bool and type(b) is bool
    if op == "+":
        return a + b if int_args else DEFAULT_VALUE
    if op == "-":
        return a - b if int_args else DEFAULT_VALUE
    if op == "*":
        return a * b if int_args else DEFAULT_VALUE
    if op == "==":
        return values_equal(a, b)
    if op == "!=":
        return not values_equal(a, b)
    if op in ("<", "<=", ">", ">="):
        if not int_args and not (type(a) is str and type(b) is str):
            return DEFAULT_VALUE
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "&&":
        return (a and b) if bool_args else DEFAULT_VALUE
    if op == "||":
        return (a or b) if bool_args else DEFAULT_VALUE
    raise ValueError(f"unknown operator {op!r}")


# --- statements --------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    def __str__(self):
        return "skip"


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr

    def __str__(self):
        return f"{self.var} = {self.expr}"


@dataclass(frozen=True)
class SyncCall:
    name: str

    def __str__(self):
        return f"{self.name}()"


@dataclass(frozen=True)
class AsyncCall:
    name: str

    def __str__(self):
        return f"!{self.name}()"


@dataclass(frozen=True)
class If:
    cond: Expr
    body: "Stmt"

    def __str__(self):
        return f"if ({self.cond}) {{ {self.body} }}"


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    rest: "Stmt"

    def __str__(self):
        return f"{self.first}; {self.rest}"


@dataclass(frozen=True)
class Return:
    def __str__(self):
        return "return"


@dataclass(frozen=True)
class FileOp:
    # op in {open, close, read, write}; operand is a string literal or a
    # variable holding a string (checked at runtime, not syntactically).
    op: str
    operand: Expr

    def __str__(self):
        return f"{self.op}({self.operand})"


Stmt = Skip | Assign | SyncCall | AsyncCall | If | Seq | Return | FileOp


def seq(*stmts: Stmt) -> Stmt:
    """Right-associated sequential composition of one or more statements."""
    if not stmts:
        raise ValueError("empty statement sequence")
    result = stmts[-1]
    for s in reversed(stmts[:-1]):
        result = Seq(s, result)
    return result


def seq_items(stmt: Stmt) -> list[Stmt]:
    """Flatten nested Seq nodes (either association) into a statement list."""
    out = []
    stack = [stmt]
    while stack:
        s = stack.pop()
        if isinstance(s, Seq):
            stack.append(s.rest)
            stack.append(s.first)
        else:
            out.append(s)
    return out


# --- programs ----------------------------------------------------------

@dataclass(frozen=True)
class ProcDecl:
    name: str
    body: Stmt  # includes the trailing Return

    def __str__(self):
        return f"{self.name}() {{ ... }}"


@dataclass(frozen=True)
class Program:
    procedures: tuple[ProcDecl, ...]
    init_decls: tuple[str, ...]
    init_body: Stmt  # includes the implicit trailing Return

    def proc_names(self):
        return [p.name for p in self.procedures]


INIT_NAME = "init"


class LookupError_(Exception):
    pass


def lookup(name: str, program: Program) -> Stmt:
    """Body of a declared procedure, including its trailing return.

    ``init`` is reserved and never resolvable through the lookup table.
    """
    if name == INIT_NAME:
        raise LookupError_(f"procedure name {INIT_NAME!r} is reserved")
    for p in program.procedures:
        if p.name == name:
            return p.body
    raise LookupError_(f"unknown procedure {name!r}")


def validate_program(program: Program) -> None:
    """Enforce the structural invariants of a parsed program."""
    seen = set()
    for p in program.procedures:
        if p.name == INIT_NAME:
            raise AsyncSyntaxError(
                f"procedure may not be named {INIT_NAME!r} (reserved)")
        if p.name in seen:
            raise AsyncSyntaxError(f"duplicate procedure name {p.name!r}")
        seen.add(p.name)
    for p in program.procedures:
        _check_body(p.body, p.name, seen)
    _check_body(program.init_body, INIT_NAME, seen)


def _check_body(body: Stmt, owner: str, known: set) -> None:
    items = seq_items(body)
    if not isinstance(items[-1], Return):
        raise AsyncSyntaxError(f"body of {owner!r} must end with return")
    for i, s in enumerate(items):
        last = i == len(items) - 1
        _check_stmt(s, owner, known, allow_return=last)


def _check_stmt(s: Stmt, owner, known, allow_return) -> None:
    if isinstance(s, Return):
        if not allow_return:
            raise AsyncSyntaxError(
                f"return may only appear as the final statement of {owner!r}")
        return
    if isinstance(s, (SyncCall, AsyncCall)):
        if s.name not in known:
            raise AsyncSyntaxError(
                f"call to undeclared procedure {s.name!r} in {owner!r}")
        return
    if isinstance(s, If):
        for sub in seq_items(s.body):
            _check_stmt(sub, owner, known, allow_return=False)
        return
    if isinstance(s, Seq):
        for sub in seq_items(s):
            _check_stmt(sub, owner, known, allow_return=False)
        return
    if isinstance(s, FileOp):
        if not isinstance(s.operand, (Lit, Var)):
            raise AsyncSyntaxError(
                f"file identifier must be a literal or variable in {owner!r}")
        if isinstance(s.operand, Lit) and not isinstance(s.operand.value, str):
            raise AsyncSyntaxError(
                f"file identifier literal must be a string in {owner!r}")


# --- pretty printer ----------------------------------------------------

def pretty_stmt(stmt: Stmt) -> str:
    parts = []
    for s in seq_items(stmt):
        if isinstance(s, If):
            parts.append(f"if ({pretty_expr(s.cond)}) {{ {pretty_stmt(s.body)} }}")
        else:
            parts.append(pretty_atomic(s))
    return "; ".join(parts)


def pretty_atomic(s: Stmt) -> str:
    if isinstance(s, Skip):
        return "skip"
    if isinstance(s, Assign):
        return f"{s.var} = {pretty_expr(s.expr)}"
    if isinstance(s, SyncCall):
        return f"{s.name}()"
    if isinstance(s, AsyncCall):
        return f"!{s.name}()"
    if isinstance(s, Return):
        return "return"
    if isinstance(s, FileOp):
        return f"{s.op}({pretty_expr(s.operand)})"
    raise TypeError(f"not an atomic statement: {s!r}")


_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6}


def pretty_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Lit):
        return str(e)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        return "!" + pretty_expr(e.arg, 7)
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        # left-associative: right child needs parens at equal precedence
        text = "%s %s %s" % (pretty_expr(e.lhs, prec), e.op,
                             pretty_expr(e.rhs, prec + 1))
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"not an expression: {e!r}")


def pretty_program(program: Program) -> str:
    lines = []
    for p in program.procedures:
        lines.append(f"{p.name}() {{ {pretty_stmt(p.body)} }}")
    decls = "".join(f"{d}; " for d in program.init_decls)
    # drop the implicit trailing return from the init block when printing
    items = seq_items(program.init_body)
    if items and isinstance(items[-1], Return):
        items = items[:-1]
    body = "; ".join(
        pretty_stmt(s) if isinstance(s, If) else pretty_atomic(s) for s in items)
    if items:
        lines.append(f"{{ {decls}{body} }}")
    else:
        lines.append(f"{{ {decls.rstrip()} }}" if decls else "{ }")
    return "\n".join(lines)
