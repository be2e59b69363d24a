"""Lexer and recursive-descent parser for projection envelopes and units."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import nodes as n
from .durations import DurationError, parse_duration, parse_time_of_day

KEYWORDS = {"while", "true", "if", "else", "var", "for", "in", "null", "new"}

PUNCT = ("(", ")", "{", "}", "[", "]", ";", ",", ".", "+", "=", ":")


class DslError(ValueError):
    """Syntax or validation failure, carrying a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # STRING NUMBER IDENT THRESHOLD OP PUNCT EOF
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    size = len(text)

    def err(msg: str):
        raise DslError(msg, line, col)

    while i < size:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < size and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            i += 1
            col += 1
            buf = []
            while True:
                if i >= size:
                    raise DslError("unterminated string", start_line, start_col)
                c = text[i]
                if c == "\n":
                    raise DslError("newline inside string", line, col)
                if c == "\\":
                    if i + 1 >= size:
                        raise DslError("dangling escape", line, col)
                    nxt = text[i + 1]
                    if nxt == "n":
                        buf.append("\n")
                    elif nxt in ('"', "\\"):
                        buf.append(nxt)
                    else:
                        raise DslError(f"bad escape \\{nxt}", line, col)
                    i += 2
                    col += 2
                    continue
                if c == '"':
                    i += 1
                    col += 1
                    break
                buf.append(c)
                i += 1
                col += 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            continue
        if text.startswith("<$", i):
            end = text.find("$>", i + 2)
            if end < 0:
                err("unterminated threshold token")
            ref = text[i + 2 : end]
            if not ref or not all(c.isalnum() or c == "_" for c in ref):
                err(f"bad threshold token <${ref}$>")
            tokens.append(Token("THRESHOLD", ref, start_line, start_col))
            col += end + 2 - i
            i = end + 2
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < size and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < size and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    # a dot not followed by a digit is punctuation, not a decimal
                    if j + 1 >= size or not text[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            tokens.append(Token("NUMBER", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < size and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        for op in (">=", "<=", "=="):
            if text.startswith(op, i):
                tokens.append(Token("OP", op, start_line, start_col))
                i += 2
                col += 2
                break
        else:
            if ch in "<>":
                tokens.append(Token("OP", ch, start_line, start_col))
                i += 1
                col += 1
            elif ch in PUNCT:
                tokens.append(Token("PUNCT", ch, start_line, start_col))
                i += 1
                col += 1
            else:
                err(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.cur
        raise DslError(msg, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def check(self, kind: str, value: Optional[str] = None) -> bool:
        tok = self.cur
        return tok.kind == kind and (value is None or tok.value == value)

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[Token]:
        if self.check(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        if not self.check(kind, value):
            want = value if value is not None else kind
            self.error(f"expected {want!r}, found {self.cur.value!r}")
        return self.advance()

    def expect_string(self, what: str) -> str:
        if not self.check("STRING"):
            self.error(f"expected string for {what}")
        return self.advance().value

    # -- entry points ---------------------------------------------------

    def parse_envelope(self) -> n.ProjectionEnvelope:
        self.expect("IDENT", "projection")
        self.expect("PUNCT", "(")
        gl_id = self.expect_string("guideline id")
        projection_id = ""
        gl_name = ""
        current_context = ""
        while self.accept("PUNCT", ","):
            key = self.expect("IDENT").value
            self.expect("PUNCT", "=")
            val = self.expect_string(key)
            if key == "id":
                projection_id = val
            elif key == "name":
                gl_name = val
            elif key == "context":
                current_context = val
            else:
                self.error(f"unknown projection header field {key!r}")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")

        self.expect("IDENT", "stop")
        self.expect("PUNCT", "(")
        stop_list = _split_ids(self.expect_string("stop list"))
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")

        self.expect("IDENT", "start")
        self.expect("PUNCT", "(")
        start_list = _split_ids(self.expect_string("start list"))
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")

        units = []
        declarative = None
        while not self.check("EOF"):
            if self.check("IDENT", "unitProjection"):
                units.append(self.parse_unit_projection())
            elif self.check("IDENT", "declarative"):
                if declarative is not None:
                    self.error("duplicate declarative block")
                declarative = self.parse_declarative()
            else:
                self.error(f"expected unitProjection or declarative, found {self.cur.value!r}")
        env = n.ProjectionEnvelope(
            gl_id=gl_id,
            projection_id=projection_id,
            stop_list=stop_list,
            start_list=start_list,
            units=tuple(units),
            gl_name=gl_name,
            current_context=current_context,
            declarative=declarative,
        )
        try:
            env.validate()
        except ValueError as exc:
            self.error(str(exc))
        return env

    def parse_single_unit(self) -> n.UnitProjection:
        unit = self.parse_unit_projection()
        self.expect("EOF")
        return unit

    # -- declarative block ----------------------------------------------

    def parse_declarative(self) -> n.DeclarativeSection:
        self.expect("IDENT", "declarative")
        self.expect("PUNCT", "{")
        qod: list[n.QodItem] = []
        events: list[n.PersonalEventBlock] = []
        while not self.accept("PUNCT", "}"):
            if self.check("IDENT", "qualityOfDataItem"):
                self.advance()
                self.expect("PUNCT", "(")
                qid = self.expect_string("quality id")
                self.expect("PUNCT", ",")
                desc = self.expect_string("description")
                if desc not in ("Low", "VeryLow"):
                    self.error(f"bad quality description {desc!r}")
                self.expect("PUNCT", ",")
                relate = _split_ids(self.expect_string("relateTo"))
                self.expect("PUNCT", ")")
                self.expect("PUNCT", ";")
                qod.append(n.QodItem(qid, desc, relate))
            elif self.check("IDENT", "personalEvent"):
                self.advance()
                self.expect("PUNCT", "(")
                concept = self.expect_string("concept id")
                self.expect("PUNCT", ",")
                name = self.expect_string("event name")
                self.expect("PUNCT", ")")
                self.expect("PUNCT", "{")
                reminders: list[n.Reminder] = []
                while not self.accept("PUNCT", "}"):
                    self.expect("IDENT", "reminder")
                    self.expect("PUNCT", "(")
                    value = self._time_literal(self.expect_string("reminder time"))
                    self.expect("PUNCT", ",")
                    lead = self._duration_literal(self.expect_string("remind lead"))
                    self.expect("PUNCT", ",")
                    target = self.expect_string("target concept")
                    self.expect("PUNCT", ")")
                    self.expect("PUNCT", ";")
                    reminders.append(n.Reminder(value, lead.minutes, target))
                events.append(n.PersonalEventBlock(concept, name, tuple(reminders)))
            else:
                self.error(f"unexpected declarative item {self.cur.value!r}")
        return n.DeclarativeSection(tuple(qod), tuple(events))

    # -- units and statements --------------------------------------------

    def parse_unit_projection(self) -> n.UnitProjection:
        self.expect("IDENT", "unitProjection")
        self.expect("PUNCT", "(")
        unit_id = self.expect_string("unit id")
        self.expect("PUNCT", ",")
        name = self.expect_string("unit name")
        self.expect("PUNCT", ")")
        body = self.parse_block()
        unit = n.UnitProjection(unit_id, name, body)
        _check_loops_wait(unit.body, self)
        return unit

    def parse_block(self) -> tuple[n.Statement, ...]:
        self.expect("PUNCT", "{")
        stmts: list[n.Statement] = []
        while not self.accept("PUNCT", "}"):
            stmts.append(self.parse_statement())
        return tuple(stmts)

    def parse_statement(self) -> n.Statement:
        tok = self.cur
        if tok.kind != "IDENT":
            self.error(f"expected statement, found {tok.value!r}")
        name = tok.value
        if name == "while":
            self.advance()
            self.expect("PUNCT", "(")
            self.expect("IDENT", "true")
            self.expect("PUNCT", ")")
            return n.WhileTrue(self.parse_block())
        if name == "if":
            return self._parse_if()
        if name == "for":
            return self._parse_for()
        if name == "var":
            return self._parse_var()
        if name == "event":
            return self._parse_event_statement()
        handler = getattr(self, f"_parse_{name}", None)
        if handler is None or name not in _SIMPLE_STATEMENTS:
            self.error(f"unknown statement {name!r}")
        return handler()

    def _parse_if(self) -> n.Statement:
        self.expect("IDENT", "if")
        self.expect("PUNCT", "(")
        self.expect("IDENT", "temporalQuery")
        self.expect("PUNCT", "(")
        cond = self._agg_condition(self.expect_string("aggregate condition"))
        self.expect("PUNCT", ",")
        target = self.expect_string("query target")
        self.expect("PUNCT", ",")
        window = self._window_literal(self.expect_string("window"))
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ")")
        then_body = self.parse_block()
        else_body: tuple[n.Statement, ...] = ()
        if self.accept("IDENT", "else"):
            else_body = self.parse_block()
        return n.IfTemporalQuery(cond, target, window, then_body, else_body)

    def _parse_for(self) -> n.Statement:
        self.expect("IDENT", "for")
        self.expect("PUNCT", "(")
        self.expect("IDENT", "var")
        loop_var = self.expect("IDENT").value
        self.expect("IDENT", "in")
        map_var = self.expect("IDENT").value
        self.expect("PUNCT", ")")
        return n.ForIn(loop_var, map_var, self.parse_block())

    def _parse_var(self) -> n.Statement:
        self.expect("IDENT", "var")
        name = self.expect("IDENT").value
        self.expect("PUNCT", "=")
        if self.check("PUNCT", "{"):
            value: n.Expr | n.MapLiteral = self._map_literal()
        else:
            value = self.parse_expr()
        self.expect("PUNCT", ";")
        return n.VarDecl(name, value)

    def _map_literal(self) -> n.MapLiteral:
        self.expect("PUNCT", "{")
        entries: list[tuple[str, n.Expr]] = []
        while not self.accept("PUNCT", "}"):
            if entries:
                self.expect("PUNCT", ",")
            key = self.expect_string("map key")
            self.expect("PUNCT", ":")
            entries.append((key, self.parse_expr()))
        return n.MapLiteral(tuple(entries))

    def _parse_event_statement(self) -> n.Statement:
        self.expect("IDENT", "event")
        if self.accept("PUNCT", "="):
            self.expect("IDENT", "createEvent")
            self.expect("PUNCT", "(")
            self.expect("PUNCT", ")")
            self.expect("PUNCT", ";")
            return n.CreateEvent()
        self.expect("PUNCT", ".")
        method = self.expect("IDENT").value
        if method == "insert":
            self.expect("PUNCT", "(")
            self.expect("PUNCT", ")")
            self.expect("PUNCT", ";")
            return n.InsertEvent()
        if method == "patientDataEntry":
            self.expect("PUNCT", "(")
            concept = self.expect_string("concept id")
            self.expect("PUNCT", ",")
            label = self.parse_expr()
            self.expect("PUNCT", ",")
            value_type = self.expect_string("value type")
            if value_type not in ("numeric", "boolean", "string"):
                self.error(f"bad value type {value_type!r}")
            self.expect("PUNCT", ",")
            validity = self._duration_literal(self.expect_string("validity"))
            self.expect("PUNCT", ")")
            self.expect("PUNCT", ";")
            return n.PatientDataEntry(concept, label, value_type, validity)
        self.error(f"unknown event method {method!r}")

    def _parse_waitPeriodic(self) -> n.Statement:
        self.expect("IDENT", "waitPeriodic")
        self.expect("PUNCT", "(")
        days = self._days_of_week(self.expect_string("days of week"))
        self.expect("PUNCT", ",")
        time_of_day = self.parse_expr()
        self.expect("PUNCT", ",")
        lead: Optional[n.Expr]
        if self.accept("IDENT", "null"):
            lead = None
        else:
            lead = self.parse_expr()
        offset = duration = None
        if self.accept("PUNCT", ","):
            offset = self._int_literal(self.expect_string("start offset days"))
            self.expect("PUNCT", ",")
            duration = self._int_literal(self.expect_string("duration days"))
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.WaitPeriodic(days, time_of_day, lead, offset, duration)

    def _parse_waitTemporalQuery(self) -> n.Statement:
        self.expect("IDENT", "waitTemporalQuery")
        self.expect("PUNCT", "(")
        cond = self._agg_condition(self.expect_string("aggregate condition"))
        self.expect("PUNCT", ",")
        target = self.expect_string("query target")
        self.expect("PUNCT", ",")
        window = self._window_literal(self.expect_string("window"))
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.WaitTemporalQuery(cond, target, window)

    def _parse_annotateTemporal(self) -> n.Statement:
        self.expect("IDENT", "annotateTemporal")
        self.expect("PUNCT", "(")
        op = self.expect_string("operator")
        if op not in ("or", "and"):
            self.error(f"bad annotate operator {op!r}")
        self.expect("PUNCT", ",")
        self.expect("IDENT", "new")
        self.expect("IDENT", "String")
        self.expect("PUNCT", "[")
        self.expect("PUNCT", "]")
        self.expect("PUNCT", "{")
        exprs: list[n.Expr] = []
        while not self.accept("PUNCT", "}"):
            if exprs:
                self.expect("PUNCT", ",")
            tok = self.cur
            exprs.append(self._embedded_expr(self.expect_string("expression"), tok))
        if not exprs:
            self.error("annotateTemporal needs at least one expression")
        self.expect("PUNCT", ",")
        name = self.expect_string("abstraction name")
        self.expect("PUNCT", ",")
        granularity = self.expect_string("key granularity")
        if granularity != "date":
            self.error(f"unsupported key granularity {granularity!r}")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.AnnotateTemporal(op, tuple(exprs), name, granularity)

    def _parse_callback(self) -> n.Statement:
        self.expect("IDENT", "callback")
        self.expect("PUNCT", "(")
        cb_id = self.expect_string("callback id")
        self.expect("PUNCT", ",")
        message = self.expect_string("message")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.Callback(cb_id, message)

    def _parse_patientNotification(self) -> n.Statement:
        self.expect("IDENT", "patientNotification")
        self.expect("PUNCT", "(")
        msg_id = self.expect_string("message id")
        self.expect("PUNCT", ",")
        text = self.expect_string("text")
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.PatientNotification(msg_id, text)

    def _parse_setProjectionGlobal(self) -> n.Statement:
        self.expect("IDENT", "setProjectionGlobal")
        self.expect("PUNCT", "(")
        name = self.expect_string("global name")
        self.expect("PUNCT", ",")
        value = self.parse_expr()
        self.expect("PUNCT", ")")
        self.expect("PUNCT", ";")
        return n.SetProjectionGlobal(name, value)

    # -- expressions ------------------------------------------------------

    def parse_expr(self) -> n.Expr:
        left = self._additive()
        if self.check("OP"):
            op = self.advance().value
            right = self._additive()
            return n.Compare(left, op, right)
        return left

    def _additive(self) -> n.Expr:
        parts = [self._primary()]
        while self.accept("PUNCT", "+"):
            parts.append(self._primary())
        if len(parts) == 1:
            return parts[0]
        return n.Concat(tuple(parts))

    def _primary(self) -> n.Expr:
        tok = self.cur
        if tok.kind == "STRING":
            return n.Str(self.advance().value)
        if tok.kind == "NUMBER":
            return n.Num(float(self.advance().value))
        if tok.kind == "THRESHOLD":
            return n.Threshold(self.advance().value)
        if tok.kind == "IDENT":
            name = self.advance().value
            if name in ("count", "sum"):
                return n.Agg(name)
            if name == "createUUID":
                self.expect("PUNCT", "(")
                self.expect("PUNCT", ")")
                return n.CreateUuid()
            if name == "event":
                self.expect("PUNCT", ".")
                self.expect("IDENT", "getNumber")
                self.expect("PUNCT", "(")
                if self.check("NUMBER"):
                    concept = self.advance().value
                else:
                    concept = self.expect_string("concept id")
                self.expect("PUNCT", ")")
                return n.GetNumber(concept)
            if name in KEYWORDS:
                self.error(f"unexpected keyword {name!r} in expression", tok)
            if self.accept("PUNCT", "["):
                key = self.parse_expr()
                self.expect("PUNCT", "]")
                return n.Index(name, key)
            return n.Var(name)
        self.error(f"expected expression, found {tok.value!r}")

    # -- literal helpers ---------------------------------------------------

    def _embedded_expr(self, text: str, tok: Token) -> n.Expr:
        try:
            sub = _Parser(text)
            expr = sub.parse_expr()
            sub.expect("EOF")
        except DslError as exc:
            raise DslError(f"bad embedded expression {text!r}: {exc}", tok.line, tok.col)
        return expr

    def _agg_condition(self, text: str) -> n.Compare:
        tok = self.tokens[self.pos - 1]
        expr = self._embedded_expr(text, tok)
        if not isinstance(expr, n.Compare) or not isinstance(expr.left, n.Agg):
            raise DslError(
                f"aggregate condition must compare count/sum, got {text!r}", tok.line, tok.col
            )
        return expr

    def _days_of_week(self, text: str) -> frozenset[int]:
        tok = self.tokens[self.pos - 1]
        try:
            days = frozenset(int(part) for part in text.split(","))
        except ValueError:
            raise DslError(f"bad days of week {text!r}", tok.line, tok.col)
        if not days or not all(1 <= d <= 7 for d in days):
            raise DslError(f"days of week out of range in {text!r}", tok.line, tok.col)
        return days

    def _int_literal(self, text: str) -> int:
        tok = self.tokens[self.pos - 1]
        try:
            return int(text)
        except ValueError:
            raise DslError(f"expected integer, got {text!r}", tok.line, tok.col)

    def _duration_literal(self, text: str):
        tok = self.tokens[self.pos - 1]
        try:
            return parse_duration(text)
        except DurationError as exc:
            raise DslError(str(exc), tok.line, tok.col)

    def _time_literal(self, text: str) -> int:
        tok = self.tokens[self.pos - 1]
        try:
            return parse_time_of_day(text)
        except DurationError as exc:
            raise DslError(str(exc), tok.line, tok.col)

    def _window_literal(self, text: str) -> int:
        tok = self.tokens[self.pos - 1]
        try:
            dur = parse_duration(text)
        except DurationError as exc:
            raise DslError(str(exc), tok.line, tok.col)
        if dur.minutes <= 0 or dur.minutes % (24 * 60) != 0:
            raise DslError(f"window must be a whole positive number of days: {text!r}",
                           tok.line, tok.col)
        return dur.days


_SIMPLE_STATEMENTS = {
    "waitPeriodic",
    "waitTemporalQuery",
    "annotateTemporal",
    "callback",
    "patientNotification",
    "setProjectionGlobal",
}


def _split_ids(text: str) -> tuple[str, ...]:
    if text == "":
        return ()
    return tuple(part.strip() for part in text.split(","))


def _check_loops_wait(body: tuple[n.Statement, ...], parser: _Parser) -> None:
    # every while(true) must reach a wait, otherwise the interpreter would spin
    for stmt in n.walk_statements(body):
        if isinstance(stmt, n.WhileTrue):
            if not any(isinstance(s, n.WAIT_STATEMENTS) for s in n.walk_statements(stmt.body)):
                parser.error("while(true) body contains no wait statement")


def parse_envelope(text: str) -> n.ProjectionEnvelope:
    return _Parser(text).parse_envelope()


def parse_unit(text: str) -> n.UnitProjection:
    return _Parser(text).parse_single_unit()
