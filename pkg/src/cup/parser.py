"""Concrete syntax for programs, goals and terms, the pretty printer,
and proof-tree serialization.

Program files use: `const c : i -> i.` declarations, `def name = fix \\x. ...`
fixed-point definitions, explicit clauses (`forall x. G => H.`), and
Prolog-style sugar (`head :- body.` with uppercase variables implicitly
universally quantified).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from . import engine as eng
from . import formulas as fm
from . import terms as tm
from .errors import (
    CupError,
    GuardednessError,
    MalformedDocument,
    ParseError,
    SignatureMismatch,
    SourceTypeError,
)
from .formulas import (
    Atom,
    Conj,
    Disj,
    Exists,
    Forall,
    Formula,
    Impl,
    Program,
    Top,
)
from .guardedness import is_guarded_fixed_point
from .terms import App, Arrow, Base, Con, Fix, IOTA, Lam, O, Signature, Term, Var

KEYWORDS = {"const", "def", "forall", "exists", "fix", "true"}

_PUNCT = ["->", "=>", ":-", "/\\", "\\/", "(", ")", "[", "]", "|", ".", ":", ",", "=", "\\"]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'punct', 'keyword', 'eof'
    text: str
    line: int
    col: int

    @property
    def span(self):
        return (self.line, self.col)


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_'"


def tokenize(text: str, allow_fresh: bool = False) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == tm.FRESH_MARK and not allow_fresh:
            raise ParseError(f"reserved marker {tm.FRESH_MARK!r} in identifier", (line, col))
        if _is_ident_char(ch) or ch == tm.FRESH_MARK:
            j = i
            while j < n and (_is_ident_char(text[j]) or (allow_fresh and text[j] == tm.FRESH_MARK)):
                j += 1
            word = text[i:j]
            toks.append(Token("keyword" if word in KEYWORDS else "ident", word, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", (line, col))
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Raw syntax (identifiers unresolved)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RIdent:
    name: str
    span: tuple


@dataclass(frozen=True)
class RApp:
    fn: "RTerm"
    arg: "RTerm"


@dataclass(frozen=True)
class RLam:
    var: str
    body: "RTerm"


@dataclass(frozen=True)
class RFix:
    body: "RTerm"


RTerm = RIdent | RApp | RLam | RFix


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("punct", "keyword")

    def eat(self, text: str) -> Token:
        if not self.at(text):
            t = self.peek()
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.span)
        return self.next()

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected an identifier, found {t.text!r}", t.span)
        return self.next()

    # ---- types ----

    def type_(self) -> tm.SimpleType:
        left = self.type_atom()
        if self.at("->"):
            self.next()
            return Arrow(left, self.type_())
        return left

    def type_atom(self) -> tm.SimpleType:
        if self.at("("):
            self.next()
            ty = self.type_()
            self.eat(")")
            return ty
        t = self.ident()
        return Base(t.text)

    # ---- terms ----

    def term(self) -> RTerm:
        if self.at("\\"):
            tok = self.next()
            var = self.ident().text
            self.eat(".")
            return RLam(var, self.term())
        if self.at("fix"):
            self.next()
            return RFix(self.term())
        return self.term_app()

    def term_app(self) -> RTerm:
        t = self.term_atom()
        while True:
            nxt = self.peek()
            if nxt.kind == "ident" or nxt.text in ("(", "["):
                t = RApp(t, self.term_atom())
            else:
                return t

    def term_atom(self) -> RTerm:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            return RIdent(t.text, t.span)
        if self.at("("):
            self.next()
            inner = self.term()
            self.eat(")")
            return inner
        if self.at("["):
            span = self.next().span
            items = [self.term()]
            while self.at("|"):
                self.next()
                items.append(self.term())
            self.eat("]")
            if len(items) < 2:
                raise ParseError("bracket sugar needs [head|tail]", span)
            out = items[-1]
            for it in reversed(items[:-1]):
                out = RApp(RApp(RIdent("scons", span), it), out)
            return out
        raise ParseError(f"expected a term, found {t.text!r}", t.span)

    # ---- formulas ----

    def formula(self):
        if self.at("forall") or self.at("exists"):
            kw = self.next()
            names = [self.ident().text]
            while self.peek().kind == "ident":
                names.append(self.ident().text)
            self.eat(".")
            body = self.formula()
            ctor = "forall" if kw.text == "forall" else "exists"
            return ("quant", ctor, names, body)
        return self.impl()

    def impl(self):
        left = self.disj()
        if self.at("=>"):
            self.next()
            return ("impl", left, self.impl())
        return left

    def disj(self):
        left = self.conj()
        if self.at("\\/"):
            self.next()
            return ("disj", left, self.disj())
        return left

    def conj(self):
        left = self.formula_atom()
        if self.at("/\\"):
            self.next()
            return ("conj", left, self.conj())
        return left

    def formula_atom(self):
        if self.at("true"):
            self.next()
            return ("top",)
        if self.at("("):
            save = self.pos
            self.next()
            try:
                inner = self.formula()
                self.eat(")")
            except ParseError:
                self.pos = save
                return ("atom", self.term())
            # parenthesized atom formulas also land here via ('atom', ...)
            return inner
        if self.at("forall") or self.at("exists"):
            return self.formula()
        return ("atom", self.term())


# ---------------------------------------------------------------------------
# Resolution: raw identifiers -> constants, fix definitions, variables
# ---------------------------------------------------------------------------


class _Resolver:
    def __init__(self, sig: Signature, fix_defs: dict[str, Term], implicit: bool):
        self.sig = sig
        self.fix_defs = fix_defs
        self.implicit = implicit
        self.collected: list[str] = []

    def term(self, r: RTerm, bound: set[str]) -> Term:
        if isinstance(r, RIdent):
            if r.name in bound:
                return Var(r.name)
            if r.name in self.fix_defs:
                return self.fix_defs[r.name]
            if r.name in self.sig:
                return Con(r.name)
            if self.implicit and r.name[0].isupper():
                if r.name not in self.collected:
                    self.collected.append(r.name)
                return Var(r.name)
            raise SourceTypeError(f"unknown identifier {r.name!r}", r.span)
        if isinstance(r, RApp):
            return App(self.term(r.fn, bound), self.term(r.arg, bound))
        if isinstance(r, RLam):
            return Lam(r.var, self.term(r.body, bound | {r.var}))
        return Fix(self.term(r.body, bound))

    def formula(self, node, bound: set[str]) -> Formula:
        kind = node[0]
        if kind == "top":
            return fm.TOP
        if kind == "atom":
            return Atom(self.term(node[1], bound))
        if kind in ("conj", "disj", "impl"):
            ctor = {"conj": Conj, "disj": Disj, "impl": Impl}[kind]
            return ctor(self.formula(node[1], bound), self.formula(node[2], bound))
        _, ctor, names, body = node
        f = self.formula(body, bound | set(names))
        cls = Forall if ctor == "forall" else Exists
        for n in reversed(names):
            f = cls(n, IOTA, f)
        return f


def _resolve_clause(p: _Parser, sig: Signature, fix_defs: dict[str, Term]) -> Formula:
    """One clause: Prolog-style sugar when `:-` appears before the closing
    dot or the clause is a bare atom; explicit formula syntax otherwise."""
    # scan ahead for ':-' before the terminating '.'
    has_neck = False
    for t in p.toks[p.pos:]:
        if t.text == "." or t.kind == "eof":
            break
        if t.text == ":-":
            has_neck = True
            break
    res = _Resolver(sig, fix_defs, implicit=True)
    if has_neck:
        head_raw = p.term()
        p.eat(":-")
        body_raw = [p.term()]
        while p.at(","):
            p.next()
            body_raw.append(p.term())
        head = res.term(head_raw, set())
        body = [res.term(b, set()) for b in body_raw]
        f: Formula = Impl(fm.conjoin([Atom(b) for b in body]), Atom(head))
    else:
        node = p.formula()
        if node[0] == "atom":
            f = res.formula(node, set())
        else:
            strict = _Resolver(sig, fix_defs, implicit=False)
            f = strict.formula(node, set())
    for v in reversed(res.collected):
        f = Forall(v, IOTA, f)
    return f


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def parse_program(text: str) -> Program:
    try:
        return _parse_program(text)
    except RecursionError:
        raise ParseError("nesting too deep") from None


def _parse_program(text: str) -> Program:
    toks = tokenize(text)
    p = _Parser(toks)
    sig_map: dict[str, tm.SimpleType] = {}
    fix_defs: dict[str, Term] = {}
    clauses: list[Formula] = []
    while p.peek().kind != "eof":
        if p.at("const"):
            p.next()
            name_tok = p.ident()
            name = name_tok.text
            p.eat(":")
            ty = p.type_()
            p.eat(".")
            if name in sig_map or name in fix_defs:
                raise ParseError(f"{name!r} declared twice", name_tok.span)
            sig_map[name] = ty
            try:
                Signature.of(sig_map).check_first_order()
            except tm.NonFirstOrderSignature as exc:
                raise SourceTypeError(str(exc), name_tok.span) from exc
            continue
        if p.at("def"):
            p.next()
            name_tok = p.ident()
            name = name_tok.text
            p.eat("=")
            raw = p.term()
            p.eat(".")
            sig = Signature.of(sig_map)
            res = _Resolver(sig, fix_defs, implicit=False)
            t = tm.canonicalize(res.term(raw, set()))
            report = is_guarded_fixed_point(sig, t)
            if not report.verdict:
                raise GuardednessError(
                    f"definition {name!r} is not a guarded fixed point term: "
                    + "; ".join(msg for _, msg in report.violations),
                    name_tok.span,
                )
            try:
                tm.typecheck(sig, {}, t)
            except CupError as exc:
                raise SourceTypeError(str(exc), name_tok.span) from exc
            if name in sig_map or name in fix_defs:
                raise ParseError(f"{name!r} declared twice", name_tok.span)
            fix_defs[name] = t
            continue
        start = p.peek()
        sig = Signature.of(sig_map)
        f = _resolve_clause(p, sig, fix_defs)
        p.eat(".")
        try:
            fm.typecheck_formula(sig, {}, f)
        except Exception as exc:
            raise SourceTypeError(f"ill-typed clause: {exc}", start.span) from exc
        if not fm._clause_in(sig, {}, f, fm.Calculus.FOHC):
            raise SourceTypeError("clause is outside the first-order clause grammar", start.span)
        clauses.append(f)
    prog = Program(Signature.of(sig_map), tuple(clauses), tuple(fix_defs.items()))
    prog.validate()
    return prog


def _parse_with(text: str, program: Program, production: str, allow_fresh: bool = False):
    try:
        toks = tokenize(text, allow_fresh=allow_fresh)
        p = _Parser(toks)
        res = _Resolver(program.signature, dict(program.fix_definitions), implicit=False)
        if production == "term":
            out = res.term(p.term(), set())
        else:
            out = res.formula(p.formula(), set())
    except RecursionError:
        raise ParseError("nesting too deep") from None
    t = p.peek()
    if t.kind != "eof" and t.text != ".":
        raise ParseError(f"trailing input {t.text!r}", t.span)
    return out


def parse_term(text: str, program: Program, allow_fresh: bool = False) -> Term:
    t = tm.canonicalize(_parse_with(text, program, "term", allow_fresh))
    tm.typecheck(program.signature, {}, t)
    return t


def parse_goal(text: str, program: Program, allow_fresh: bool = False, sig: Optional[Signature] = None) -> Formula:
    if sig is not None:
        program = Program(sig, program.clauses, program.fix_definitions)
    f = _parse_with(text, program, "formula", allow_fresh)
    f = _canon_formula(f)
    fm.typecheck_formula(program.signature, {}, f)
    return f


def _canon_formula(f: Formula) -> Formula:
    if isinstance(f, Atom):
        return Atom(tm.canonicalize(f.term))
    if isinstance(f, Top):
        return f
    if isinstance(f, (Conj, Disj, Impl)):
        return type(f)(_canon_formula(f.left), _canon_formula(f.right))
    return type(f)(f.var, f.ty, _canon_formula(f.body))


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------


def pp_type(ty: tm.SimpleType) -> str:
    if isinstance(ty, Base):
        return ty.name
    left = pp_type(ty.arg)
    if isinstance(ty.arg, Arrow):
        left = f"({left})"
    return f"{left} -> {pp_type(ty.res)}"


def _match_fix_def(t: Term, program: Optional[Program]) -> Optional[str]:
    if program is None or not isinstance(t, Fix):
        return None
    for name, d in program.fix_definitions:
        if tm.alpha_eq(t, d):
            return name
    return None


def pp_term(t: Term, program: Optional[Program] = None) -> str:
    used = set(tm.free_vars(t))

    def clean(name: str) -> str:
        if tm.FRESH_MARK not in name:
            return name
        base = name.split(tm.FRESH_MARK, 1)[0] or "x"
        cand = base
        n = 0
        while cand in used:
            n += 1
            cand = f"{base}{n}"
        return cand

    def atom_str(u: Term, ren: dict[str, str]) -> str:
        s = go(u, ren)
        if isinstance(u, (Var, Con)) or s.startswith("["):
            return s
        name = _match_fix_def(u, program)
        if name is not None:
            return name
        return f"({s})"

    def go(u: Term, ren: dict[str, str]) -> str:
        name = _match_fix_def(u, program)
        if name is not None:
            return name
        if isinstance(u, Var):
            return ren.get(u.name, u.name)
        if isinstance(u, Con):
            return u.name
        if isinstance(u, App):
            head, args = tm.spine(u)
            if isinstance(head, Con) and head.name == "scons" and len(args) == 2:
                items = [args[0]]
                tail = args[1]
                while True:
                    h2, a2 = tm.spine(tail)
                    if isinstance(h2, Con) and h2.name == "scons" and len(a2) == 2 and _match_fix_def(tail, program) is None:
                        items.append(a2[0])
                        tail = a2[1]
                    else:
                        break
                inner = "|".join(go(x, ren) for x in items) + "|" + go(tail, ren)
                return f"[{inner}]"
            return " ".join([atom_str(head, ren)] + [atom_str(a, ren) for a in args])
        if isinstance(u, Lam):
            v = clean(u.var)
            used.add(v)
            return f"\\{v}. {go(u.body, {**ren, u.var: v})}"
        return f"fix {go(u.body, ren)}"

    return go(t, {})


_PREC = {"impl": 1, "disj": 2, "conj": 3}


def pp_formula(f: Formula, program: Optional[Program] = None) -> str:
    def go(g: Formula, prec: int) -> str:
        if isinstance(g, Top):
            return "true"
        if isinstance(g, Atom):
            return pp_term(g.term, program)
        if isinstance(g, (Forall, Exists)):
            kw = "forall" if isinstance(g, Forall) else "exists"
            names = [g.var]
            body = g.body
            while isinstance(body, type(g)):
                names.append(body.var)
                body = body.body
            s = f"{kw} {' '.join(names)}. {go(body, 0)}"
            return f"({s})" if prec > 0 else s
        op, level = {"Conj": ("/\\", 3), "Disj": ("\\/", 2), "Impl": ("=>", 1)}[type(g).__name__]
        s = f"{go(g.left, level + 1)} {op} {go(g.right, level)}"
        return f"({s})" if prec > level else s

    return go(f, 0)


# ---------------------------------------------------------------------------
# Proof documents
# ---------------------------------------------------------------------------


def _sequent_additions(
    node: eng.ProofTree, parent: Optional[eng.ProofTree], program: Optional[Program]
) -> tuple[list[str], list[str]]:
    if parent is None:
        # the root sequent carries the base signature and program; only
        # non-original entries (promoted lemmas) count as additions
        return [], [
            pp_formula(e.formula, program)
            for e in node.sequent.entries
            if e.src != eng.Src.ORIGINAL
        ]
    psig = parent.sequent.signature.as_dict()
    pprog = parent.sequent.entries
    sig_add = [
        f"{n} : {pp_type(ty)}"
        for n, ty in node.sequent.signature.constants
        if n not in psig
    ]
    prog_add = [pp_formula(e.formula, program) for e in node.sequent.entries[len(pprog):]]
    return sig_add, prog_add


def _export_node(node: eng.ProofTree, parent: Optional[eng.ProofTree], program: Optional[Program]) -> dict:
    sig_add, prog_add = _sequent_additions(node, parent, program)
    out: dict = {
        "rule": node.rule,
        "signature_additions": sig_add,
        "program_additions": prog_add,
        "goal": pp_formula(node.sequent.goal, program),
        "guarded": node.sequent.guarded,
        "children": [_export_node(c, node, program) for c in node.children],
    }
    if node.sequent.focus is not None:
        out["focus"] = pp_formula(node.sequent.focus, program)
    if node.witness is not None:
        out["witness"] = pp_term(node.witness, program)
    return out


def export_proof(tree: eng.ProofTree, program: Optional[Program] = None) -> str:
    """Serialize a proof tree to its JSON document form."""
    return json.dumps(_export_node(tree, None, program), indent=1)


def _parse_sig_addition(s: str) -> tuple[str, tm.SimpleType]:
    if ":" not in s:
        raise MalformedDocument(f"bad signature addition {s!r}")
    name, tytext = s.split(":", 1)
    name = name.strip()
    toks = tokenize(tytext.strip(), allow_fresh=True)
    p = _Parser(toks)
    ty = p.type_()
    if p.peek().kind != "eof":
        raise MalformedDocument(f"bad type in signature addition {s!r}")
    return name, ty


def _import_node(
    doc: dict,
    program: Program,
    sig: Signature,
    entries: tuple[eng.Entry, ...],
    mode: str,
    parent_rule: Optional[str],
) -> eng.ProofTree:
    required = {"rule", "signature_additions", "program_additions", "goal", "guarded", "children"}
    if not isinstance(doc, dict) or not required.issubset(doc):
        missing = required - set(doc) if isinstance(doc, dict) else required
        raise MalformedDocument(f"proof node missing fields: {sorted(missing)}")
    rule = doc["rule"]
    for s in doc["signature_additions"]:
        name, ty = _parse_sig_addition(s)
        if name in sig:
            raise SignatureMismatch(f"signature addition {name!r} already declared")
        sig = sig.extend(name, ty)
    src = eng.Src.COHYP if parent_rule == "co-fix" else (
        eng.Src.HYPOTHESIS if parent_rule is not None else eng.Src.LEMMA
    )
    shadow = Program(sig, program.clauses, program.fix_definitions)
    for s in doc["program_additions"]:
        try:
            f = parse_goal(s, shadow, allow_fresh=True, sig=sig)
        except Exception as exc:
            raise MalformedDocument(f"unparseable program addition {s!r}: {exc}") from exc
        entries = entries + (eng.Entry(f, src),)
    try:
        goal = parse_goal(doc["goal"], shadow, allow_fresh=True, sig=sig)
        focus = parse_goal(doc["focus"], shadow, allow_fresh=True, sig=sig) if "focus" in doc else None
        witness = parse_term(doc["witness"], shadow, allow_fresh=True) if "witness" in doc else None
    except MalformedDocument:
        raise
    except Exception as exc:
        raise MalformedDocument(f"unparseable proof payload: {exc}") from exc
    if witness is not None:
        witness = tm.canonicalize(witness)
    seq = eng.Sequent(sig, entries, focus, goal, mode, bool(doc["guarded"]))
    child_mode = eng.PLAIN
    children = tuple(
        _import_node(c, program, sig, entries, child_mode, rule) for c in doc["children"]
    )
    # the universal right rules own the eigenvariable their premise declares
    eigen = None
    if rule in ("forall-r", "forall-r<>") and children:
        parent_names = set(sig.as_dict())
        new = [n for n, _ in children[0].sequent.signature.constants if n not in parent_names]
        eigen = new[0] if new else None
    return eng.ProofTree(seq, rule, witness, eigen, children)


def import_proof(document: str | dict, program: Program) -> eng.ProofTree:
    """Rebuild a proof tree from its JSON document, replaying the recorded
    signature and program additions node by node."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"not valid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise MalformedDocument("proof document must be a JSON object")
    entries = tuple(eng.Entry(c, eng.Src.ORIGINAL) for c in program.clauses)
    mode = eng.COINDUCTIVE if doc.get("rule") == "co-fix" else eng.PLAIN
    return _import_node(doc, program, program.signature, entries, mode, None)


def parse_term_with_sig(text: str, program: Program, sig: Signature) -> Term:
    """Parse a term against an extended signature (eigenvariables included)."""
    shadow = Program(sig, program.clauses, program.fix_definitions)
    return parse_term(text, shadow, allow_fresh=True)
