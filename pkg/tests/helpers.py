"""Shared test fixtures: term builders, independent oracles, generators."""

from __future__ import annotations

import itertools
import random

from cup import terms as tm
from cup.terms import App, Arrow, Con, Fix, IOTA, Lam, O, Signature, Var, fn_type

V = Var
C = Con


def A(*ts):
    return tm.app(*ts)


def L(v, body):
    return Lam(v, body)


def F(body):
    return Fix(body)


STREAM_SIG = Signature.of(
    {
        "0": IOTA,
        "1": IOTA,
        "nil": IOTA,
        "s": fn_type(IOTA, IOTA),
        "scons": fn_type(IOTA, IOTA, IOTA),
        "bit": fn_type(IOTA, O),
        "bitstream": fn_type(IOTA, O),
        "member": fn_type(IOTA, IOTA, O),
        "eq": fn_type(IOTA, IOTA, O),
        "from": fn_type(IOTA, IOTA, O),
    }
)

Z_STR = F(L("x", A(C("scons"), C("0"), V("x"))))
N_STR = F(L("f", L("n", A(C("scons"), V("n"), A(V("f"), V("n"))))))
FR_STR = F(L("f", L("n", A(C("scons"), V("n"), A(V("f"), A(C("s"), V("n")))))))


def scons(h, t):
    return A(C("scons"), h, t)


def slist(*items):
    """[a|b|...|t] built right-nested; last item is the tail."""
    out = items[-1]
    for x in reversed(items[:-1]):
        out = scons(x, out)
    return out


# ---------------------------------------------------------------------------
# de Bruijn oracle for alpha-equivalence
# ---------------------------------------------------------------------------


def debruijn(t, env=()):
    if isinstance(t, Var):
        if t.name in env:
            return ("b", env.index(t.name))
        return ("fv", t.name)
    if isinstance(t, Con):
        return ("c", t.name)
    if isinstance(t, App):
        return ("a", debruijn(t.fn, env), debruijn(t.arg, env))
    if isinstance(t, Lam):
        return ("l", debruijn(t.body, (t.var,) + env))
    return ("f", debruijn(t.body, env))


def alpha_eq_oracle(t1, t2) -> bool:
    return debruijn(t1) == debruijn(t2)


# ---------------------------------------------------------------------------
# Brute-force greatest fixed point over a finite atom space
# ---------------------------------------------------------------------------


def exact_gfp(atoms: list[str], clauses: list[tuple[str, frozenset]]) -> frozenset:
    """Union of all post-fixed points of the clause-step operator, found by
    enumerating the full powerset."""

    def step(interp: frozenset) -> frozenset:
        return frozenset(h for h, body in clauses if body <= interp)

    out: set[str] = set()
    for k in range(len(atoms) + 1):
        for combo in itertools.combinations(atoms, k):
            interp = frozenset(combo)
            if interp <= step(interp):
                out |= interp
    return frozenset(out)


def random_propositional_program(rng: random.Random, n_preds: int, n_clauses: int):
    """Random propositional program text plus its (head, body) clause list."""
    preds = [f"p{i}" for i in range(n_preds)]
    decls = "".join(f"const {p} : o.\n" for p in preds)
    clauses = []
    lines = []
    for _ in range(n_clauses):
        head = rng.choice(preds)
        body = frozenset(rng.sample(preds, rng.randint(0, min(3, n_preds))))
        clauses.append((head, body))
        if body:
            lines.append(f"{head} :- {', '.join(sorted(body))}.")
        else:
            lines.append(f"{head}.")
    return decls + "\n".join(lines) + "\n", preds, clauses


# ---------------------------------------------------------------------------
# Random well-typed term generation (plain `random`, driven by a seed)
# ---------------------------------------------------------------------------

GEN_SIG = Signature.of(
    {
        "0": IOTA,
        "1": IOTA,
        "s": fn_type(IOTA, IOTA),
        "scons": fn_type(IOTA, IOTA, IOTA),
    }
)

_GEN_TYPES = [IOTA, fn_type(IOTA, IOTA), fn_type(IOTA, IOTA, IOTA)]


def gen_term(rng: random.Random, ty, ctx: dict, depth: int):
    """A random well-typed term of the given type over GEN_SIG and ctx."""
    leaves = [Con(n) for n, t in GEN_SIG.constants if t == ty]
    leaves += [Var(v) for v, t in ctx.items() if t == ty]
    choices = []
    if leaves:
        choices.append("leaf")
    if depth > 0:
        choices.append("app")
        choices.append("fix")
        if isinstance(ty, Arrow):
            choices.append("lam")
    if not choices:
        choices = ["fallback"]
    kind = rng.choice(choices)
    if kind == "leaf":
        return rng.choice(leaves)
    if kind == "lam":
        v = f"v{rng.randrange(4)}"
        body = gen_term(rng, ty.res, {**ctx, v: ty.arg}, depth - 1)
        return Lam(v, body)
    if kind == "app":
        arg_ty = rng.choice(_GEN_TYPES[:2])
        fn = gen_term(rng, Arrow(arg_ty, ty), ctx, depth - 1)
        arg = gen_term(rng, arg_ty, ctx, depth - 1)
        return App(fn, arg)
    if kind == "fix":
        v = f"w{rng.randrange(4)}"
        body = gen_term(rng, ty, {**ctx, v: ty}, depth - 1)
        return Fix(Lam(v, body))
    # fallback: a small closed term of type i, wrapped to fit arrows
    if ty == IOTA:
        return Con("0")
    if isinstance(ty, Arrow):
        v = f"u{rng.randrange(4)}"
        return Lam(v, gen_term(rng, ty.res, {**ctx, v: ty.arg}, 0))
    return Con("0")


def rename_binders(rng: random.Random, t):
    """An alpha-variant of t with randomly renamed bound variables."""
    if isinstance(t, (Var, Con)):
        return t
    if isinstance(t, App):
        return App(rename_binders(rng, t.fn), rename_binders(rng, t.arg))
    if isinstance(t, Fix):
        return Fix(rename_binders(rng, t.body))
    fresh = f"r{rng.randrange(1000)}"
    if fresh in tm.free_vars(t.body):
        fresh = fresh + "x"
    body = tm.rename_free(t.body, t.var, fresh)
    return Lam(fresh, rename_binders(rng, body))


def gen_tree(rng: random.Random, depth: int):
    """Random finite tree over a tiny symbol alphabet, for metric tests."""
    from cup.trees import Tree

    arities = {"a": 0, "b": 0, "g": 1, "h": 2}
    label = rng.choice(list(arities))
    if depth == 0:
        label = rng.choice(["a", "b"])
    kids = tuple(gen_tree(rng, depth - 1) for _ in range(arities[label]))
    return Tree(label, kids)
