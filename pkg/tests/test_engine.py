import pytest

from cup import engine as eng
from cup import formulas as fm
from cup import parser as ps
from cup import terms as tm
from cup.engine import LemmaStore, SearchConfig, Src, check, coprove, promote_lemma, prove, unify_first_order, witness_pool
from cup.errors import FlexibleAtomUnsupported, NotCoreFormula, ProofInvalid
from cup.formulas import Atom, Calculus, HClause, TOP

from helpers import A, C, N_STR, V, scons, slist


def rules_of(tree):
    return [n.rule for n in tree.nodes()]


class TestUnifyFirstOrder:
    def test_member_pattern(self):
        a1 = A(C("member"), V("x"), scons(V("y"), V("t")))
        a2 = A(C("member"), C("0"), slist(C("0"), C("nil")))
        s = dict(unify_first_order(a1, a2))
        assert s == {"x": C("0"), "y": C("0"), "t": C("nil")}

    def test_identical_atoms(self):
        a = A(C("bit"), V("x"))
        assert unify_first_order(a, a) == []

    def test_occurs_check(self):
        assert unify_first_order(A(C("bit"), V("x")), A(C("bit"), A(C("s"), V("x")))) is None


class TestCoproveRegressions:
    def test_member_regression_shape(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["member67"]
        assert rules_of(res.tree) == [
            "co-fix", "decide<>", "forall-l<>", "forall-l<>", "forall-l<>",
            "imp-l<>", "initial", "and-r", "decide", "initial", "decide",
            "forall-l", "initial",
        ]
        ok, diag = check(res.tree, prog, calc)
        assert ok, diag
        # the regular coinductive-hypothesis use: the hypothesis is decided
        # on verbatim in the conjunction's left branch
        decide_focus = res.tree.children[0].children[0].children[0].children[0].children[0]
        assert decide_focus.rule == "imp-l<>"

    def test_bitstream_regression_shape(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["bitstream"]
        assert rules_of(res.tree) == [
            "co-fix", "decide<>", "forall-l<>", "forall-l<>", "imp-l<>",
            "initial", "and-r", "decide", "initial", "decide", "initial",
        ]
        ok, diag = check(res.tree, prog, calc)
        assert ok, diag

    def test_from_regression_shape(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["from"]
        assert rules_of(res.tree) == [
            "co-fix", "forall-r<>", "decide<>", "forall-l<>", "forall-l<>",
            "imp-l<>", "initial", "decide", "forall-l", "initial",
        ]
        # the coinductive hypothesis is instantiated with the successor of
        # the eigenvariable
        ch_use = res.tree.children[0].children[0].children[0].children[0].children[0].children[1]
        assert ch_use.rule == "decide"
        forall_l = ch_use.children[0]
        eigen = res.tree.children[0].eigen
        assert forall_l.witness == A(C("s"), C(eigen))

    def test_comember_regression_shape(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["comember"]
        assert rules_of(res.tree) == [
            "co-fix", "forall-r<>", "forall-r<>", "imp-r<>", "decide<>",
            "forall-l<>", "forall-l<>", "imp-l<>", "initial", "and-r",
            "decide", "forall-l", "forall-l", "imp-l", "initial", "decide",
            "initial", "decide", "initial",
        ]
        ok, diag = check(res.tree, prog, calc)
        assert ok, diag

    def test_atomic_hypothesis_never_applies(self, from_program):
        g = ps.parse_goal("from 0 (fr_str 0)", from_program)
        for depth in (4, 9, 17):
            res = coprove(from_program, g, SearchConfig(calculus=Calculus.HOHC, depth_limit=depth))
            assert not res.proved
            assert res.reason == "depth-exceeded"

    def test_non_core_formula_rejected(self, bitstream_program):
        g = ps.parse_goal("exists y. bitstream [0|y]", bitstream_program)
        with pytest.raises(NotCoreFormula):
            coprove(bitstream_program, g, SearchConfig(calculus=Calculus.HOHC))

    def test_higher_order_hypothesis_not_core_in_first_order(self, bitstream_program):
        g = ps.parse_goal("bitstream [0|n_str 0]", bitstream_program)
        with pytest.raises(NotCoreFormula):
            coprove(bitstream_program, g, SearchConfig(calculus=Calculus.FOHC))


class TestProve:
    def test_top(self, bitstream_program):
        res = prove(bitstream_program, None, TOP, SearchConfig(calculus=Calculus.FOHC))
        assert res.proved and rules_of(res.tree) == ["top-r"]

    def test_inductive_style_member(self, member12_program):
        g = ps.parse_goal("member 1 [0|1|nil]", member12_program)
        res = prove(member12_program, None, g, SearchConfig(calculus=Calculus.FOHC))
        assert res.proved
        assert rules_of(res.tree).count("decide") == 2
        ok, diag = check(res.tree, member12_program, Calculus.FOHC)
        assert ok, diag

    def test_exists_with_promoted_lemma(self, regression_proofs):
        prog, goal, calc, res = regression_proofs["bitstream"]
        lemma = HClause((), (), goal.term if isinstance(goal, Atom) else None)
        store = promote_lemma(prog, lemma, res.tree, LemmaStore())
        g = ps.parse_goal("exists y. bitstream [0|y]", prog)
        out = prove(prog, store, g, SearchConfig(calculus=Calculus.HOHC))
        assert out.proved
        witnesses = [n.witness for n in out.tree.nodes() if n.rule == "exists-r"]
        assert tm.alpha_eq(witnesses[0], A(N_STR, C("0")))

    def test_lemma_for_ground_comember(self, regression_proofs):
        prog, goal, calc, res = regression_proofs["comember"]
        lemma = fm.to_h_clauses(goal)[0]
        store = promote_lemma(prog, lemma, res.tree, LemmaStore())
        g = ps.parse_goal("comember_bit 0 [0|1]", prog)
        out = prove(prog, store, g, SearchConfig(calculus=Calculus.FOHC))
        assert out.proved

    def test_definite_failure_is_not_inconclusive(self):
        prog = ps.parse_program("const p : o. const q : o.\np.")
        g = ps.parse_goal("q", prog)
        res = prove(prog, None, g, SearchConfig(calculus=Calculus.FOHC, depth_limit=16))
        assert res.reason == "no-proof"

    def test_flexible_atom_rejected_at_search(self, bitstream_program):
        g = fm.Exists("p", tm.fn_type(tm.IOTA, tm.O), Atom(A(V("p"), C("0"))))
        with pytest.raises(FlexibleAtomUnsupported):
            prove(bitstream_program, None, g, SearchConfig(calculus=Calculus.HOHH))


class TestChecker:
    def test_regressions_check(self, regression_proofs):
        for name, (prog, _g, calc, res) in regression_proofs.items():
            ok, diag = check(res.tree, prog, calc)
            assert ok, (name, diag)

    def test_decide_guard_restriction(self, regression_proofs):
        # retarget the guarded decide at the coinductive hypothesis
        prog, _g, calc, res = regression_proofs["bitstream"]
        ch = res.tree.sequent.goal
        node = res.tree.children[0].children[0]
        bad_child = eng.ProofTree(
            node.sequent.with_(focus=ch),
            node.rule,
            node.witness,
            node.eigen,
            node.children,
        )
        bad = eng.ProofTree(
            res.tree.sequent,
            "co-fix",
            children=(
                eng.ProofTree(
                    res.tree.children[0].sequent,
                    "decide<>",
                    children=(bad_child,),
                ),
            ),
        )
        ok, diag = check(bad, prog, calc)
        assert not ok
        assert "original program" in diag

    def test_stale_eigenvariable_rejected(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["from"]

        def clobber(node):
            if node.rule == "forall-r<>":
                # replace the eigenvariable with one already in the signature
                return eng.ProofTree(node.sequent, node.rule, node.witness, "0", node.children)
            return eng.ProofTree(
                node.sequent, node.rule, node.witness, node.eigen, tuple(clobber(c) for c in node.children)
            )

        ok, diag = check(clobber(res.tree), prog, calc)
        assert not ok and "eigenvariable" in diag

    def test_cofix_only_at_root(self, regression_proofs):
        prog, _g, calc, res = regression_proofs["bitstream"]
        inner = res.tree.children[0]
        nested = eng.ProofTree(res.tree.sequent, "co-fix", children=(res.tree,))
        ok, _ = check(nested, prog, calc)
        assert not ok

    def test_first_order_witness_restriction(self, regression_proofs):
        # a fix-term witness is rejected when checking in a first-order calculus
        prog, _g, _calc, res = regression_proofs["bitstream"]
        ok_hohc, _ = check(res.tree, prog, Calculus.HOHC)
        ok_fohc, diag = check(res.tree, prog, Calculus.FOHC)
        assert ok_hohc and not ok_fohc

    def test_fragment_monotonicity_of_found_proofs(self, regression_proofs):
        order = {
            Calculus.FOHC: [Calculus.FOHC, Calculus.FOHH, Calculus.HOHC, Calculus.HOHH],
            Calculus.FOHH: [Calculus.FOHH, Calculus.HOHH],
            Calculus.HOHC: [Calculus.HOHC, Calculus.HOHH],
            Calculus.HOHH: [Calculus.HOHH],
        }
        for name, (prog, _g, calc, res) in regression_proofs.items():
            for upper in order[calc]:
                ok, diag = check(res.tree, prog, upper)
                assert ok, (name, upper, diag)

    def test_guard_discipline(self, regression_proofs):
        # on every root-to-leaf path the goal stays guarded from the root
        # until exactly one guard-discharging step
        for name, (_prog, _g, _calc, res) in regression_proofs.items():
            def paths(node, acc):
                acc = acc + [node]
                if not node.children:
                    yield acc
                for c in node.children:
                    yield from paths(c, acc)

            for path in paths(res.tree, []):
                discharging = [
                    n for n in path if n.rule in ("imp-l<>", "initial<>")
                ]
                assert len(discharging) <= 1
                seen_discharge = False
                for n in path[1:]:
                    if n.rule in ("imp-l<>", "initial<>"):
                        seen_discharge = True
                        continue
                    if not seen_discharge:
                        assert n.sequent.guarded, (name, rules_of(res.tree))
                # the hypothesis is never the guarded decide's focus
                for parent, child in zip(path, path[1:]):
                    if parent.rule == "decide<>":
                        srcs = [
                            e.src
                            for e in parent.sequent.entries
                            if fm.formula_alpha_eq(e.formula, child.sequent.focus)
                        ]
                        assert Src.ORIGINAL in srcs


class TestWitnessPool:
    def test_unifier_bindings_for_bitstream(self, regression_proofs):
        prog, goal, calc, _res = regression_proofs["bitstream"]
        seq = eng.Sequent(
            prog.signature,
            tuple(eng.Entry(c, Src.ORIGINAL) for c in prog.clauses),
            None,
            goal,
        )
        pool = witness_pool(seq, prog, SearchConfig(calculus=calc))
        assert any(tm.alpha_eq(t, C("0")) for t in pool)
        assert any(tm.alpha_eq(t, A(N_STR, C("0"))) for t in pool)

    def test_first_order_pool_never_contains_fix_terms(self, regression_proofs):
        prog, goal, _calc, _res = regression_proofs["bitstream"]
        seq = eng.Sequent(
            prog.signature,
            tuple(eng.Entry(c, Src.ORIGINAL) for c in prog.clauses),
            None,
            ps.parse_goal("bit 0", prog),
        )
        for calc in (Calculus.FOHC, Calculus.FOHH):
            pool = witness_pool(seq, prog, SearchConfig(calculus=calc))
            assert all(not tm.has_fix(t) for t in pool)

    def test_ch_match_produces_successor_witness(self, regression_proofs):
        prog, goal, calc, res = regression_proofs["from"]
        eigen = res.tree.children[0].eigen
        seq = eng.Sequent(
            prog.signature.extend(eigen, tm.IOTA),
            tuple(eng.Entry(c, Src.ORIGINAL) for c in prog.clauses) + (eng.Entry(goal, Src.COHYP),),
            None,
            ps.parse_goal(f"from (s {eigen}) (fr_str (s {eigen}))", prog, allow_fresh=True,
                          sig=prog.signature.extend(eigen, tm.IOTA)),
        )
        pool = witness_pool(seq, prog, SearchConfig(calculus=calc))
        assert any(tm.alpha_eq(t, A(C("s"), C(eigen))) for t in pool)


class TestPromoteLemma:
    def test_corrupted_proof_rejected(self, regression_proofs):
        prog, goal, _calc, res = regression_proofs["bitstream"]

        def corrupt(node):
            if node.rule == "forall-l<>" and node.witness is not None:
                return eng.ProofTree(node.sequent, node.rule, C("1"), node.eigen, node.children)
            return eng.ProofTree(
                node.sequent, node.rule, node.witness, node.eigen, tuple(corrupt(c) for c in node.children)
            )

        lemma = HClause((), (), goal.term)
        with pytest.raises(ProofInvalid):
            promote_lemma(prog, lemma, corrupt(res.tree), LemmaStore())

    def test_mismatched_lemma_rejected(self, regression_proofs):
        prog, _goal, _calc, res = regression_proofs["bitstream"]
        other = HClause((), (), A(C("bit"), C("0")))
        with pytest.raises(ProofInvalid):
            promote_lemma(prog, other, res.tree, LemmaStore())

    def test_lemma_is_not_original(self, regression_proofs):
        # a promoted lemma may be decided on, but never under the guard
        prog, goal, calc, res = regression_proofs["bitstream"]
        store = promote_lemma(prog, HClause((), (), goal.term), res.tree, LemmaStore())
        entries = eng._base_entries(prog, store)
        assert [e.src for e in entries].count(Src.LEMMA) == 1


class TestSearchStats:
    def test_stats_reported(self, regression_proofs):
        for _name, (_prog, _g, _calc, res) in regression_proofs.items():
            assert res.stats.nodes > 0
            assert res.stats.max_depth >= 1

    def test_depth_limit_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(calculus=Calculus.FOHC, depth_limit=0)
