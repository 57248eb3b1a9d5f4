import pytest

from cup import terms as tm
from cup.errors import (
    FixBodyNotAbstraction,
    NoFixRedex,
    NonFirstOrderSignature,
    TypeMismatch,
    UnboundConstant,
    UnboundVariable,
)
from cup.terms import (
    Arrow,
    Con,
    EQUAL,
    Fix,
    IOTA,
    NOT_EQUAL,
    O,
    Signature,
    fn_type,
)

from helpers import A, C, FR_STR, L, N_STR, STREAM_SIG, V, Z_STR, alpha_eq_oracle, scons


class TestTypeOrder:
    def test_base(self):
        assert tm.type_order(IOTA) == 0

    def test_first_order_constructor(self):
        assert tm.type_order(fn_type(IOTA, IOTA, IOTA)) == 1

    def test_second_order(self):
        # hand evaluation: max(ord(i->i)+1, ord(i)) = max(2, 0)
        assert tm.type_order(Arrow(Arrow(IOTA, IOTA), IOTA)) == 2


class TestTypecheck:
    def test_zero_stream(self):
        assert tm.typecheck(STREAM_SIG, {}, Z_STR) == IOTA

    def test_var_rule(self):
        assert tm.typecheck(STREAM_SIG, {"x": IOTA}, V("x")) == IOTA

    def test_successive_stream(self):
        assert tm.typecheck(STREAM_SIG, {}, FR_STR) == fn_type(IOTA, IOTA)

    def test_unbound_constant(self):
        with pytest.raises(UnboundConstant):
            tm.typecheck(STREAM_SIG, {}, C("zilch"))

    def test_unbound_variable(self):
        with pytest.raises(UnboundVariable):
            tm.typecheck(STREAM_SIG, {}, V("y"))

    def test_application_mismatch(self):
        with pytest.raises(TypeMismatch):
            tm.typecheck(STREAM_SIG, {}, A(C("0"), C("0")))

    def test_fix_body_not_abstraction(self):
        with pytest.raises(FixBodyNotAbstraction):
            tm.typecheck(STREAM_SIG, {}, Fix(C("0")))


class TestFreeVarsSubterms:
    def test_abstraction_removes_binder(self):
        assert tm.free_vars(L("x", A(C("scons"), V("x"), V("y")))) == {"y"}

    def test_guarded_fix_closed(self):
        assert tm.free_vars(FR_STR) == set()

    def test_subterms_enumeration(self):
        t = scons(C("0"), C("nil"))
        subs = tm.subterms(t)
        assert {C("0"), C("nil"), C("scons"), A(C("scons"), C("0")), t} <= subs


class TestSubstitute:
    def test_clause_instantiation(self):
        t = A(C("member"), V("x"), scons(V("x"), V("y")))
        out = tm.substitute(t, [("x", C("0")), ("y", C("nil"))])
        assert out == A(C("member"), C("0"), scons(C("0"), C("nil")))

    def test_variable_base_case(self):
        assert tm.substitute(V("x"), [("x", C("0"))]) == C("0")

    def test_capture_avoidance(self):
        # (\y. x y)[x := y] must rename the binder
        t = L("y", A(V("x"), V("y")))
        out = tm.subst1(t, "x", V("y"))
        assert tm.alpha_eq(out, L("z", A(V("y"), V("z"))))
        assert alpha_eq_oracle(out, L("z", A(V("y"), V("z"))))


class TestAlphaEq:
    def test_identity_abstraction(self):
        assert tm.alpha_eq(L("x", V("x")), L("y", V("y")))

    def test_different_binding_structure(self):
        t1 = L("x", L("y", V("x")))
        t2 = L("y", L("x", V("x")))
        assert not tm.alpha_eq(t1, t2)
        assert not alpha_eq_oracle(t1, t2)

    def test_fix_binders(self):
        other = Fix(L("y", A(C("scons"), C("0"), V("y"))))
        assert tm.alpha_eq(Z_STR, other)
        assert alpha_eq_oracle(Z_STR, other)


class TestBetaNormalize:
    def test_single_redex(self):
        t = A(L("x", scons(V("x"), C("nil"))), C("0"))
        assert tm.beta_normalize(t) == scons(C("0"), C("nil"))

    def test_fix_is_opaque(self):
        t = A(FR_STR, C("0"))
        assert tm.beta_normalize(t) == t

    def test_two_step(self):
        t = A(L("x", L("y", A(C("member"), V("x"), V("y")))), C("0"), C("nil"))
        assert tm.beta_normalize(t) == A(C("member"), C("0"), C("nil"))


class TestFixbetaUnfold:
    def test_zero_stream(self):
        assert tm.fixbeta_unfold(Z_STR) == scons(C("0"), Z_STR)

    def test_constant_stream(self):
        out = tm.fixbeta_unfold(A(N_STR, V("x")))
        assert out == scons(V("x"), A(N_STR, V("x")))

    def test_successive_stream(self):
        out = tm.fixbeta_unfold(A(FR_STR, V("n")))
        assert out == scons(V("n"), A(FR_STR, A(C("s"), V("n"))))

    def test_no_redex(self):
        with pytest.raises(NoFixRedex):
            tm.fixbeta_unfold(scons(C("0"), C("nil")))


class TestFixbetaEquiv:
    def test_from_pair(self):
        z = C("Z")
        t1 = A(C("from"), z, scons(z, A(FR_STR, A(C("s"), z))))
        t2 = A(C("from"), z, A(FR_STR, z))
        assert tm.fixbeta_equiv(t1, t2, 8) == EQUAL

    def test_bitstream_pair(self):
        t1 = A(C("bitstream"), A(N_STR, C("0")))
        t2 = A(C("bitstream"), scons(C("0"), A(N_STR, C("0"))))
        assert tm.fixbeta_equiv(t1, t2, 8) == EQUAL

    def test_distinct_constants(self):
        assert tm.fixbeta_equiv(A(C("bit"), C("0")), A(C("bit"), C("1")), 8) == NOT_EQUAL

    def test_unknown_on_distinct_streams(self):
        # zeros vs the zero-headed constant stream differ only past any
        # bound-8 unfolding window when both sides keep growing in step
        ones = Fix(L("x", scons(C("1"), V("x"))))
        assert tm.fixbeta_equiv(Z_STR, ones, 4) == NOT_EQUAL

    def test_reflexive(self):
        for t in (Z_STR, A(N_STR, C("0")), scons(C("0"), C("nil"))):
            assert tm.fixbeta_equiv(t, t, 2) == EQUAL


class TestFirstOrder:
    def test_ground_constructor_term(self):
        assert tm.is_first_order(STREAM_SIG, {}, scons(C("0"), C("nil")))

    def test_fix_violates_condition_five(self):
        report = tm.first_order_report(STREAM_SIG, {}, Z_STR)
        assert not report.verdict
        assert any(code == 5 for code, _ in report.violations)

    def test_functional_type_violates_condition_one(self):
        report = tm.first_order_report(STREAM_SIG, {}, L("x", V("x")), expected=fn_type(IOTA, IOTA))
        assert not report.verdict
        assert any(code == 1 for code, _ in report.violations)

    def test_atom_is_not_a_first_order_term(self):
        # atoms have type o, which condition four forbids in subterm types
        report = tm.first_order_report(STREAM_SIG, {}, A(C("bit"), C("0")))
        assert any(code == 4 for code, _ in report.violations)

    def test_first_order_atom(self):
        assert tm.is_first_order_atom(STREAM_SIG, {}, A(C("bit"), C("0")))
        assert not tm.is_first_order_atom(STREAM_SIG, {}, A(C("bitstream"), Z_STR))


class TestSignature:
    def test_stream_signature_is_first_order(self):
        STREAM_SIG.check_first_order()

    def test_second_order_constant_rejected(self):
        sig = Signature.of({"twice": Arrow(Arrow(IOTA, IOTA), IOTA)})
        with pytest.raises(NonFirstOrderSignature):
            sig.check_first_order()

    def test_o_in_argument_position_rejected(self):
        sig = Signature.of({"holds": fn_type(O, O)})
        with pytest.raises(NonFirstOrderSignature):
            sig.check_first_order()


class TestSnapshotGrowth:
    def test_unfolding_grows_the_determined_skeleton(self):
        # iterate the single-step unfolding; the snapshot's tree height
        # must grow strictly (the computational content of productivity)
        from cup.guardedness import snapshot
        from cup.trees import term_to_tree

        sig = STREAM_SIG
        for base in (
            A(C("bitstream"), Z_STR),
            A(C("bitstream"), A(N_STR, C("0"))),
            A(C("from"), C("0"), A(FR_STR, C("0"))),
        ):
            t = base
            last_height = -1
            for _ in range(8):
                tree = term_to_tree(sig, snapshot(sig, t))
                assert tree.height() > last_height
                last_height = tree.height()
                t = tm.fixbeta_unfold(t)
