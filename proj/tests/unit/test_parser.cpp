#include "ast_fuzz.hpp"
#include "doctest.h"
#include "vsched/rhm/ast.hpp"
#include "vsched/rhm/parser.hpp"

using namespace vsched;
using namespace vsched::rhm;

TEST_CASE("plan and asgn parse into the documented shape") {
    auto prog = parse_program("plan c1@0 [5]; asgn t0 (c1@0);");
    REQUIRE(prog.size() == 2);

    const Command& plan = *prog[0];
    CHECK(plan.kind == CmdKind::Plan);
    CHECK(plan.carvar == "c1@0");
    REQUIRE(plan.durs.size() == 1);
    CHECK(plan.durs[0]->kind == ExprKind::Lit);
    CHECK(plan.durs[0]->lit == 5);
    CHECK(plan.loc_pins == std::vector<long long>{-1});
    CHECK(plan.car_pin == -1);
    CHECK(plan.line == 1);

    const Command& asgn = *prog[1];
    CHECK(asgn.kind == CmdKind::Asgn);
    CHECK(asgn.task == "t0");
    REQUIRE(asgn.cars.size() == 1);
    CHECK(asgn.cars[0]->kind == CarExprKind::Var);
    CHECK(asgn.cars[0]->var == "c1@0");
}

TEST_CASE("free without a car index is a syntax error") {
    CHECK_THROWS_AS(parse_program("free t0;"), ParseError);
    try {
        parse_program("free t0;");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("index") != std::string::npos);
    }
    CHECK_NOTHROW(parse_program("free t0.0;"));
}

TEST_CASE("pins parse and survive printing") {
    auto prog = parse_program("plan c1@0 [5 @ 11, 3 @ 20] as cc2;");
    REQUIRE(prog.size() == 1);
    const Command& plan = *prog[0];
    CHECK(plan.loc_pins == std::vector<long long>{11, 20});
    CHECK(plan.car_pin == 2);
    CHECK(print_program(prog) == "plan c1@0 [5 @ 11, 3 @ 20] as cc2;\n");
}

TEST_CASE("hash before a letter is the length operator, otherwise a comment") {
    auto prog = parse_program(
        "x := #t0 + #cc1; # trailing note\n"
        "# a full-line comment\n"
        "y := 2;\n");
    REQUIRE(prog.size() == 2);
    const Expr& e = *prog[0]->expr;
    REQUIRE(e.kind == ExprKind::Add);
    CHECK(e.lhs->kind == ExprKind::TaskLen);
    CHECK(e.lhs->name == "t0");
    CHECK(e.rhs->kind == ExprKind::CarLen);
    CHECK(e.rhs->car->kind == CarExprKind::Lit);
    CHECK(e.rhs->car->cc == 1);
}

TEST_CASE("arithmetic precedence") {
    auto prog = parse_program("x := 1 + 2 * 3;");
    const Expr& e = *prog[0]->expr;
    REQUIRE(e.kind == ExprKind::Add);
    CHECK(e.lhs->lit == 1);
    REQUIRE(e.rhs->kind == ExprKind::Mul);
    CHECK(e.rhs->lhs->lit == 2);
    CHECK(e.rhs->rhs->lit == 3);
    CHECK(print_program(prog) == "x := 1 + 2 * 3;\n");

    auto paren = parse_program("x := (1 + 2) * 3;");
    CHECK(paren[0]->expr->kind == ExprKind::Mul);
    CHECK(print_program(paren) == "x := (1 + 2) * 3;\n");
}

TEST_CASE("control flow parses with nesting; empty blocks become skip") {
    auto prog = parse_program(
        "if 1 <= x and not (x = 3) then { x := x - 1; } else { skip; };\n"
        "while #t0 <= 4 do { exec1 t0.0; if true then { } ; };\n");
    REQUIRE(prog.size() == 2);
    CHECK(prog[0]->kind == CmdKind::If);
    CHECK(prog[0]->cond->kind == BoolKind::And);
    CHECK(prog[1]->kind == CmdKind::While);
    // inner empty then-branch folds to Skip
    const Command& wbody = *prog[1]->a;
    REQUIRE(wbody.kind == CmdKind::Seq);
    CHECK(wbody.b->kind == CmdKind::If);
    CHECK(wbody.b->a->kind == CmdKind::Skip);
}

TEST_CASE("locget syntax") {
    // A task-variable car expression always carries its own index, so the
    // source reads {t8.0 . 1}: car 0 of t8, location at position 1.
    auto prog = parse_program("l := {c1@0 . 0}; m := {t8.0 . (i + 1)};");
    REQUIRE(prog.size() == 2);
    CHECK(prog[0]->kind == CmdKind::LocGet);
    CHECK(prog[0]->car->kind == CarExprKind::Var);
    CHECK(prog[1]->car->kind == CarExprKind::Index);
    CHECK(prog[1]->car->var == "t8");
}

TEST_CASE("asgn accepts an empty car list, att does not") {
    CHECK_NOTHROW(parse_program("asgn t0 ();"));
    CHECK_THROWS_AS(parse_program("att t0 ();"), ParseError);
}

TEST_CASE("parse errors carry line and column") {
    try {
        parse_program("plan\nc1@0 [5;");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
        CHECK(e.col > 1);
    }
    CHECK_THROWS_AS(parse_program("plan c1@0 [];"), ParseError);       // empty plan
    CHECK_THROWS_AS(parse_program("x := ;"), ParseError);              // missing expr
    CHECK_THROWS_AS(parse_program("exec1 t0;"), ParseError);           // missing index
    CHECK_THROWS_AS(parse_program("plan c1@0 [5]"), ParseError);       // missing semicolon
    CHECK_THROWS_AS(parse_program("frobnicate t0;"), ParseError);      // unknown command
    CHECK_THROWS_AS(parse_program("x := 1 +;"), ParseError);           // dangling operator
}

TEST_CASE("printer output is a fixpoint and reparses to the same text") {
    const char* samples[] = {
        "plan c1@0 [5]; asgn t0 (c1@0); exec1 t0.0; free t0.0; comp t0;",
        "plan c3@8 [2 @ 20, 4 @ 30] as cc3; att t8 (c3@8); add c3@8 6 @ 40;",
        "x := 3;\nwhile 1 <= x do { x := x - 1; };",
        "if #t0 = 0 then { comp t0; } else { exec1 t0.0; };",
        "asgn t1 (null, cc2, t0.0);",
    };
    for (const char* s : samples) {
        auto once = parse_program(s);
        std::string p1 = print_program(once);
        auto twice = parse_program(p1);
        std::string p2 = print_program(twice);
        CHECK(p1 == p2);
    }
}

TEST_CASE("random programs round-trip through print and parse") {
    Rng rng(20260816);
    for (int i = 0; i < 500; ++i) {
        auto prog = fuzz::rand_program(rng);
        std::string p1 = print_program(prog);
        std::vector<CmdPtr> back;
        REQUIRE_NOTHROW(back = parse_program(p1));
        CHECK(print_program(back) == p1);
    }
}
