#pragma once

// Resource-heap modeling language: abstract syntax.
//
// A program manipulates a quintuple state (s_T, s_C, s_L, h_C, h_L): task
// store, car-variable store, location/arithmetic store, car heap (car
// resource -> location sequence) and location heap (location -> duration).
// Programs are compiled from scheduling schemes or written by hand; running
// one replays the resource discipline of a scheme.

#include <memory>
#include <string>
#include <vector>

namespace vsched::rhm {

struct Expr;
struct CarExpr;
struct TaskExpr;
struct BoolExpr;
struct Command;

using ExprPtr = std::shared_ptr<Expr>;
using CarExprPtr = std::shared_ptr<CarExpr>;
using TaskExprPtr = std::shared_ptr<TaskExpr>;
using BoolExprPtr = std::shared_ptr<BoolExpr>;
using CmdPtr = std::shared_ptr<Command>;

enum class ExprKind { Lit, Var, Add, Sub, Mul, CarLen, TaskLen };

struct Expr {
    ExprKind kind = ExprKind::Lit;
    long long lit = 0;        // Lit
    std::string name;         // Var: s_L variable; TaskLen: task variable
    ExprPtr lhs, rhs;         // Add/Sub/Mul
    CarExprPtr car;           // CarLen (#ce)
};

enum class CarExprKind { Null, Lit, Var, Index };

struct CarExpr {
    CarExprKind kind = CarExprKind::Null;
    long long cc = 0;         // Lit: explicit car resource id
    std::string var;          // Var: car variable "c1@0"; Index: task variable
    ExprPtr index;            // Index: t.e
};

enum class TaskExprKind { Null, Fin, Var, Append, Concat };

struct TaskExpr {
    TaskExprKind kind = TaskExprKind::Null;
    std::string var;          // Var
    TaskExprPtr a, b;         // Append: a . car; Concat: a . b
    CarExprPtr car;           // Append
};

enum class BoolKind { True, False, Not, And, Or, Eq, Le };

struct BoolExpr {
    BoolKind kind = BoolKind::True;
    BoolExprPtr a, b;         // Not (a), And/Or
    ExprPtr l, r;             // Eq/Le
};

enum class CmdKind {
    Skip,
    Assign,   // x := e
    LocGet,   // x := {ce . e}   bind the location at index e of h_C(ce)
    Seq,
    If,
    While,
    Plan,     // plan c@a [e (@ loc)?, ...] (as ccN)?   allocate car + locations
    Asgn,     // asgn t (ce, ...)                       bind task to cars
    Att,      // att t (ce, ...)                        append cars to task
    Free,     // free t.e                               drop exhausted car
    Comp,     // comp t                                 mark task finished
    Add,      // add c@a e (@ loc)?                     append one location
    Exec1,    // exec1 t.e                              run first op of car e of t
};

struct Command {
    CmdKind kind = CmdKind::Skip;
    int line = 0;
    int col = 0;

    std::string var;                  // Assign/LocGet target
    ExprPtr expr;                     // Assign value; Free/Exec1/LocGet index; Add duration
    CarExprPtr car;                   // LocGet source
    std::string carvar;               // Plan/Add car variable (annotated "cN@owner")
    std::string task;                 // Asgn/Att/Free/Comp/Exec1 task variable
    std::vector<ExprPtr> durs;        // Plan durations
    std::vector<long long> loc_pins;  // Plan: parallel to durs, -1 = fresh
    long long car_pin = -1;           // Plan "as ccN", -1 = fresh
    long long add_pin = -1;           // Add "@ N", -1 = fresh
    std::vector<CarExprPtr> cars;     // Asgn/Att arguments
    BoolExprPtr cond;                 // If/While
    CmdPtr a, b;                      // Seq: a;b  If: then/else  While: body=a
};

// Owning task label of an annotated car variable: "c1@0" -> "t0",
// "c2@rig" -> "rig". Empty when the variable carries no annotation.
std::string owner_label(const std::string& carvar);

ExprPtr lit(long long v);
ExprPtr var(const std::string& name);
ExprPtr bin(ExprKind k, ExprPtr l, ExprPtr r);
ExprPtr car_len(CarExprPtr ce);
ExprPtr task_len(const std::string& task);

CarExprPtr car_null();
CarExprPtr car_lit(long long cc);
CarExprPtr car_var(const std::string& name);
CarExprPtr car_index(const std::string& task, ExprPtr index);

std::string to_string(const Expr& e);
std::string to_string(const CarExpr& ce);
std::string to_string(const BoolExpr& be);

// Canonical program text: one command per line, nested blocks indented by
// two spaces, every command semicolon-terminated. parse(print(p)) rebuilds
// an identical AST, and print is a normal form.
std::string print_program(const std::vector<CmdPtr>& program);

}  // namespace vsched::rhm
