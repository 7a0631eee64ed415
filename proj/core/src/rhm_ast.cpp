#include "vsched/rhm/ast.hpp"

#include <cctype>
#include <sstream>

namespace vsched::rhm {

std::string owner_label(const std::string& carvar) {
    auto at = carvar.find('@');
    if (at == std::string::npos || at + 1 >= carvar.size()) return "";
    std::string suffix = carvar.substr(at + 1);
    bool digits = true;
    for (char c : suffix)
        if (!std::isdigit(static_cast<unsigned char>(c))) digits = false;
    return digits ? "t" + suffix : suffix;
}

ExprPtr lit(long long v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Lit;
    e->lit = v;
    return e;
}

ExprPtr var(const std::string& name) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->name = name;
    return e;
}

ExprPtr bin(ExprKind k, ExprPtr l, ExprPtr r) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
}

ExprPtr car_len(CarExprPtr ce) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::CarLen;
    e->car = std::move(ce);
    return e;
}

ExprPtr task_len(const std::string& task) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::TaskLen;
    e->name = task;
    return e;
}

CarExprPtr car_null() {
    auto c = std::make_shared<CarExpr>();
    c->kind = CarExprKind::Null;
    return c;
}

CarExprPtr car_lit(long long cc) {
    auto c = std::make_shared<CarExpr>();
    c->kind = CarExprKind::Lit;
    c->cc = cc;
    return c;
}

CarExprPtr car_var(const std::string& name) {
    auto c = std::make_shared<CarExpr>();
    c->kind = CarExprKind::Var;
    c->var = name;
    return c;
}

CarExprPtr car_index(const std::string& task, ExprPtr index) {
    auto c = std::make_shared<CarExpr>();
    c->kind = CarExprKind::Index;
    c->var = task;
    c->index = std::move(index);
    return c;
}

namespace {

// Precedence: Mul binds tighter than Add/Sub; parenthesise as needed.
int prec(ExprKind k) {
    switch (k) {
        case ExprKind::Add:
        case ExprKind::Sub: return 1;
        case ExprKind::Mul: return 2;
        default: return 3;
    }
}

void print_expr(std::ostream& os, const Expr& e, int parent_prec) {
    int p = prec(e.kind);
    bool paren = p < parent_prec;
    if (paren) os << '(';
    switch (e.kind) {
        case ExprKind::Lit: os << e.lit; break;
        case ExprKind::Var: os << e.name; break;
        case ExprKind::Add:
            print_expr(os, *e.lhs, p);
            os << " + ";
            print_expr(os, *e.rhs, p + 1);
            break;
        case ExprKind::Sub:
            print_expr(os, *e.lhs, p);
            os << " - ";
            print_expr(os, *e.rhs, p + 1);
            break;
        case ExprKind::Mul:
            print_expr(os, *e.lhs, p);
            os << " * ";
            print_expr(os, *e.rhs, p + 1);
            break;
        case ExprKind::CarLen: os << '#' << to_string(*e.car); break;
        case ExprKind::TaskLen: os << '#' << e.name; break;
    }
    if (paren) os << ')';
}

void print_index(std::ostream& os, const Expr& e) {
    // A dotted index is restricted to a literal, a variable, or a
    // parenthesised expression.
    if (e.kind == ExprKind::Lit || e.kind == ExprKind::Var) {
        print_expr(os, e, 0);
    } else {
        os << '(';
        print_expr(os, e, 0);
        os << ')';
    }
}

void print_cmd(std::ostream& os, const Command& c, int indent);

void print_block(std::ostream& os, const CmdPtr& c, int indent) {
    // Flatten Seq chains into the block line list.
    if (c->kind == CmdKind::Seq) {
        print_block(os, c->a, indent);
        print_block(os, c->b, indent);
    } else {
        print_cmd(os, *c, indent);
    }
}

void print_cmd(std::ostream& os, const Command& c, int indent) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (c.kind) {
        case CmdKind::Skip: os << pad << "skip;\n"; break;
        case CmdKind::Assign:
            os << pad << c.var << " := ";
            print_expr(os, *c.expr, 0);
            os << ";\n";
            break;
        case CmdKind::LocGet:
            os << pad << c.var << " := {" << to_string(*c.car) << " . ";
            print_index(os, *c.expr);
            os << "};\n";
            break;
        case CmdKind::Seq:
            print_block(os, c.a, indent);
            print_block(os, c.b, indent);
            break;
        case CmdKind::If:
            os << pad << "if " << to_string(*c.cond) << " then {\n";
            print_block(os, c.a, indent + 1);
            os << pad << "}";
            if (c.b && c.b->kind != CmdKind::Skip) {
                os << " else {\n";
                print_block(os, c.b, indent + 1);
                os << pad << "}";
            }
            os << ";\n";
            break;
        case CmdKind::While:
            os << pad << "while " << to_string(*c.cond) << " do {\n";
            print_block(os, c.a, indent + 1);
            os << pad << "};\n";
            break;
        case CmdKind::Plan: {
            os << pad << "plan " << c.carvar << " [";
            for (std::size_t i = 0; i < c.durs.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, *c.durs[i], 0);
                if (c.loc_pins[i] >= 0) os << " @ " << c.loc_pins[i];
            }
            os << "]";
            if (c.car_pin >= 0) os << " as cc" << c.car_pin;
            os << ";\n";
            break;
        }
        case CmdKind::Asgn:
        case CmdKind::Att: {
            os << pad << (c.kind == CmdKind::Asgn ? "asgn " : "att ") << c.task << " (";
            for (std::size_t i = 0; i < c.cars.size(); ++i) {
                if (i) os << ", ";
                os << to_string(*c.cars[i]);
            }
            os << ");\n";
            break;
        }
        case CmdKind::Free:
            os << pad << "free " << c.task << ".";
            print_index(os, *c.expr);
            os << ";\n";
            break;
        case CmdKind::Comp: os << pad << "comp " << c.task << ";\n"; break;
        case CmdKind::Add:
            os << pad << "add " << c.carvar << " ";
            print_expr(os, *c.expr, 2);
            if (c.add_pin >= 0) os << " @ " << c.add_pin;
            os << ";\n";
            break;
        case CmdKind::Exec1:
            os << pad << "exec1 " << c.task << ".";
            print_index(os, *c.expr);
            os << ";\n";
            break;
    }
}

}  // namespace

std::string to_string(const Expr& e) {
    std::ostringstream os;
    print_expr(os, e, 0);
    return os.str();
}

std::string to_string(const CarExpr& ce) {
    switch (ce.kind) {
        case CarExprKind::Null: return "null";
        case CarExprKind::Lit: return "cc" + std::to_string(ce.cc);
        case CarExprKind::Var: return ce.var;
        case CarExprKind::Index: {
            std::ostringstream os;
            os << ce.var << '.';
            print_index(os, *ce.index);
            return os.str();
        }
    }
    return "";
}

std::string to_string(const BoolExpr& be) {
    std::ostringstream os;
    switch (be.kind) {
        case BoolKind::True: os << "true"; break;
        case BoolKind::False: os << "false"; break;
        case BoolKind::Not:
            os << "not (" << to_string(*be.a) << ")";
            break;
        case BoolKind::And:
            os << "(" << to_string(*be.a) << " and " << to_string(*be.b) << ")";
            break;
        case BoolKind::Or:
            os << "(" << to_string(*be.a) << " or " << to_string(*be.b) << ")";
            break;
        case BoolKind::Eq: os << to_string(*be.l) << " = " << to_string(*be.r); break;
        case BoolKind::Le: os << to_string(*be.l) << " <= " << to_string(*be.r); break;
    }
    return os.str();
}

std::string print_program(const std::vector<CmdPtr>& program) {
    std::ostringstream os;
    for (const auto& c : program) print_block(os, c, 0);
    return os.str();
}

}  // namespace vsched::rhm
