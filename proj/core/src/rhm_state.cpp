#include "vsched/rhm/state.hpp"

#include <set>
#include <sstream>

namespace vsched::rhm {

std::string to_string(const TaskValue& v) {
    switch (v.kind) {
        case TaskValue::Kind::Null: return "null";
        case TaskValue::Kind::Fin: return "fin";
        case TaskValue::Kind::Cars: {
            std::ostringstream os;
            os << '(';
            for (std::size_t i = 0; i < v.cars.size(); ++i) {
                if (i) os << ',';
                os << "cc" << v.cars[i];
            }
            os << ')';
            return os.str();
        }
    }
    return "";
}

std::string MachineState::to_string() const {
    std::ostringstream os;
    os << "s_T{";
    bool first = true;
    for (const auto& [k, v] : s_T) os << (first ? (first = false, "") : ", ") << k << ":" << rhm::to_string(v);
    os << "} s_C{";
    first = true;
    for (const auto& [k, v] : s_C) os << (first ? (first = false, "") : ", ") << k << ":cc" << v;
    os << "} s_L{";
    first = true;
    for (const auto& [k, v] : s_L) os << (first ? (first = false, "") : ", ") << k << ":" << v;
    os << "} h_C{";
    first = true;
    for (const auto& [cc, locs] : h_C) {
        os << (first ? (first = false, "") : ", ") << "cc" << cc << ":(";
        for (std::size_t i = 0; i < locs.size(); ++i) os << (i ? "," : "") << "loc" << locs[i];
        os << ')';
    }
    os << "} h_L{";
    first = true;
    for (const auto& [loc, d] : h_L) os << (first ? (first = false, "") : ", ") << "loc" << loc << ":" << d;
    os << "}";
    return os.str();
}

std::optional<std::string> MachineState::separation_violation() const {
    std::set<long long> seen;
    for (const auto& [cc, locs] : h_C) {
        for (long long loc : locs) {
            if (!seen.insert(loc).second)
                return "location loc" + std::to_string(loc) + " held by two car resources";
            if (!h_L.count(loc))
                return "location loc" + std::to_string(loc) + " held by cc" + std::to_string(cc) +
                       " but absent from h_L";
        }
    }
    return std::nullopt;
}

Eval<long long> eval_expr(const Expr& e, const MachineState& st) {
    using E = Eval<long long>;
    switch (e.kind) {
        case ExprKind::Lit: return E::success(e.lit);
        case ExprKind::Var: {
            auto it = st.s_L.find(e.name);
            if (it == st.s_L.end()) return E::fail("unbound variable " + e.name);
            return E::success(it->second);
        }
        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul: {
            auto l = eval_expr(*e.lhs, st);
            if (!l.ok()) return l;
            auto r = eval_expr(*e.rhs, st);
            if (!r.ok()) return r;
            long long a = *l.value, b = *r.value;
            return E::success(e.kind == ExprKind::Add ? a + b : e.kind == ExprKind::Sub ? a - b : a * b);
        }
        case ExprKind::CarLen: {
            auto cc = eval_car(*e.car, st);
            if (!cc.ok()) return E::fail(cc.error);
            auto it = st.h_C.find(*cc.value);
            if (it == st.h_C.end())
                return E::fail("car resource cc" + std::to_string(*cc.value) + " not allocated");
            return E::success(static_cast<long long>(it->second.size()));
        }
        case ExprKind::TaskLen: {
            auto it = st.s_T.find(e.name);
            if (it == st.s_T.end()) return E::fail("unbound task variable " + e.name);
            long long total = 0;
            if (it->second.is_cars())
                for (long long cc : it->second.cars) {
                    auto h = st.h_C.find(cc);
                    if (h != st.h_C.end()) total += static_cast<long long>(h->second.size());
                }
            return E::success(total);
        }
    }
    return E::fail("malformed expression");
}

Eval<long long> eval_car(const CarExpr& ce, const MachineState& st) {
    using E = Eval<long long>;
    switch (ce.kind) {
        case CarExprKind::Null: return E::fail("null car expression used where a car is required");
        case CarExprKind::Lit: return E::success(ce.cc);
        case CarExprKind::Var: {
            auto it = st.s_C.find(ce.var);
            if (it == st.s_C.end()) return E::fail("unbound car variable " + ce.var);
            return E::success(it->second);
        }
        case CarExprKind::Index: {
            auto it = st.s_T.find(ce.var);
            if (it == st.s_T.end()) return E::fail("unbound task variable " + ce.var);
            if (!it->second.is_cars())
                return E::fail("task " + ce.var + " holds no car sequence");
            auto idx = eval_expr(*ce.index, st);
            if (!idx.ok()) return idx;
            long long i = *idx.value;
            if (i < 0 || i >= static_cast<long long>(it->second.cars.size()))
                return E::fail("car index " + std::to_string(i) + " out of range for task " + ce.var);
            return E::success(it->second.cars[static_cast<std::size_t>(i)]);
        }
    }
    return E::fail("malformed car expression");
}

Eval<TaskValue> eval_task(const TaskExpr& te, const MachineState& st) {
    using E = Eval<TaskValue>;
    switch (te.kind) {
        case TaskExprKind::Null: return E::success(TaskValue::null());
        case TaskExprKind::Fin: return E::success(TaskValue::fin());
        case TaskExprKind::Var: {
            auto it = st.s_T.find(te.var);
            if (it == st.s_T.end()) return E::fail("unbound task variable " + te.var);
            return E::success(it->second);
        }
        case TaskExprKind::Append: {
            auto base = eval_task(*te.a, st);
            if (!base.ok()) return base;
            if (base.value->is_fin()) return E::fail("cannot append a car to a finished task");
            auto cc = eval_car(*te.car, st);
            if (!cc.ok()) return E::fail(cc.error);
            std::vector<long long> cars = base.value->cars;
            cars.push_back(*cc.value);
            return E::success(TaskValue::of_cars(std::move(cars)));
        }
        case TaskExprKind::Concat: {
            auto a = eval_task(*te.a, st);
            if (!a.ok()) return a;
            auto b = eval_task(*te.b, st);
            if (!b.ok()) return b;
            if (a.value->is_fin() || b.value->is_fin())
                return E::fail("cannot concatenate a finished task");
            std::vector<long long> cars = a.value->cars;
            cars.insert(cars.end(), b.value->cars.begin(), b.value->cars.end());
            if (cars.empty()) return E::success(TaskValue::null());
            return E::success(TaskValue::of_cars(std::move(cars)));
        }
    }
    return E::fail("malformed task expression");
}

Eval<bool> eval_bool(const BoolExpr& be, const MachineState& st) {
    using E = Eval<bool>;
    switch (be.kind) {
        case BoolKind::True: return E::success(true);
        case BoolKind::False: return E::success(false);
        case BoolKind::Not: {
            auto a = eval_bool(*be.a, st);
            if (!a.ok()) return a;
            return E::success(!*a.value);
        }
        case BoolKind::And:
        case BoolKind::Or: {
            auto a = eval_bool(*be.a, st);
            if (!a.ok()) return a;
            auto b = eval_bool(*be.b, st);
            if (!b.ok()) return b;
            return E::success(be.kind == BoolKind::And ? (*a.value && *b.value) : (*a.value || *b.value));
        }
        case BoolKind::Eq:
        case BoolKind::Le: {
            auto l = eval_expr(*be.l, st);
            if (!l.ok()) return E::fail(l.error);
            auto r = eval_expr(*be.r, st);
            if (!r.ok()) return E::fail(r.error);
            return E::success(be.kind == BoolKind::Eq ? (*l.value == *r.value) : (*l.value <= *r.value));
        }
    }
    return E::fail("malformed boolean expression");
}

}  // namespace vsched::rhm
