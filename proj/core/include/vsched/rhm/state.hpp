#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsched/rhm/ast.hpp"

namespace vsched::rhm {

// A task store value: unbound variables are simply absent from s_T.
struct TaskValue {
    enum class Kind { Null, Fin, Cars };
    Kind kind = Kind::Null;
    std::vector<long long> cars;  // non-empty iff kind == Cars

    static TaskValue null() { return {}; }
    static TaskValue fin() { return {Kind::Fin, {}}; }
    static TaskValue of_cars(std::vector<long long> cs) { return {Kind::Cars, std::move(cs)}; }

    bool is_null() const { return kind == Kind::Null; }
    bool is_fin() const { return kind == Kind::Fin; }
    bool is_cars() const { return kind == Kind::Cars; }
    bool operator==(const TaskValue&) const = default;
};

std::string to_string(const TaskValue& v);

struct MachineState {
    std::map<std::string, TaskValue> s_T;       // task variables
    std::map<std::string, long long> s_C;       // car variables -> car resource id
    std::map<std::string, long long> s_L;       // arithmetic and location variables
    std::map<long long, std::vector<long long>> h_C;  // car resource -> location sequence
    std::map<long long, long long> h_L;         // location resource -> duration

    bool operator==(const MachineState&) const = default;
    std::string to_string() const;

    // Separation discipline: distinct car resources hold disjoint location
    // sequences and every held location is present in h_L. Returns the
    // violated condition, or nullopt when the state is well-formed.
    std::optional<std::string> separation_violation() const;
};

// Expression evaluation is total on states binding every mentioned variable;
// failures carry the reason that also becomes the Stuck verdict when they
// surface during a step.
template <typename T>
struct Eval {
    std::optional<T> value;
    std::string error;

    bool ok() const { return value.has_value(); }
    static Eval success(T v) { return {std::move(v), {}}; }
    static Eval fail(std::string e) { return {std::nullopt, std::move(e)}; }
};

Eval<long long> eval_expr(const Expr& e, const MachineState& st);
Eval<long long> eval_car(const CarExpr& ce, const MachineState& st);  // -> car resource id
Eval<TaskValue> eval_task(const TaskExpr& te, const MachineState& st);
Eval<bool> eval_bool(const BoolExpr& be, const MachineState& st);

}  // namespace vsched::rhm
