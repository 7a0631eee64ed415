#include "vsched/scheme.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vsched {

IncompleteSchemeError::IncompleteSchemeError(std::vector<std::pair<int, int>> m)
    : ValidationError([&m] {
          std::ostringstream os;
          os << "scheme incomplete, missing (task,op):";
          for (const auto& [t, o] : m) os << " (" << t << "," << o << ")";
          return os.str();
      }()),
      missing(std::move(m)) {}

Slice makespan(const SchedulingScheme& scheme, const ScenarioConfig& scenario) {
    std::set<std::pair<int, int>> seen;
    Slice horizon = 0;
    for (const auto& r : scheme.records) {
        seen.insert({r.task, r.op});
        horizon = std::max(horizon, r.end);
    }
    std::vector<std::pair<int, int>> missing;
    for (int t = 0; t < static_cast<int>(scenario.tasks.size()); ++t)
        for (int o = 0; o < static_cast<int>(scenario.tasks[t].ops.size()); ++o)
            if (!seen.count({t, o})) missing.push_back({t, o});
    if (!missing.empty()) throw IncompleteSchemeError(std::move(missing));
    return horizon;
}

namespace {

std::string record_name(const SchemeRecord& r) {
    return "record task " + std::to_string(r.task) + " op " + std::to_string(r.op);
}

void check_disjoint(std::vector<const SchemeRecord*>& rs, const std::string& what) {
    std::sort(rs.begin(), rs.end(),
              [](const SchemeRecord* a, const SchemeRecord* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < rs.size(); ++i) {
        if (rs[i]->start < rs[i - 1]->end)
            throw ValidationError("scheme invariant violated: " + what + " used by overlapping records (" +
                                  record_name(*rs[i - 1]) + " and " + record_name(*rs[i]) + ")");
    }
}

}  // namespace

void validate_scheme(const SchedulingScheme& scheme, const ScenarioConfig& scenario) {
    scenario.validate();
    std::map<Location, std::vector<const SchemeRecord*>> by_station;
    std::map<int, std::vector<const SchemeRecord*>> by_car;
    std::map<int, std::map<int, const SchemeRecord*>> by_task;
    for (const auto& r : scheme.records) {
        if (r.task < 0 || r.task >= static_cast<int>(scenario.tasks.size()))
            throw ValidationError("scheme invariant violated: unknown task in " + record_name(r));
        const auto& ops = scenario.tasks[r.task].ops;
        if (r.op < 0 || r.op >= static_cast<int>(ops.size()))
            throw ValidationError("scheme invariant violated: unknown op in " + record_name(r));
        if (r.equipment != ops[r.op].equipment)
            throw ValidationError("scheme invariant violated: wrong equipment category in " + record_name(r));
        if (r.workstation < 0 || r.workstation >= scenario.equipment[r.equipment].workstations)
            throw ValidationError("scheme invariant violated: unknown workstation in " + record_name(r));
        if (r.car < 0 || r.car >= scenario.cars)
            throw ValidationError("scheme invariant violated: unknown car in " + record_name(r));
        if (r.end - r.start != ops[r.op].duration)
            throw ValidationError("scheme invariant violated: duration mismatch in " + record_name(r));
        if (r.start < 0)
            throw ValidationError("scheme invariant violated: negative start in " + record_name(r));
        if (by_task[r.task].count(r.op))
            throw ValidationError("scheme invariant violated: duplicate " + record_name(r));
        by_task[r.task][r.op] = &r;
        by_station[r.location()].push_back(&r);
        by_car[r.car].push_back(&r);
    }
    for (const auto& [task, ops] : by_task) {
        const SchemeRecord* prev = nullptr;
        for (const auto& [op, rec] : ops) {
            if (prev) {
                if (op != prev->op + 1)
                    throw ValidationError("scheme invariant violated: task " + std::to_string(task) +
                                          " skips op " + std::to_string(prev->op + 1));
                if (rec->start < prev->end)
                    throw ValidationError("scheme invariant violated: task " + std::to_string(task) +
                                          " op " + std::to_string(op) + " starts before op " +
                                          std::to_string(prev->op) + " ends");
            } else if (op != 0) {
                throw ValidationError("scheme invariant violated: task " + std::to_string(task) +
                                      " missing op 0 before op " + std::to_string(op));
            }
            prev = rec;
        }
    }
    for (auto& [loc, rs] : by_station)
        check_disjoint(rs, "station " + location_label(location_id(loc)));
    for (auto& [car, rs] : by_car) check_disjoint(rs, "car " + std::to_string(car));
}

SchedulingScheme read_scheme(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    SchedulingScheme s;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "task,op,equipment,workstation,car,start,end")
                throw ParseError(lineno, 1, "expected scheme header");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string field;
        long long v[7];
        for (int i = 0; i < 7; ++i) {
            if (!std::getline(ls, field, ','))
                throw ParseError(lineno, 1, "expected 7 comma-separated fields");
            try {
                v[i] = std::stoll(field);
            } catch (const std::exception&) {
                throw ParseError(lineno, 1, "non-numeric field '" + field + "'");
            }
        }
        if (std::getline(ls, field, ',')) throw ParseError(lineno, 1, "too many fields");
        s.records.push_back(SchemeRecord{static_cast<int>(v[0]), static_cast<int>(v[1]),
                                         static_cast<int>(v[2]), static_cast<int>(v[3]),
                                         static_cast<int>(v[4]), v[5], v[6]});
    }
    if (!header_seen) throw ParseError(1, 1, "expected scheme header");
    return s;
}

SchedulingScheme read_scheme_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scheme file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return read_scheme(ss.str());
}

std::string write_scheme(const SchedulingScheme& scheme) {
    SchedulingScheme sorted = scheme;
    std::sort(sorted.records.begin(), sorted.records.end(),
              [](const SchemeRecord& a, const SchemeRecord& b) {
                  return std::tie(a.start, a.task, a.op) < std::tie(b.start, b.task, b.op);
              });
    std::ostringstream os;
    os << "task,op,equipment,workstation,car,start,end\n";
    for (const auto& r : sorted.records)
        os << r.task << ',' << r.op << ',' << r.equipment << ',' << r.workstation << ',' << r.car
           << ',' << r.start << ',' << r.end << '\n';
    return os.str();
}

void write_scheme_file(const SchedulingScheme& scheme, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scheme file: " + path);
    out << write_scheme(scheme);
}

}  // namespace vsched
