#include "vsched/scenario.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vsched {

using nlohmann::json;

int ScenarioConfig::total_ops() const {
    int n = 0;
    for (const auto& t : tasks) n += static_cast<int>(t.ops.size());
    return n;
}

void ScenarioConfig::validate() const {
    if (cars < 1) throw ValidationError("scenario invariant violated: car count must be >= 1");
    if (equipment.empty())
        throw ValidationError("scenario invariant violated: equipment list must be non-empty");
    for (std::size_t e = 0; e < equipment.size(); ++e) {
        if (equipment[e].workstations < 1)
            throw ValidationError("scenario invariant violated: equipment " + std::to_string(e) +
                                  " workstation count must be >= 1");
        if (equipment[e].workstations > 10)
            throw ValidationError("scenario invariant violated: equipment " + std::to_string(e) +
                                  " workstation count must be <= 10 (station id encoding)");
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].ops.empty())
            throw ValidationError("scenario invariant violated: task " + std::to_string(t) +
                                  " operation list must be non-empty");
        for (std::size_t o = 0; o < tasks[t].ops.size(); ++o) {
            const auto& op = tasks[t].ops[o];
            if (op.equipment < 0 || op.equipment >= static_cast<int>(equipment.size()))
                throw ValidationError("scenario invariant violated: task " + std::to_string(t) +
                                      " op " + std::to_string(o) + " references unknown equipment " +
                                      std::to_string(op.equipment));
            if (op.duration < 1)
                throw ValidationError("scenario invariant violated: task " + std::to_string(t) +
                                      " op " + std::to_string(o) + " duration must be >= 1");
        }
    }
}

ScenarioConfig default_scenario(int n_tasks) {
    if (n_tasks < 0) throw ValidationError("scenario invariant violated: task count must be >= 0");
    ScenarioConfig s;
    s.cars = 3;
    s.seed = 42;
    for (int w : {2, 2, 2, 1, 2}) s.equipment.push_back(Equipment{w});
    for (int t = 0; t < n_tasks; ++t) {
        Task task;
        for (int o = 0; o < 5; ++o) {
            std::uint64_t h = splitmix64(0x5eedba5eULL ^ (static_cast<std::uint64_t>(t) * 1000003ULL) ^
                                         (static_cast<std::uint64_t>(o) * 7919ULL));
            task.ops.push_back(Operation{o, static_cast<Slice>(1 + h % 9)});
        }
        s.tasks.push_back(std::move(task));
    }
    s.validate();
    return s;
}

namespace {

// Convert a byte offset reported by the JSON parser into line/col.
std::pair<int, int> offset_to_line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

json require_field(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("scenario field missing: ") + key);
    return j.at(key);
}

}  // namespace

ScenarioConfig load_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = offset_to_line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(line, col, e.what());
    }
    ScenarioConfig s;
    s.cars = require_field(j, "cars").get<int>();
    s.seed = require_field(j, "seed").get<std::uint64_t>();
    for (const auto& je : require_field(j, "equipment")) {
        s.equipment.push_back(Equipment{require_field(je, "workstations").get<int>()});
    }
    for (const auto& jt : require_field(j, "tasks")) {
        Task t;
        for (const auto& jo : require_field(jt, "ops")) {
            t.ops.push_back(Operation{require_field(jo, "equipment").get<int>(),
                                      require_field(jo, "duration").get<Slice>()});
        }
        s.tasks.push_back(std::move(t));
    }
    s.validate();
    return s;
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

std::string save_scenario(const ScenarioConfig& s) {
    json j;
    j["cars"] = s.cars;
    j["seed"] = s.seed;
    j["equipment"] = json::array();
    for (const auto& e : s.equipment) j["equipment"].push_back({{"workstations", e.workstations}});
    j["tasks"] = json::array();
    for (const auto& t : s.tasks) {
        json jops = json::array();
        for (const auto& o : t.ops) jops.push_back({{"equipment", o.equipment}, {"duration", o.duration}});
        j["tasks"].push_back({{"ops", jops}});
    }
    return j.dump(2) + "\n";
}

void save_scenario_file(const ScenarioConfig& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scenario file: " + path);
    out << save_scenario(s);
}

}  // namespace vsched
