#include "vsched/pattern.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vsched {

std::string station_fingerprint(const ScenarioConfig& scenario) {
    std::ostringstream os;
    os << "stations=";
    for (size_t e = 0; e < scenario.equipment.size(); ++e) {
        if (e) os << ",";
        os << scenario.equipment[e].workstations;
    }
    return os.str();
}

PriorityPattern extract_pattern(const VerificationReport& report, const ScenarioConfig& scenario) {
    // First acquisition order per station, deduplicated per task.
    std::map<long long, std::vector<std::string>> order;
    for (const OccupancyEvent& e : report.occupancy) {
        if (!e.allocate) continue;
        auto& seq = order[e.loc];
        if (std::find(seq.begin(), seq.end(), e.task) == seq.end()) seq.push_back(e.task);
    }
    PriorityPattern p;
    p.stations = station_fingerprint(scenario);
    for (const auto& [loc, seq] : order)
        for (size_t i = 0; i < seq.size(); ++i)
            for (size_t j = i + 1; j < seq.size(); ++j)
                p.relations.push_back(PatternRelation{loc, seq[i], seq[j]});
    std::sort(p.relations.begin(), p.relations.end());
    return p;
}

MatchResult match_patterns(const PriorityPattern& output, const PriorityPattern& historical) {
    if (output.stations != historical.stations)
        throw ValidationError("pattern station layouts differ: \"" + output.stations +
                              "\" vs \"" + historical.stations + "\"");
    MatchResult m;
    m.mu_total = static_cast<int>(historical.relations.size());
    std::set<PatternRelation> hist(historical.relations.begin(), historical.relations.end());
    std::set<PatternRelation> seen;
    for (const PatternRelation& r : output.relations)
        if (hist.count(r) && seen.insert(r).second) ++m.mu_match;
    return m;
}

PriorityPattern read_pattern(const std::string& text) {
    PriorityPattern p;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::set<PatternRelation> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "stations=";
            auto pos = line.find(key);
            if (pos != std::string::npos) {
                std::string v = line.substr(pos);
                while (!v.empty() && (v.back() == ' ' || v.back() == '\r')) v.pop_back();
                p.stations = v;
            }
            continue;
        }
        std::istringstream ls(line);
        std::string loc, a, b, extra;
        if (!(ls >> loc >> a >> b) || (ls >> extra))
            throw ParseError(lineno, 1, "expected \"locN taskA taskB\"");
        if (loc.rfind("loc", 0) != 0)
            throw ParseError(lineno, 1, "station must be written locN, got \"" + loc + "\"");
        long long id = 0;
        try {
            id = std::stoll(loc.substr(3));
        } catch (const std::exception&) {
            throw ParseError(lineno, 1, "bad station id in \"" + loc + "\"");
        }
        PatternRelation r{id, a, b};
        if (seen.count(PatternRelation{id, b, a}))
            throw ParseError(lineno, 1, "contradictory relation: both orders of " + a +
                                         " and " + b + " at " + loc);
        if (seen.insert(r).second) p.relations.push_back(r);
    }
    std::sort(p.relations.begin(), p.relations.end());
    return p;
}

PriorityPattern read_pattern_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return read_pattern(ss.str());
}

std::string write_pattern(const PriorityPattern& p) {
    std::ostringstream os;
    os << "# priority pattern; " << (p.stations.empty() ? "stations=?" : p.stations) << "\n";
    std::vector<PatternRelation> rel = p.relations;
    std::sort(rel.begin(), rel.end());
    for (const PatternRelation& r : rel)
        os << location_label(r.loc) << " " << r.earlier << " " << r.later << "\n";
    return os.str();
}

void write_pattern_file(const std::string& path, const PriorityPattern& p) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << write_pattern(p);
}

}  // namespace vsched
