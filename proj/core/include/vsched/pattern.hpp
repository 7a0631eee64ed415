#pragma once

#include <compare>
#include <string>
#include <vector>

#include "vsched/scenario.hpp"
#include "vsched/verify.hpp"

namespace vsched {

// "At station `loc`, `earlier`'s work began before `later`'s."
struct PatternRelation {
    long long loc = 0;
    std::string earlier;
    std::string later;
    auto operator<=>(const PatternRelation&) const = default;
};

// Station-usage precedence extracted from a verified execution. Relations
// are sorted and duplicate-free; (loc, a, b) and (loc, b, a) never coexist
// because each station orders tasks by first acquisition. `stations` is a
// fingerprint of the scenario's station layout: patterns only compare
// within the same layout.
struct PriorityPattern {
    std::string stations;
    std::vector<PatternRelation> relations;
    bool operator==(const PriorityPattern&) const = default;
};

std::string station_fingerprint(const ScenarioConfig& scenario);

// Orders tasks at each station by their first allocation step in the
// report's occupancy stream, then emits every ordered pair.
PriorityPattern extract_pattern(const VerificationReport& report, const ScenarioConfig& scenario);

struct MatchResult {
    int mu_match = 0;  // relations present in both
    int mu_total = 0;  // relations in the historical pattern
};

// Throws ValidationError when the station fingerprints differ.
MatchResult match_patterns(const PriorityPattern& output, const PriorityPattern& historical);

PriorityPattern read_pattern(const std::string& text);
PriorityPattern read_pattern_file(const std::string& path);
std::string write_pattern(const PriorityPattern& pattern);
void write_pattern_file(const std::string& path, const PriorityPattern& pattern);

}  // namespace vsched
