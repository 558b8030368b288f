#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cookiegate/report.hpp"
#include "cookiegate/session.hpp"
#include "cookiegate/trace.hpp"

namespace cookiegate {

/// Everything a replay produced, for callers that need more than the report.
struct ReplayOutcome {
    ExposureReport report;
    CookieJar final_jar;
    ActivationTable final_state;
    std::vector<ClickAction> clicks;  // one per click event, in order
};

ReplayOutcome replay(const SessionTrace& trace, PolicyKind policy, const SuffixRuleSet& rules,
                     const PolicyOptions& options = {});

inline ExposureReport simulate(const SessionTrace& trace, PolicyKind policy, const SuffixRuleSet& rules,
                               const PolicyOptions& options = {}) {
    return replay(trace, policy, rules, options).report;
}

/// Depth-1 third-party frames whose URL looks like an ad slot. Reporting aid
/// only; it never changes a decision.
bool matches_ad_pattern(std::string_view url);

struct DominanceCheck {
    std::string name;
    bool passed = false;
};

struct ComparisonTable {
    std::vector<ExposureReport> rows;
    std::vector<DominanceCheck> checks;  // only checks whose policies were run

    bool all_checks_pass() const;
    const ExposureReport* row(PolicyKind p) const;
};

ComparisonTable compare(const SessionTrace& trace, std::span<const PolicyKind> policies, const SuffixRuleSet& rules,
                        const PolicyOptions& options = {});

/// Entries of the per-request log that went to the first party.
std::vector<RequestLogEntry> first_party_stream(const ExposureReport& report);

nlohmann::json to_json(const ComparisonTable& table, bool with_latency = false);
/// One summary row per policy.
std::string to_csv(const ComparisonTable& table, bool with_latency = false);

}  // namespace cookiegate
