#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cookiegate/policy.hpp"

namespace cookiegate {

struct RequestLogEntry {
    std::string url;
    PartyClass party = PartyClass::FirstParty;
    RegistrableDomain site;
    RegistrableDomain request_domain;
    RequestDecision decision;
    std::optional<std::string> cookie_header;  // what went out, nullopt if none
    bool interaction_initiated = false;

    friend bool operator==(const RequestLogEntry&, const RequestLogEntry&) = default;
};

struct LatencySummary {
    std::chrono::nanoseconds median{0};
    std::chrono::nanoseconds p99{0};
    std::size_t samples = 0;
};

/// Tracking exposure of one policy over one request stream.
struct ExposureReport {
    PolicyKind policy = PolicyKind::AcceptAll;
    std::set<SitePair> cookie_bearing_pairs;
    std::set<SitePair> non_consented_pairs;  // subset of cookie_bearing_pairs
    std::vector<RequestLogEntry> per_request_log;
    std::size_t single_iframe_ad_risk_count = 0;
    LatencySummary decision_latency;  // wall time; not part of equality

    friend bool operator==(const ExposureReport& a, const ExposureReport& b) {
        return a.policy == b.policy && a.cookie_bearing_pairs == b.cookie_bearing_pairs &&
               a.non_consented_pairs == b.non_consented_pairs && a.per_request_log == b.per_request_log &&
               a.single_iframe_ad_risk_count == b.single_iframe_ad_risk_count;
    }
};

/// Builds an ExposureReport incrementally from observed requests.
class ExposureRecorder {
public:
    explicit ExposureRecorder(PolicyKind policy) { report_.policy = policy; }

    /// `consented` is whether activation, whitelist or an interaction-initiated
    /// reload preceded the request.
    void record(RequestLogEntry entry, bool consented);
    void record_latency(std::chrono::nanoseconds sample) { latencies_.push_back(sample); }
    void count_single_iframe_ad_risk() { ++report_.single_iframe_ad_risk_count; }

    /// Snapshot with latency percentiles filled in.
    ExposureReport report() const;

private:
    ExposureReport report_;
    std::vector<std::chrono::nanoseconds> latencies_;
};

LatencySummary summarize_latency(std::vector<std::chrono::nanoseconds> samples);

nlohmann::json to_json(const ExposureReport& report, bool with_latency = false);
/// Inverse of to_json. Throws nlohmann::json::exception or
/// std::invalid_argument on malformed input.
ExposureReport report_from_json(const nlohmann::json& j);
/// Per-request log as CSV with a header row.
std::string to_csv(const ExposureReport& report);

}  // namespace cookiegate
