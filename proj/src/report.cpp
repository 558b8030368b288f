#include "cookiegate/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cookiegate {

void ExposureRecorder::record(RequestLogEntry entry, bool consented) {
    if (entry.party == PartyClass::ThirdParty && entry.cookie_header) {
        SitePair pair{entry.request_domain, entry.site};
        if (!consented) report_.non_consented_pairs.insert(pair);
        report_.cookie_bearing_pairs.insert(std::move(pair));
    }
    report_.per_request_log.push_back(std::move(entry));
}

ExposureReport ExposureRecorder::report() const {
    ExposureReport out = report_;
    out.decision_latency = summarize_latency(latencies_);
    return out;
}

LatencySummary summarize_latency(std::vector<std::chrono::nanoseconds> samples) {
    LatencySummary s;
    s.samples = samples.size();
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    // Nearest-rank percentiles.
    auto rank = [&](double p) {
        auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(samples.size())));
        return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
    };
    s.median = rank(0.5);
    s.p99 = rank(0.99);
    return s;
}

namespace {

nlohmann::json pairs_json(const std::set<SitePair>& pairs) {
    auto arr = nlohmann::json::array();
    for (const auto& p : pairs) arr.push_back({{"third_party", p.third_party.value()}, {"site", p.site.value()}});
    return arr;
}

std::string csv_field(std::string_view v) {
    if (v.find_first_of(",\"\n") == std::string_view::npos) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

nlohmann::json to_json(const ExposureReport& report, bool with_latency) {
    nlohmann::json j;
    j["policy"] = to_string(report.policy);
    j["cookie_bearing_pairs"] = pairs_json(report.cookie_bearing_pairs);
    j["non_consented_pairs"] = pairs_json(report.non_consented_pairs);
    j["single_iframe_ad_risk_count"] = report.single_iframe_ad_risk_count;
    auto log = nlohmann::json::array();
    for (const auto& e : report.per_request_log) {
        log.push_back({{"url", e.url},
                       {"party", to_string(e.party)},
                       {"site", e.site.value()},
                       {"request_domain", e.request_domain.value()},
                       {"cookie_action", to_string(e.decision.cookie_action)},
                       {"set_cookie_action", to_string(e.decision.set_cookie_action)},
                       {"cookie_header", e.cookie_header ? nlohmann::json(*e.cookie_header) : nlohmann::json(nullptr)},
                       {"interaction_initiated", e.interaction_initiated}});
    }
    j["requests"] = std::move(log);
    if (with_latency) {
        j["decision_latency"] = {{"median_ns", report.decision_latency.median.count()},
                                 {"p99_ns", report.decision_latency.p99.count()},
                                 {"samples", report.decision_latency.samples}};
    }
    return j;
}

namespace {

template <class E, std::size_t N>
E enum_from(const nlohmann::json& j, const E (&values)[N]) {
    auto name = j.get<std::string>();
    for (auto v : values)
        if (to_string(v) == name) return v;
    throw std::invalid_argument("unknown value \"" + name + "\"");
}

std::set<SitePair> pairs_from_json(const nlohmann::json& arr) {
    std::set<SitePair> out;
    for (const auto& p : arr)
        out.insert({RegistrableDomain::dns(p.at("third_party").get<std::string>()),
                    RegistrableDomain::dns(p.at("site").get<std::string>())});
    return out;
}

}  // namespace

ExposureReport report_from_json(const nlohmann::json& j) {
    static constexpr PartyClass parties[] = {PartyClass::FirstParty, PartyClass::ThirdParty};
    static constexpr CookieAction cookie_actions[] = {CookieAction::Attach, CookieAction::Strip,
                                                      CookieAction::PassUnchanged};
    static constexpr SetCookieAction set_actions[] = {SetCookieAction::Accept, SetCookieAction::Quarantine,
                                                      SetCookieAction::Drop};
    ExposureReport r;
    r.policy = enum_from(j.at("policy"), kAllPolicies);
    r.cookie_bearing_pairs = pairs_from_json(j.at("cookie_bearing_pairs"));
    r.non_consented_pairs = pairs_from_json(j.at("non_consented_pairs"));
    r.single_iframe_ad_risk_count = j.at("single_iframe_ad_risk_count").get<std::size_t>();
    for (const auto& e : j.at("requests")) {
        RequestLogEntry entry;
        entry.url = e.at("url").get<std::string>();
        entry.party = enum_from(e.at("party"), parties);
        entry.site = RegistrableDomain::dns(e.at("site").get<std::string>());
        entry.request_domain = RegistrableDomain::dns(e.at("request_domain").get<std::string>());
        entry.decision = {enum_from(e.at("cookie_action"), cookie_actions),
                          enum_from(e.at("set_cookie_action"), set_actions)};
        if (!e.at("cookie_header").is_null()) entry.cookie_header = e.at("cookie_header").get<std::string>();
        entry.interaction_initiated = e.at("interaction_initiated").get<bool>();
        r.per_request_log.push_back(std::move(entry));
    }
    if (j.contains("decision_latency")) {
        const auto& l = j["decision_latency"];
        r.decision_latency = {std::chrono::nanoseconds(l.at("median_ns").get<std::int64_t>()),
                              std::chrono::nanoseconds(l.at("p99_ns").get<std::int64_t>()),
                              l.at("samples").get<std::size_t>()};
    }
    return r;
}

std::string to_csv(const ExposureReport& report) {
    std::ostringstream out;
    out << "policy,url,party,site,cookie_action,set_cookie_action,cookie_header,interaction_initiated\n";
    for (const auto& e : report.per_request_log) {
        out << to_string(report.policy) << ',' << csv_field(e.url) << ',' << to_string(e.party) << ','
            << csv_field(e.site.value()) << ',' << to_string(e.decision.cookie_action) << ','
            << to_string(e.decision.set_cookie_action) << ',' << csv_field(e.cookie_header.value_or("")) << ','
            << (e.interaction_initiated ? "true" : "false") << '\n';
    }
    return out.str();
}

}  // namespace cookiegate
