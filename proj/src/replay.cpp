#include "cookiegate/replay.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace cookiegate {

namespace {

using SteadyClock = std::chrono::steady_clock;

class Replayer {
public:
    Replayer(const SessionTrace& trace, PolicyKind policy, const SuffixRuleSet& rules, const PolicyOptions& options)
        : trace_(trace), rules_(rules), session_(rules, policy, options), recorder_(policy) {
        for (const auto& c : trace.initial_cookies) session_.jar().insert_active(c);
        for (const auto& w : trace.whitelist) {
            auto tp = registrable_domain(w.third_party, rules);
            auto site = registrable_domain(w.site, rules);
            if (tp != site) session_.whitelist_add(tp, site);
        }
    }

    ReplayOutcome run() {
        std::size_t next_page = 0, next_event = 0;
        const auto& pages = trace_.pages;
        const auto& events = trace_.events;
        while (next_page < pages.size() || next_event < events.size()) {
            bool page_first = next_event == events.size() ||
                              (next_page < pages.size() && pages[next_page].seq < events[next_event].seq);
            if (page_first)
                load_page(pages[next_page++]);
            else
                handle_click(events[next_event++]);
        }
        return {recorder_.report(), session_.jar(), session_.state(), clicks_};
    }

private:
    FrameContext frame_context(const TraceFrame& frame, const RegistrableDomain& site) const {
        return {frame.frame_id, frame.parent_frame_id, frame.depth, parse_url(frame.url)->host, site};
    }

    void load_page(const TracePage& page) {
        Instant now = trace_.time_of(page.seq);
        auto top = parse_url(page.top_level_url);
        auto site = registrable_domain(top->host, rules_);
        session_.record_visit(site);

        for (const auto& frame : page.frames) {
            if (frame.depth != 1) continue;
            if (classify(parse_url(frame.url)->host, site, rules_) == PartyClass::ThirdParty &&
                matches_ad_pattern(frame.url))
                recorder_.count_single_iframe_ad_risk();
        }

        for (const auto& req : page.requests) {
            RequestContext ctx;
            ctx.url = *parse_url(req.url);
            ctx.destination = req.destination;
            ctx.frame = frame_context(*page.find_frame(req.frame_id), site);
            ctx.site = site;
            process(req.url, ctx, req.set_cookies, now);
        }
    }

    void handle_click(const TraceEvent& ev) {
        const auto& page = trace_.pages[ev.page_index];
        auto site = registrable_domain(parse_url(page.top_level_url)->host, rules_);
        const auto& frame = *page.find_frame(ev.frame_id);
        auto fctx = frame_context(frame, site);

        ClickAction action;
        if (session_.policy() == PolicyKind::InteractionBased) action = session_.click(fctx);
        clicks_.push_back(action);
        if (!action.reload()) return;

        RequestContext ctx;
        ctx.url = *parse_url(frame.url);
        ctx.destination = Destination::Iframe;
        ctx.frame = fctx;
        ctx.site = site;
        ctx.interaction_initiated = true;
        process(frame.url, ctx, {}, trace_.time_of(ev.seq));
    }

    void process(const std::string& raw_url, const RequestContext& ctx, const std::vector<std::string>& set_cookies,
                 Instant now) {
        auto start = SteadyClock::now();
        auto decision = session_.decide(ctx);
        recorder_.record_latency(SteadyClock::now() - start);

        RequestLogEntry entry;
        entry.url = raw_url;
        entry.site = ctx.site;
        entry.request_domain = registrable_domain(ctx.url.host, rules_);
        entry.party = entry.request_domain == ctx.site ? PartyClass::FirstParty : PartyClass::ThirdParty;
        entry.decision = decision;
        entry.interaction_initiated = ctx.interaction_initiated;
        if (decision.cookie_action != CookieAction::Strip) entry.cookie_header = session_.jar().cookies_for(ctx.url, now);

        bool consented = ctx.interaction_initiated || session_.state().consented({entry.request_domain, ctx.site});
        recorder_.record(std::move(entry), consented);

        for (const auto& header : set_cookies) session_.apply_set_cookie(header, ctx, decision, now);
    }

    const SessionTrace& trace_;
    const SuffixRuleSet& rules_;
    EnforcementSession session_;
    ExposureRecorder recorder_;
    std::vector<ClickAction> clicks_;
};

bool is_subset(const std::set<SitePair>& a, const std::set<SitePair>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

ReplayOutcome replay(const SessionTrace& trace, PolicyKind policy, const SuffixRuleSet& rules,
                     const PolicyOptions& options) {
    return Replayer(trace, policy, rules, options).run();
}

bool matches_ad_pattern(std::string_view url) {
    static constexpr std::string_view patterns[] = {"/ads/", "/ad/", "bid", "doubleclick", "adserver", "banner"};
    std::string lower(url);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return std::any_of(std::begin(patterns), std::end(patterns),
                       [&](std::string_view p) { return lower.find(p) != std::string::npos; });
}

std::vector<RequestLogEntry> first_party_stream(const ExposureReport& report) {
    std::vector<RequestLogEntry> out;
    std::copy_if(report.per_request_log.begin(), report.per_request_log.end(), std::back_inserter(out),
                 [](const auto& e) { return e.party == PartyClass::FirstParty; });
    return out;
}

bool ComparisonTable::all_checks_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ExposureReport* ComparisonTable::row(PolicyKind p) const {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.policy == p; });
    return it == rows.end() ? nullptr : &*it;
}

ComparisonTable compare(const SessionTrace& trace, std::span<const PolicyKind> policies, const SuffixRuleSet& rules,
                        const PolicyOptions& options) {
    ComparisonTable table;
    for (auto p : policies) {
        if (!table.row(p)) table.rows.push_back(simulate(trace, p, rules, options));
    }

    const auto* accept = table.row(PolicyKind::AcceptAll);
    const auto* block = table.row(PolicyKind::BlockThirdParty);
    const auto* visited = table.row(PolicyKind::VisitedBased);
    const auto* interaction = table.row(PolicyKind::InteractionBased);
    if (block) {
        table.checks.push_back({"block-third attaches no third-party cookies", block->cookie_bearing_pairs.empty()});
        table.checks.push_back({"block-third has no non-consented pairs", block->non_consented_pairs.empty()});
    }
    if (interaction)
        table.checks.push_back({"interaction has no non-consented pairs", interaction->non_consented_pairs.empty()});
    if (visited && accept)
        table.checks.push_back({"visited within accept-all",
                                is_subset(visited->cookie_bearing_pairs, accept->cookie_bearing_pairs)});
    if (table.rows.size() > 1) {
        auto reference = first_party_stream(table.rows.front());
        bool same = std::all_of(table.rows.begin() + 1, table.rows.end(),
                                [&](const auto& r) { return first_party_stream(r) == reference; });
        table.checks.push_back({"first-party stream identical across policies", same});
    }
    return table;
}

nlohmann::json to_json(const ComparisonTable& table, bool with_latency) {
    nlohmann::json j;
    j["policies"] = nlohmann::json::array();
    for (const auto& r : table.rows) j["policies"].push_back(to_json(r, with_latency));
    j["checks"] = nlohmann::json::array();
    for (const auto& c : table.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}});
    return j;
}

std::string to_csv(const ComparisonTable& table, bool with_latency) {
    std::ostringstream out;
    out << "policy,requests,third_party_requests,stripped,cookie_bearing_pairs,non_consented_pairs,"
           "single_iframe_ad_risk";
    if (with_latency) out << ",latency_median_ns,latency_p99_ns";
    out << '\n';
    for (const auto& r : table.rows) {
        auto third = std::count_if(r.per_request_log.begin(), r.per_request_log.end(),
                                   [](const auto& e) { return e.party == PartyClass::ThirdParty; });
        auto stripped = std::count_if(r.per_request_log.begin(), r.per_request_log.end(),
                                      [](const auto& e) { return e.decision.cookie_action == CookieAction::Strip; });
        out << to_string(r.policy) << ',' << r.per_request_log.size() << ',' << third << ',' << stripped << ','
            << r.cookie_bearing_pairs.size() << ',' << r.non_consented_pairs.size() << ','
            << r.single_iframe_ad_risk_count;
        if (with_latency) out << ',' << r.decision_latency.median.count() << ',' << r.decision_latency.p99.count();
        out << '\n';
    }
    return out.str();
}

}  // namespace cookiegate
