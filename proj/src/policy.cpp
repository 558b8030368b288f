#include "cookiegate/policy.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cookiegate {

std::string_view to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::AcceptAll: return "accept-all";
        case PolicyKind::BlockThirdParty: return "block-third";
        case PolicyKind::VisitedBased: return "visited";
        case PolicyKind::InteractionBased: return "interaction";
    }
    return "?";
}

std::optional<PolicyKind> parse_policy(std::string_view name) {
    for (auto p : kAllPolicies) {
        if (to_string(p) == name) return p;
    }
    return std::nullopt;
}

std::string_view to_string(Destination d) {
    switch (d) {
        case Destination::Document: return "document";
        case Destination::Iframe: return "iframe";
        case Destination::Subresource: return "subresource";
    }
    return "?";
}

std::optional<Destination> parse_destination(std::string_view name) {
    if (name == "document") return Destination::Document;
    if (name == "iframe") return Destination::Iframe;
    if (name == "subresource") return Destination::Subresource;
    return std::nullopt;
}

std::string_view to_string(CookieAction a) {
    switch (a) {
        case CookieAction::Attach: return "attach";
        case CookieAction::Strip: return "strip";
        case CookieAction::PassUnchanged: return "pass-unchanged";
    }
    return "?";
}

std::string_view to_string(FrameKind k) {
    switch (k) {
        case FrameKind::WidgetCandidate: return "widget";
        case FrameKind::AdvertisementCandidate: return "advertisement";
        case FrameKind::NonInteractive: return "non-interactive";
    }
    return "?";
}

FrameKind classify_frame(const FrameContext& frame, const SuffixRuleSet& rules) {
    if (frame.depth == 0 || classify(frame.frame_origin, frame.top_level_site, rules) == PartyClass::FirstParty)
        return FrameKind::NonInteractive;
    return frame.depth == 1 ? FrameKind::WidgetCandidate : FrameKind::AdvertisementCandidate;
}

RequestDecision decide_request(const RequestContext& ctx, const ActivationTable& state, PolicyKind policy,
                               const SuffixRuleSet& rules, const PolicyOptions& options) {
    auto third_party = registrable_domain(ctx.url.host, rules);
    if (third_party == ctx.site) return {CookieAction::PassUnchanged, SetCookieAction::Accept};

    constexpr RequestDecision allow{CookieAction::Attach, SetCookieAction::Accept};
    constexpr RequestDecision block{CookieAction::Strip, SetCookieAction::Drop};
    switch (policy) {
        case PolicyKind::AcceptAll: return allow;
        case PolicyKind::BlockThirdParty: return block;
        case PolicyKind::VisitedBased: return state.visited_first_party.contains(third_party) ? allow : block;
        case PolicyKind::InteractionBased:
            if (ctx.interaction_initiated || state.consented({third_party, ctx.site})) return allow;
            return {CookieAction::Strip,
                    options.drop_new_third_party_cookies ? SetCookieAction::Drop : SetCookieAction::Quarantine};
    }
    return block;
}

ClickAction on_click(const FrameContext& frame, ActivationTable& state, const SuffixRuleSet& rules) {
    if (classify_frame(frame, rules) != FrameKind::WidgetCandidate) return {};
    SitePair pair{registrable_domain(frame.frame_origin, rules), frame.top_level_site};
    if (state.consented(pair)) return {};
    state.activated.insert(std::move(pair));
    return {ClickAction::Kind::ReloadWithCookies, frame.frame_id};
}

namespace {

void require_distinct(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    if (third_party.empty() || site.empty()) throw std::invalid_argument("empty domain");
    if (third_party == site)
        throw std::invalid_argument("third party equals site (" + site.value() + "); first party needs no consent");
}

}  // namespace

void activate(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site) {
    require_distinct(third_party, site);
    state.activated.insert({third_party, site});
}

void whitelist_add(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site) {
    require_distinct(third_party, site);
    state.whitelist.insert({third_party, site});
}

void whitelist_remove(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site) {
    require_distinct(third_party, site);
    state.whitelist.erase({third_party, site});
}

void record_first_party_visit(ActivationTable& state, const RegistrableDomain& site) {
    state.visited_first_party.insert(site);
}

std::set<SitePair> load_whitelist(const std::string& path, const SuffixRuleSet& rules) {
    std::set<SitePair> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::ostringstream ss;
    ss << in.rdbuf();
    auto doc = nlohmann::json::parse(ss.str());
    if (!doc.is_array()) throw std::runtime_error(path + ": whitelist must be a JSON array");
    for (const auto& e : doc) {
        SitePair pair{registrable_domain(e.at("thirdParty").get<std::string>(), rules),
                      registrable_domain(e.at("site").get<std::string>(), rules)};
        require_distinct(pair.third_party, pair.site);
        out.insert(std::move(pair));
    }
    return out;
}

void save_whitelist(const std::string& path, const std::set<SitePair>& whitelist) {
    auto doc = nlohmann::json::array();
    for (const auto& p : whitelist) doc.push_back({{"thirdParty", p.third_party.value()}, {"site", p.site.value()}});
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace cookiegate
