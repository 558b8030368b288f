#include "cookiegate/session.hpp"

namespace cookiegate {

EnforcementSession::EnforcementSession(const SuffixRuleSet& rules, PolicyKind policy, PolicyOptions options)
    : rules_(&rules), policy_(policy), options_(options) {}

std::optional<Placement> EnforcementSession::apply_set_cookie(std::string_view header, const RequestContext& ctx,
                                                             const RequestDecision& decision, Instant now) {
    auto parsed = parse_set_cookie(header);
    if (!parsed) return std::nullopt;
    return jar_.store(*parsed, ctx.url, ctx.site, decision.set_cookie_action, *rules_, now);
}

std::size_t EnforcementSession::activate(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    cookiegate::activate(state_, third_party, site);
    return jar_.release_quarantine({third_party, site});
}

ClickAction EnforcementSession::click(const FrameContext& frame) {
    auto action = on_click(frame, state_, *rules_);
    if (action.reload()) jar_.release_quarantine({registrable_domain(frame.frame_origin, *rules_), frame.top_level_site});
    return action;
}

void EnforcementSession::whitelist_add(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    cookiegate::whitelist_add(state_, third_party, site);
    jar_.release_quarantine({third_party, site});
}

void EnforcementSession::whitelist_remove(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    cookiegate::whitelist_remove(state_, third_party, site);
}

}  // namespace cookiegate
