#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cookiegate/cookie_jar.hpp"
#include "cookiegate/policy.hpp"

namespace cookiegate {

/// Consent state and cookie jar for one policy, wired together so that an
/// activation always releases the matching quarantine bucket.
class EnforcementSession {
public:
    EnforcementSession(const SuffixRuleSet& rules, PolicyKind policy, PolicyOptions options = {});

    RequestDecision decide(const RequestContext& ctx) const {
        return decide_request(ctx, state_, policy_, *rules_, options_);
    }

    /// Parses and stores one Set-Cookie header from the response to `ctx`.
    /// Unparseable headers are ignored (nullopt).
    std::optional<Placement> apply_set_cookie(std::string_view header, const RequestContext& ctx,
                                              const RequestDecision& decision, Instant now);

    /// Activates (third_party, site) and releases its quarantine bucket.
    /// Returns the number of released cookies.
    std::size_t activate(const RegistrableDomain& third_party, const RegistrableDomain& site);

    /// on_click plus quarantine release when the click activates the widget.
    ClickAction click(const FrameContext& frame);

    /// Whitelisting is standing consent, so it also releases the bucket.
    void whitelist_add(const RegistrableDomain& third_party, const RegistrableDomain& site);
    void whitelist_remove(const RegistrableDomain& third_party, const RegistrableDomain& site);
    void record_visit(const RegistrableDomain& site) { record_first_party_visit(state_, site); }

    const ActivationTable& state() const noexcept { return state_; }
    const CookieJar& jar() const noexcept { return jar_; }
    CookieJar& jar() noexcept { return jar_; }
    const SuffixRuleSet& rules() const noexcept { return *rules_; }
    PolicyKind policy() const noexcept { return policy_; }
    const PolicyOptions& options() const noexcept { return options_; }

private:
    const SuffixRuleSet* rules_;
    PolicyKind policy_;
    PolicyOptions options_;
    ActivationTable state_;
    CookieJar jar_;
};

}  // namespace cookiegate
