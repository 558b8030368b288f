#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "cookiegate/cookie_jar.hpp"
#include "cookiegate/party.hpp"
#include "cookiegate/url.hpp"

namespace cookiegate {

enum class PolicyKind { AcceptAll, BlockThirdParty, VisitedBased, InteractionBased };

inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::AcceptAll, PolicyKind::BlockThirdParty,
                                              PolicyKind::VisitedBased, PolicyKind::InteractionBased};

/// "accept-all" | "block-third" | "visited" | "interaction"
std::string_view to_string(PolicyKind p);
std::optional<PolicyKind> parse_policy(std::string_view name);

enum class Destination { Document, Iframe, Subresource };

std::string_view to_string(Destination d);
std::optional<Destination> parse_destination(std::string_view name);

/// Position of a frame in the page's frame tree. depth 0 is the top-level
/// document and is the only frame without a parent.
struct FrameContext {
    std::string frame_id;
    std::optional<std::string> parent_frame_id;
    unsigned depth = 0;
    std::string frame_origin;  // host the frame document was loaded from
    RegistrableDomain top_level_site;
};

struct RequestContext {
    std::string method = "GET";
    Url url;
    Destination destination = Destination::Subresource;
    FrameContext frame;
    RegistrableDomain site;
    /// Set only when executing a ReloadWithCookies directive, never from
    /// anything the client sends.
    bool interaction_initiated = false;
};

/// Per-session consent state.
struct ActivationTable {
    std::set<SitePair> activated;
    std::set<SitePair> whitelist;
    std::set<RegistrableDomain> visited_first_party;

    bool consented(const SitePair& pair) const { return activated.contains(pair) || whitelist.contains(pair); }
};

enum class CookieAction { Attach, Strip, PassUnchanged };

std::string_view to_string(CookieAction a);

struct RequestDecision {
    CookieAction cookie_action = CookieAction::PassUnchanged;
    SetCookieAction set_cookie_action = SetCookieAction::Accept;

    friend bool operator==(const RequestDecision&, const RequestDecision&) = default;
};

struct ClickAction {
    enum class Kind { ReloadWithCookies, PassThrough };
    Kind kind = Kind::PassThrough;
    std::string frame_id;  // set for ReloadWithCookies

    bool reload() const noexcept { return kind == Kind::ReloadWithCookies; }
    friend bool operator==(const ClickAction&, const ClickAction&) = default;
};

enum class FrameKind { WidgetCandidate, AdvertisementCandidate, NonInteractive };

std::string_view to_string(FrameKind k);

struct PolicyOptions {
    /// Refuse third-party Set-Cookie outright instead of quarantining it.
    bool drop_new_third_party_cookies = false;
};

/// Widget vs advertisement heuristic: a third-party frame directly under the
/// top-level document is a widget candidate, anything nested deeper is
/// treated as an ad (auction chains nest iframes).
FrameKind classify_frame(const FrameContext& frame, const SuffixRuleSet& rules);

RequestDecision decide_request(const RequestContext& ctx, const ActivationTable& state, PolicyKind policy,
                               const SuffixRuleSet& rules, const PolicyOptions& options = {});

/// Two-click control. The first click on a blocked widget activates
/// (third party, site) and asks for a reload; every other click passes through.
ClickAction on_click(const FrameContext& frame, ActivationTable& state, const SuffixRuleSet& rules);

/// Throws std::invalid_argument when third_party == site.
void activate(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site);
void whitelist_add(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site);
void whitelist_remove(ActivationTable& state, const RegistrableDomain& third_party, const RegistrableDomain& site);
void record_first_party_visit(ActivationTable& state, const RegistrableDomain& site);

/// Whitelist file: JSON array of {"thirdParty", "site"}. Missing file is empty.
std::set<SitePair> load_whitelist(const std::string& path, const SuffixRuleSet& rules);
void save_whitelist(const std::string& path, const std::set<SitePair>& whitelist);

}  // namespace cookiegate
