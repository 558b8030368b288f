#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cookiegate/report.hpp"
#include "cookiegate/session.hpp"

namespace cookiegate {

class StartupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HostPort {
    std::string host;
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
    friend bool operator==(const HostPort&, const HostPort&) = default;
};

/// "host:port", "[v6]:port" or ":port" (binds 127.0.0.1).
std::optional<HostPort> parse_host_port(std::string_view text);

struct ProxyConfig {
    std::string listen_address = "127.0.0.1:8080";
    std::string control_address = "127.0.0.1:8081";
    PolicyKind policy = PolicyKind::InteractionBased;
    std::string suffix_list_path;  // empty: bundled snapshot
    std::string whitelist_path = "whitelist.json";
    std::string jar_persistence_path;  // empty: no jar persistence
    bool drop_new_third_party_cookies = false;
    bool tls_intercept = false;
};

/// Reads the JSON config file. Unknown keys are rejected.
ProxyConfig load_config_file(const std::string& path);
ProxyConfig config_from_json(const nlohmann::json& j, ProxyConfig base = {});
/// COOKIEGATE_LISTEN / COOKIEGATE_CONTROL override the listen addresses.
void apply_env_overrides(ProxyConfig& config, const std::function<const char*(const char*)>& getenv_fn);
/// Throws StartupError on an invalid combination.
void validate(const ProxyConfig& config);

using HeaderList = std::vector<std::pair<std::string, std::string>>;

std::optional<std::string> find_header(const HeaderList& headers, std::string_view name);
void remove_header(HeaderList& headers, std::string_view name);

enum class ThirdPartyState { Blocked, Activated, Whitelisted };
enum class CookieStatus { None, Quarantined, HasCookies };

std::string_view to_string(ThirdPartyState s);
std::string_view to_string(CookieStatus s);

struct ThirdPartyView {
    RegistrableDomain domain;
    FrameKind frame_kind = FrameKind::NonInteractive;
    ThirdPartyState state = ThirdPartyState::Blocked;
    CookieStatus cookie_status = CookieStatus::None;
    std::size_t request_count = 0;
};

/// Third parties seen under one top-level site.
struct SiteView {
    RegistrableDomain site;
    std::vector<ThirdPartyView> third_parties;
};

nlohmann::json to_json(const SiteView& view);

/// A request after policy evaluation, ready to be sent upstream.
struct PreparedRequest {
    RequestContext ctx;
    RequestDecision decision;
    HeaderList headers;  // outgoing headers, in client order
    std::optional<std::string> frame_id;  // set when this request loads an iframe
};

/// Result of releasing a frame for reload.
struct ReloadPlan {
    PreparedRequest request;
    std::size_t released = 0;
};

/// Proxy-side policy state: enforcement session, per-client frame registry
/// used to attribute requests to a top-level site, per-site statistics and the
/// live exposure report. No sockets; all methods are thread-safe and mutations
/// are serialized through one mutex.
class ProxyCore {
public:
    ProxyCore(SuffixRuleSet rules, PolicyKind policy, PolicyOptions options = {});

    /// Builds the request context, decides and rewrites the Cookie header.
    /// `client` identifies the downstream client (its address).
    PreparedRequest prepare(const std::string& method, const Url& url, const HeaderList& incoming,
                            const std::string& client, Instant now);

    /// Routes Set-Cookie headers of the upstream response and returns the
    /// header list to deliver downstream.
    HeaderList finish(const PreparedRequest& prepared, const HeaderList& response_headers, Instant now);

    /// Releases the quarantine of the frame's (third party, site) pair and
    /// prepares an interaction-initiated reload of its document. nullopt for an
    /// unknown frame.
    std::optional<ReloadPlan> plan_reload(const std::string& frame_id, Instant now);

    std::size_t activate(const RegistrableDomain& third_party, const RegistrableDomain& site);
    void whitelist_add(const RegistrableDomain& third_party, const RegistrableDomain& site);
    void whitelist_remove(const RegistrableDomain& third_party, const RegistrableDomain& site);
    void seed_whitelist(const std::set<SitePair>& pairs);
    void seed_jar(CookieJar jar);

    std::vector<RegistrableDomain> sites() const;
    std::optional<SiteView> site_view(const RegistrableDomain& site, Instant now) const;
    /// Frames loaded for (third party, site), in load order.
    std::vector<std::string> frames_for(const SitePair& pair) const;
    ExposureReport report() const;
    std::set<SitePair> whitelist() const;
    CookieJar jar() const;
    ActivationTable state() const;

    const SuffixRuleSet& rules() const noexcept { return rules_; }
    PolicyKind policy() const noexcept { return policy_; }

private:
    struct FrameRecord {
        std::string frame_id;
        std::optional<std::string> parent_frame_id;
        std::string url;
        unsigned depth = 0;
        RegistrableDomain site;
    };
    struct Attribution {
        Destination destination = Destination::Subresource;
        FrameContext frame;
    };
    struct ThirdPartyStats {
        FrameKind kind = FrameKind::NonInteractive;
        std::size_t requests = 0;
    };

    Attribution attribute(const Url& url, const HeaderList& headers, const std::string& client);
    void remember_document(const std::string& client, const FrameRecord& record);
    PreparedRequest decide_locked(RequestContext ctx, HeaderList headers, Instant now);

    SuffixRuleSet rules_;
    PolicyKind policy_;

    mutable std::mutex mutex_;
    EnforcementSession session_;
    ExposureRecorder recorder_;
    std::map<std::string, std::map<std::string, FrameRecord>> documents_;  // client -> url -> frame
    std::map<std::string, std::deque<std::string>> document_order_;
    std::map<std::string, FrameRecord> frames_;  // frame_id -> record
    std::map<RegistrableDomain, std::map<RegistrableDomain, ThirdPartyStats>> stats_;
    std::uint64_t next_frame_ = 1;
};

}  // namespace cookiegate
