#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>

#include <json.hpp>

#include "cookiegate/cookie.hpp"
#include "cookiegate/party.hpp"
#include "cookiegate/url.hpp"

namespace cookiegate {

/// What happens to a Set-Cookie header on a response.
enum class SetCookieAction { Accept, Quarantine, Drop };

std::string_view to_string(SetCookieAction a);

/// Quarantine bucket: cookies set by `third_party` while the user was on `site`.
using QuarantineKey = SitePair;

struct CookieKey {
    std::string domain;
    std::string path;
    std::string name;

    friend auto operator<=>(const CookieKey&, const CookieKey&) = default;
};

CookieKey key_of(const Cookie& c);

struct Placement {
    enum class Kind { Active, Quarantined, Dropped, Expired, Rejected };
    Kind kind = Kind::Dropped;
    std::string reason;                 // set for Rejected
    std::optional<QuarantineKey> bucket;  // set for Quarantined

    friend bool operator==(const Placement&, const Placement&) = default;
};

std::string_view to_string(Placement::Kind k);

/// Cookie store with a quarantine area for third-party cookies that have not
/// been released by a user activation. Not internally synchronized: one
/// writer at a time, readers only between mutations.
class CookieJar {
public:
    using Store = std::map<CookieKey, Cookie>;

    /// Binds `set_cookie` to the response that carried it and places it per
    /// `action`. Cookies whose Domain does not domain-match the response host,
    /// or that name a public suffix, are rejected without touching the jar.
    Placement store(const SetCookie& set_cookie, const Url& response_url, const RegistrableDomain& site,
                    SetCookieAction action, const SuffixRuleSet& rules, Instant now);

    /// Inserts an already-bound cookie into the active store (used for seeding
    /// and persistence). Same-key replacement keeps the older created_at.
    void insert_active(Cookie cookie);
    void insert_quarantined(const QuarantineKey& key, Cookie cookie);

    /// Cookie header value for `url`, or nullopt when no active cookie matches.
    std::optional<std::string> cookies_for(const Url& url, Instant now) const;

    std::size_t release_quarantine(const QuarantineKey& key);
    std::size_t purge_expired(Instant now);

    const Store& active() const noexcept { return active_; }
    const std::map<QuarantineKey, Store>& quarantine() const noexcept { return quarantine_; }

    /// True if any unexpired active cookie belongs to `domain`'s site.
    bool has_active_for(const RegistrableDomain& domain, const SuffixRuleSet& rules, Instant now) const;
    std::size_t quarantined_count(const QuarantineKey& key) const;

    friend bool operator==(const CookieJar&, const CookieJar&) = default;

private:
    static void upsert(Store& store, Cookie cookie);

    Store active_;
    std::map<QuarantineKey, Store> quarantine_;
};

nlohmann::json to_json(const Cookie& c);
Cookie cookie_from_json(const nlohmann::json& j);

/// Persistence format: {"cookies": [...], "quarantine": [{"thirdParty", "site", "cookies": [...]}]}.
nlohmann::json to_json(const CookieJar& jar);
CookieJar jar_from_json(const nlohmann::json& j, const SuffixRuleSet& rules);

void save_jar(const std::string& path, const CookieJar& jar);
/// Missing file yields an empty jar.
CookieJar load_jar(const std::string& path, const SuffixRuleSet& rules);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace cookiegate
