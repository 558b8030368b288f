#include "cookiegate/cookie_jar.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cookiegate {

std::string_view to_string(SetCookieAction a) {
    switch (a) {
        case SetCookieAction::Accept: return "accept";
        case SetCookieAction::Quarantine: return "quarantine";
        case SetCookieAction::Drop: return "drop";
    }
    return "?";
}

std::string_view to_string(Placement::Kind k) {
    switch (k) {
        case Placement::Kind::Active: return "active";
        case Placement::Kind::Quarantined: return "quarantined";
        case Placement::Kind::Dropped: return "dropped";
        case Placement::Kind::Expired: return "expired";
        case Placement::Kind::Rejected: return "rejected";
    }
    return "?";
}

CookieKey key_of(const Cookie& c) { return {c.domain, c.path, c.name}; }

void CookieJar::upsert(Store& store, Cookie cookie) {
    auto key = key_of(cookie);
    if (auto it = store.find(key); it != store.end()) {
        cookie.created_at = it->second.created_at;
        it->second = std::move(cookie);
    } else {
        store.emplace(std::move(key), std::move(cookie));
    }
}

Placement CookieJar::store(const SetCookie& sc, const Url& response_url, const RegistrableDomain& site,
                           SetCookieAction action, const SuffixRuleSet& rules, Instant now) {
    Cookie c;
    c.name = sc.name;
    c.value = sc.value;
    c.secure = sc.secure;
    c.same_site = sc.same_site;
    c.created_at = now;
    c.path = sc.path.value_or(default_path(response_url.path));

    const std::string& host = response_url.host;
    if (sc.domain && !sc.domain->empty()) {
        const std::string& d = *sc.domain;
        bool public_suffix = !is_ip_literal(d) && registrable_domain(d, rules).is_host_literal();
        if (public_suffix && d != host) return {Placement::Kind::Rejected, "public suffix domain", std::nullopt};
        if (!domain_match(host, d)) return {Placement::Kind::Rejected, "domain mismatch", std::nullopt};
        c.domain = d;
        c.host_only = public_suffix;
    } else {
        c.domain = host;
        c.host_only = true;
    }

    if (sc.max_age)
        c.expires = *sc.max_age <= 0 ? Instant::min() : now + std::chrono::seconds{*sc.max_age};
    else if (sc.expires)
        c.expires = sc.expires;

    if (action == SetCookieAction::Drop) return {Placement::Kind::Dropped, {}, std::nullopt};

    QuarantineKey bucket{registrable_domain(c.domain, rules), site};
    bool quarantine = action == SetCookieAction::Quarantine && bucket.third_party != bucket.site;
    Store& target = quarantine ? quarantine_[bucket] : active_;

    if (c.expires && *c.expires <= now) {
        target.erase(key_of(c));
        if (quarantine && target.empty()) quarantine_.erase(bucket);
        return {Placement::Kind::Expired, {}, std::nullopt};
    }
    upsert(target, std::move(c));
    if (quarantine) return {Placement::Kind::Quarantined, {}, bucket};
    return {Placement::Kind::Active, {}, std::nullopt};
}

void CookieJar::insert_active(Cookie cookie) { upsert(active_, std::move(cookie)); }

void CookieJar::insert_quarantined(const QuarantineKey& key, Cookie cookie) {
    upsert(quarantine_[key], std::move(cookie));
}

std::optional<std::string> CookieJar::cookies_for(const Url& url, Instant now) const {
    std::vector<const Cookie*> matched;
    for (const auto& [key, c] : active_) {
        if (c.expired_at(now)) continue;
        bool host_ok = c.host_only ? url.host == c.domain : domain_match(url.host, c.domain);
        if (!host_ok || !path_match(url.path, c.path)) continue;
        if (c.secure && !url.secure()) continue;
        matched.push_back(&c);
    }
    if (matched.empty()) return std::nullopt;

    std::sort(matched.begin(), matched.end(), [](const Cookie* a, const Cookie* b) {
        if (a->path.size() != b->path.size()) return a->path.size() > b->path.size();
        if (a->created_at != b->created_at) return a->created_at < b->created_at;
        if (a->name != b->name) return a->name < b->name;
        return a->domain < b->domain;
    });
    std::string header;
    for (const auto* c : matched) {
        if (!header.empty()) header += "; ";
        header += c->name;
        header += '=';
        header += c->value;
    }
    return header;
}

std::size_t CookieJar::release_quarantine(const QuarantineKey& key) {
    auto it = quarantine_.find(key);
    if (it == quarantine_.end()) return 0;
    std::size_t n = it->second.size();
    for (auto& [k, c] : it->second) upsert(active_, std::move(c));
    quarantine_.erase(it);
    return n;
}

std::size_t CookieJar::purge_expired(Instant now) {
    std::size_t removed = std::erase_if(active_, [&](const auto& kv) { return kv.second.expired_at(now); });
    for (auto it = quarantine_.begin(); it != quarantine_.end();) {
        removed += std::erase_if(it->second, [&](const auto& kv) { return kv.second.expired_at(now); });
        it = it->second.empty() ? quarantine_.erase(it) : std::next(it);
    }
    return removed;
}

bool CookieJar::has_active_for(const RegistrableDomain& domain, const SuffixRuleSet& rules, Instant now) const {
    return std::any_of(active_.begin(), active_.end(), [&](const auto& kv) {
        return !kv.second.expired_at(now) && registrable_domain(kv.second.domain, rules) == domain;
    });
}

std::size_t CookieJar::quarantined_count(const QuarantineKey& key) const {
    auto it = quarantine_.find(key);
    return it == quarantine_.end() ? 0 : it->second.size();
}

nlohmann::json to_json(const Cookie& c) {
    nlohmann::json j{{"name", c.name},
                     {"value", c.value},
                     {"domain", c.domain},
                     {"host_only", c.host_only},
                     {"path", c.path},
                     {"secure", c.secure},
                     {"created_at", c.created_at.time_since_epoch().count()}};
    j["expires"] = c.expires ? nlohmann::json(c.expires->time_since_epoch().count()) : nlohmann::json(nullptr);
    if (!c.same_site.empty()) j["same_site"] = c.same_site;
    return j;
}

Cookie cookie_from_json(const nlohmann::json& j) {
    Cookie c;
    c.name = j.at("name").get<std::string>();
    c.value = j.value("value", "");
    c.domain = canonical_host(j.at("domain").get<std::string>());
    c.host_only = j.value("host_only", true);
    c.path = j.value("path", "/");
    c.secure = j.value("secure", false);
    c.same_site = j.value("same_site", "");
    c.created_at = Instant{std::chrono::seconds{j.value<std::int64_t>("created_at", 0)}};
    if (auto it = j.find("expires"); it != j.end() && !it->is_null())
        c.expires = Instant{std::chrono::seconds{it->get<std::int64_t>()}};
    if (c.name.empty() || c.name.find('=') != std::string::npos)
        throw std::invalid_argument("invalid cookie name '" + c.name + "'");
    if (c.path.empty() || c.path.front() != '/') throw std::invalid_argument("cookie path must start with '/'");
    if (c.domain.empty()) throw std::invalid_argument("cookie domain is empty");
    return c;
}

nlohmann::json to_json(const CookieJar& jar) {
    nlohmann::json cookies = nlohmann::json::array();
    for (const auto& [k, c] : jar.active()) cookies.push_back(to_json(c));
    nlohmann::json quarantine = nlohmann::json::array();
    for (const auto& [key, store] : jar.quarantine()) {
        nlohmann::json entry{{"thirdParty", key.third_party.value()}, {"site", key.site.value()}};
        entry["cookies"] = nlohmann::json::array();
        for (const auto& [k, c] : store) entry["cookies"].push_back(to_json(c));
        quarantine.push_back(std::move(entry));
    }
    return {{"cookies", std::move(cookies)}, {"quarantine", std::move(quarantine)}};
}

CookieJar jar_from_json(const nlohmann::json& j, const SuffixRuleSet& rules) {
    CookieJar jar;
    for (const auto& c : j.value("cookies", nlohmann::json::array())) jar.insert_active(cookie_from_json(c));
    for (const auto& q : j.value("quarantine", nlohmann::json::array())) {
        QuarantineKey key{registrable_domain(q.at("thirdParty").get<std::string>(), rules),
                          registrable_domain(q.at("site").get<std::string>(), rules)};
        for (const auto& c : q.value("cookies", nlohmann::json::array()))
            jar.insert_quarantined(key, cookie_from_json(c));
    }
    return jar;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

void save_jar(const std::string& path, const CookieJar& jar) { write_file_atomic(path, to_json(jar).dump(2) + "\n"); }

CookieJar load_jar(const std::string& path, const SuffixRuleSet& rules) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return jar_from_json(nlohmann::json::parse(ss.str()), rules);
}

}  // namespace cookiegate
