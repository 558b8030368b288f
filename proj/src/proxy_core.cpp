#include "cookiegate/proxy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace cookiegate {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool icontains(std::string_view haystack, std::string_view needle) {
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           }) != haystack.end();
}

constexpr std::size_t kDocumentsPerClient = 1024;

}  // namespace

std::optional<HostPort> parse_host_port(std::string_view text) {
    HostPort hp;
    std::string_view port;
    if (text.starts_with('[')) {
        auto close = text.find(']');
        if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':') return std::nullopt;
        hp.host = std::string(text.substr(1, close - 1));
        port = text.substr(close + 2);
    } else {
        auto colon = text.rfind(':');
        if (colon == std::string_view::npos) return std::nullopt;
        hp.host = std::string(text.substr(0, colon));
        port = text.substr(colon + 1);
    }
    if (hp.host.empty()) hp.host = "127.0.0.1";
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (port.empty() || ec != std::errc{} || p != port.data() + port.size() || value > 65535) return std::nullopt;
    hp.port = static_cast<std::uint16_t>(value);
    return hp;
}

ProxyConfig config_from_json(const nlohmann::json& j, ProxyConfig c) {
    if (!j.is_object()) throw StartupError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "listen")
            c.listen_address = value.get<std::string>();
        else if (key == "control")
            c.control_address = value.get<std::string>();
        else if (key == "policy") {
            auto p = parse_policy(value.get<std::string>());
            if (!p) throw StartupError("unknown policy '" + value.get<std::string>() + "'");
            c.policy = *p;
        } else if (key == "suffix_list")
            c.suffix_list_path = value.get<std::string>();
        else if (key == "whitelist")
            c.whitelist_path = value.get<std::string>();
        else if (key == "jar")
            c.jar_persistence_path = value.get<std::string>();
        else if (key == "drop_new_third_party_cookies")
            c.drop_new_third_party_cookies = value.get<bool>();
        else if (key == "tls_intercept")
            c.tls_intercept = value.get<bool>();
        else
            throw StartupError("unknown config key '" + key + "'");
    }
    return c;
}

ProxyConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StartupError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json(nlohmann::json::parse(ss.str()));
    } catch (const nlohmann::json::exception& e) {
        throw StartupError(path + ": " + e.what());
    }
}

void apply_env_overrides(ProxyConfig& config, const std::function<const char*(const char*)>& getenv_fn) {
    if (const char* v = getenv_fn("COOKIEGATE_LISTEN"); v && *v) config.listen_address = v;
    if (const char* v = getenv_fn("COOKIEGATE_CONTROL"); v && *v) config.control_address = v;
}

void validate(const ProxyConfig& config) {
    auto listen = parse_host_port(config.listen_address);
    if (!listen) throw StartupError("invalid listen address '" + config.listen_address + "'");
    auto control = parse_host_port(config.control_address);
    if (!control) throw StartupError("invalid control address '" + config.control_address + "'");
    if (listen->port != 0 && *listen == *control)
        throw StartupError("listen and control addresses must differ (" + listen->str() + ")");
    if (config.tls_intercept) throw StartupError("tls_intercept: this build does not include TLS interception");
}

std::optional<std::string> find_header(const HeaderList& headers, std::string_view name) {
    for (const auto& [k, v] : headers) {
        if (iequals(k, name)) return v;
    }
    return std::nullopt;
}

void remove_header(HeaderList& headers, std::string_view name) {
    std::erase_if(headers, [&](const auto& h) { return iequals(h.first, name); });
}

std::string_view to_string(ThirdPartyState s) {
    switch (s) {
        case ThirdPartyState::Blocked: return "blocked";
        case ThirdPartyState::Activated: return "activated";
        case ThirdPartyState::Whitelisted: return "whitelisted";
    }
    return "?";
}

std::string_view to_string(CookieStatus s) {
    switch (s) {
        case CookieStatus::None: return "none";
        case CookieStatus::Quarantined: return "quarantined";
        case CookieStatus::HasCookies: return "has_cookies";
    }
    return "?";
}

nlohmann::json to_json(const SiteView& view) {
    auto tps = nlohmann::json::array();
    for (const auto& tp : view.third_parties) {
        tps.push_back({{"domain", tp.domain.value()},
                       {"frameKind", to_string(tp.frame_kind)},
                       {"state", to_string(tp.state)},
                       {"cookieStatus", to_string(tp.cookie_status)},
                       {"requestCount", tp.request_count}});
    }
    return {{"site", view.site.value()}, {"thirdParties", std::move(tps)}};
}

ProxyCore::ProxyCore(SuffixRuleSet rules, PolicyKind policy, PolicyOptions options)
    : rules_(std::move(rules)), policy_(policy), session_(rules_, policy, options), recorder_(policy) {}

void ProxyCore::remember_document(const std::string& client, const FrameRecord& record) {
    auto& docs = documents_[client];
    auto& order = document_order_[client];
    if (docs.insert_or_assign(record.url, record).second) order.push_back(record.url);
    while (order.size() > kDocumentsPerClient) {
        docs.erase(order.front());
        order.pop_front();
    }
}

ProxyCore::Attribution ProxyCore::attribute(const Url& url, const HeaderList& headers, const std::string& client) {
    Attribution a;
    auto dest_hint = find_header(headers, "Sec-Fetch-Dest");
    auto site_hint = find_header(headers, "Sec-Fetch-Site");
    auto referer = find_header(headers, "Referer");
    auto referer_url = referer ? parse_url(*referer) : std::nullopt;

    if (dest_hint) {
        if (iequals(*dest_hint, "document"))
            a.destination = Destination::Document;
        else if (iequals(*dest_hint, "iframe") || iequals(*dest_hint, "frame"))
            a.destination = Destination::Iframe;
        else
            a.destination = Destination::Subresource;
    } else if (!referer_url || (site_hint && iequals(*site_hint, "none"))) {
        a.destination = Destination::Document;
    } else {
        auto accept = find_header(headers, "Accept");
        a.destination = accept && icontains(*accept, "text/html") ? Destination::Iframe : Destination::Subresource;
    }

    if (a.destination == Destination::Document || !referer_url) {
        // Top-level navigation, or nothing to attribute against: the request
        // host is its own top-level site.
        auto site = registrable_domain(url.host, rules_);
        std::string id = "top-" + std::to_string(next_frame_++);
        a.frame = {id, std::nullopt, 0, url.host, site};
        if (a.destination == Destination::Document)
            remember_document(client, {id, std::nullopt, url.str(), 0, site});
        else
            a.destination = Destination::Subresource;
        return a;
    }

    FrameRecord parent;
    auto& docs = documents_[client];
    if (auto it = docs.find(referer_url->str()); it != docs.end()) {
        parent = it->second;
    } else {
        parent = {"top-" + std::to_string(next_frame_++), std::nullopt, referer_url->str(), 0,
                  registrable_domain(referer_url->host, rules_)};
    }
    auto parent_host = parse_url(parent.url)->host;

    if (a.destination == Destination::Subresource) {
        a.frame = {parent.frame_id, parent.parent_frame_id, parent.depth, parent_host, parent.site};
        return a;
    }

    FrameRecord frame{"f" + std::to_string(next_frame_++), parent.frame_id, url.str(), parent.depth + 1, parent.site};
    a.frame = {frame.frame_id, frame.parent_frame_id, frame.depth, url.host, frame.site};
    // TODO: frames_ is never pruned; long-running proxies should evict it alongside document_order_.
    frames_.emplace(frame.frame_id, frame);
    remember_document(client, frame);
    return a;
}

PreparedRequest ProxyCore::decide_locked(RequestContext ctx, HeaderList headers, Instant now) {
    auto start = std::chrono::steady_clock::now();
    auto decision = session_.decide(ctx);
    recorder_.record_latency(std::chrono::steady_clock::now() - start);

    remove_header(headers, "Proxy-Connection");
    remove_header(headers, "Proxy-Authorization");
    if (decision.cookie_action != CookieAction::PassUnchanged) {
        auto first = std::find_if(headers.begin(), headers.end(), [](const auto& h) { return iequals(h.first, "Cookie"); });
        auto position = first - headers.begin();
        remove_header(headers, "Cookie");
        if (decision.cookie_action == CookieAction::Attach) {
            if (auto value = session_.jar().cookies_for(ctx.url, now)) {
                auto at = std::min<std::ptrdiff_t>(position, static_cast<std::ptrdiff_t>(headers.size()));
                headers.insert(headers.begin() + at, {"Cookie", *value});
            }
        }
    }

    auto tp = registrable_domain(ctx.url.host, rules_);
    RequestLogEntry entry;
    entry.url = ctx.url.str();
    entry.site = ctx.site;
    entry.request_domain = tp;
    entry.party = tp == ctx.site ? PartyClass::FirstParty : PartyClass::ThirdParty;
    entry.decision = decision;
    entry.cookie_header = find_header(headers, "Cookie");
    entry.interaction_initiated = ctx.interaction_initiated;

    if (entry.party == PartyClass::ThirdParty) {
        auto& stats = stats_[ctx.site][tp];
        ++stats.requests;
        auto kind = classify_frame(ctx.frame, rules_);
        auto rank = [](FrameKind k) {
            return k == FrameKind::WidgetCandidate ? 2 : k == FrameKind::AdvertisementCandidate ? 1 : 0;
        };
        if (rank(kind) > rank(stats.kind)) stats.kind = kind;
    } else if (ctx.destination == Destination::Document) {
        stats_[ctx.site];
    }
    bool consented = ctx.interaction_initiated || session_.state().consented({tp, ctx.site});
    recorder_.record(std::move(entry), consented);

    PreparedRequest out{std::move(ctx), decision, std::move(headers), std::nullopt};
    if (out.ctx.destination == Destination::Iframe) out.frame_id = out.ctx.frame.frame_id;
    return out;
}

PreparedRequest ProxyCore::prepare(const std::string& method, const Url& url, const HeaderList& incoming,
                                   const std::string& client, Instant now) {
    std::lock_guard lock(mutex_);
    auto attribution = attribute(url, incoming, client);
    RequestContext ctx;
    ctx.method = method;
    ctx.url = url;
    ctx.destination = attribution.destination;
    ctx.site = attribution.frame.top_level_site;
    ctx.frame = std::move(attribution.frame);
    if (ctx.destination == Destination::Document) session_.record_visit(ctx.site);
    return decide_locked(std::move(ctx), incoming, now);
}

HeaderList ProxyCore::finish(const PreparedRequest& prepared, const HeaderList& response_headers, Instant now) {
    std::lock_guard lock(mutex_);
    HeaderList out;
    out.reserve(response_headers.size());
    for (const auto& h : response_headers) {
        if (iequals(h.first, "Set-Cookie")) {
            session_.apply_set_cookie(h.second, prepared.ctx, prepared.decision, now);
            if (prepared.decision.set_cookie_action != SetCookieAction::Accept) continue;
        }
        out.push_back(h);
    }
    return out;
}

std::optional<ReloadPlan> ProxyCore::plan_reload(const std::string& frame_id, Instant now) {
    std::lock_guard lock(mutex_);
    auto it = frames_.find(frame_id);
    if (it == frames_.end()) return std::nullopt;
    const auto& frame = it->second;
    auto url = *parse_url(frame.url);

    ReloadPlan plan;
    plan.released = session_.jar().release_quarantine({registrable_domain(url.host, rules_), frame.site});

    RequestContext ctx;
    ctx.url = url;
    ctx.destination = Destination::Iframe;
    ctx.frame = {frame.frame_id, frame.parent_frame_id, frame.depth, url.host, frame.site};
    ctx.site = frame.site;
    ctx.interaction_initiated = true;
    HeaderList headers{{"Host", url.authority()}, {"Accept", "text/html"}};
    plan.request = decide_locked(std::move(ctx), std::move(headers), now);
    return plan;
}

std::size_t ProxyCore::activate(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    std::lock_guard lock(mutex_);
    return session_.activate(third_party, site);
}

void ProxyCore::whitelist_add(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    std::lock_guard lock(mutex_);
    session_.whitelist_add(third_party, site);
}

void ProxyCore::whitelist_remove(const RegistrableDomain& third_party, const RegistrableDomain& site) {
    std::lock_guard lock(mutex_);
    session_.whitelist_remove(third_party, site);
}

void ProxyCore::seed_whitelist(const std::set<SitePair>& pairs) {
    std::lock_guard lock(mutex_);
    for (const auto& p : pairs) session_.whitelist_add(p.third_party, p.site);
}

void ProxyCore::seed_jar(CookieJar jar) {
    std::lock_guard lock(mutex_);
    session_.jar() = std::move(jar);
}

std::vector<RegistrableDomain> ProxyCore::sites() const {
    std::lock_guard lock(mutex_);
    std::vector<RegistrableDomain> out;
    for (const auto& [site, _] : stats_) out.push_back(site);
    return out;
}

std::optional<SiteView> ProxyCore::site_view(const RegistrableDomain& site, Instant now) const {
    std::lock_guard lock(mutex_);
    auto it = stats_.find(site);
    if (it == stats_.end()) return std::nullopt;
    SiteView view{site, {}};
    const auto& state = session_.state();
    for (const auto& [tp, stats] : it->second) {
        ThirdPartyView v;
        v.domain = tp;
        v.frame_kind = stats.kind;
        v.request_count = stats.requests;
        SitePair pair{tp, site};
        v.state = state.whitelist.contains(pair)   ? ThirdPartyState::Whitelisted
                  : state.activated.contains(pair) ? ThirdPartyState::Activated
                                                   : ThirdPartyState::Blocked;

        RequestContext probe;
        probe.url.scheme = "http";
        probe.url.host = tp.value();
        probe.url.port = 80;
        probe.site = site;
        bool attached = session_.decide(probe).cookie_action == CookieAction::Attach;
        if (attached && session_.jar().has_active_for(tp, rules_, now))
            v.cookie_status = CookieStatus::HasCookies;
        else if (session_.jar().quarantined_count(pair) > 0)
            v.cookie_status = CookieStatus::Quarantined;
        view.third_parties.push_back(std::move(v));
    }
    return view;
}

std::vector<std::string> ProxyCore::frames_for(const SitePair& pair) const {
    std::lock_guard lock(mutex_);
    std::vector<std::pair<std::uint64_t, std::string>> found;
    for (const auto& [id, f] : frames_) {
        if (f.site == pair.site && registrable_domain(parse_url(f.url)->host, rules_) == pair.third_party)
            found.emplace_back(std::stoull(id.substr(1)), id);
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> out;
    for (auto& [n, id] : found) out.push_back(std::move(id));
    return out;
}

ExposureReport ProxyCore::report() const {
    std::lock_guard lock(mutex_);
    return recorder_.report();
}

std::set<SitePair> ProxyCore::whitelist() const {
    std::lock_guard lock(mutex_);
    return session_.state().whitelist;
}

CookieJar ProxyCore::jar() const {
    std::lock_guard lock(mutex_);
    return session_.jar();
}

ActivationTable ProxyCore::state() const {
    std::lock_guard lock(mutex_);
    return session_.state();
}

}  // namespace cookiegate
