#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cookiegate {

using Instant = std::chrono::sys_seconds;

/// A stored cookie. `domain` is the request host for host-only cookies and
/// the (dot-stripped) Domain attribute otherwise.
struct Cookie {
    std::string name;
    std::string value;
    std::string domain;
    bool host_only = true;
    std::string path = "/";
    std::optional<Instant> expires;  // nullopt: session cookie
    bool secure = false;
    std::string same_site;  // parsed for completeness, never enforced
    Instant created_at{};

    bool expired_at(Instant now) const { return expires && *expires < now; }

    friend bool operator==(const Cookie&, const Cookie&) = default;
};

/// Set-Cookie header after attribute parsing, before it is bound to a
/// response host.
struct SetCookie {
    std::string name;
    std::string value;
    std::optional<std::string> domain;
    std::optional<std::string> path;
    std::optional<Instant> expires;
    std::optional<std::int64_t> max_age;
    bool secure = false;
    bool http_only = false;
    std::string same_site;
};

/// RFC 6265 section 5.2. Returns nullopt for headers the user agent must ignore
/// (no '=' in the name-value pair, or an empty name).
std::optional<SetCookie> parse_set_cookie(std::string_view header);

/// RFC 6265 section 5.1.1 cookie-date parsing.
std::optional<Instant> parse_cookie_date(std::string_view text);

bool domain_match(std::string_view host, std::string_view domain);
bool path_match(std::string_view request_path, std::string_view cookie_path);
std::string default_path(std::string_view request_path);

}  // namespace cookiegate
