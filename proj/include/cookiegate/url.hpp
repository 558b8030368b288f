#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cookiegate {

/// Absolute http(s) URL, host canonicalized (lowercase, no brackets).
struct Url {
    std::string scheme;  // "http" or "https"
    std::string host;
    std::uint16_t port = 0;
    std::string path = "/";
    std::string query;  // without '?'

    bool secure() const noexcept { return scheme == "https"; }
    bool default_port() const noexcept;
    /// "host" or "host:port" as it would appear in a Host header.
    std::string authority() const;
    /// Path plus "?query" when present.
    std::string target() const;
    std::string str() const;

    friend bool operator==(const Url&, const Url&) = default;
};

/// Returns nullopt for anything that is not an absolute http/https URL.
std::optional<Url> parse_url(std::string_view text);

}  // namespace cookiegate
