#include "cookiegate/url.hpp"

#include <charconv>

#include "cookiegate/party.hpp"

namespace cookiegate {

bool Url::default_port() const noexcept {
    return (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
}

std::string Url::authority() const {
    std::string h = host.find(':') != std::string::npos ? "[" + host + "]" : host;
    if (default_port()) return h;
    return h + ":" + std::to_string(port);
}

std::string Url::target() const { return query.empty() ? path : path + "?" + query; }

std::string Url::str() const { return scheme + "://" + authority() + target(); }

std::optional<Url> parse_url(std::string_view text) {
    Url url;
    auto sep = text.find("://");
    if (sep == std::string_view::npos) return std::nullopt;
    url.scheme = canonical_host(text.substr(0, sep));
    if (url.scheme == "http")
        url.port = 80;
    else if (url.scheme == "https")
        url.port = 443;
    else
        return std::nullopt;

    auto rest = text.substr(sep + 3);
    auto auth_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, auth_end);
    rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

    std::string_view host = authority;
    std::string_view port;
    if (authority.starts_with('[')) {
        auto close = authority.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        host = authority.substr(0, close + 1);
        auto after = authority.substr(close + 1);
        if (!after.empty()) {
            if (after.front() != ':') return std::nullopt;
            port = after.substr(1);
        }
    } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        host = authority.substr(0, colon);
        port = authority.substr(colon + 1);
    }
    if (host.empty()) return std::nullopt;
    for (char c : host) {
        if (c == ' ' || c == '\t' || c == '/' || c == '\\') return std::nullopt;
    }
    url.host = canonical_host(host);
    if (!port.empty()) {
        unsigned value = 0;
        auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
        if (ec != std::errc{} || p != port.data() + port.size() || value == 0 || value > 65535)
            return std::nullopt;
        url.port = static_cast<std::uint16_t>(value);
    }

    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    auto q = rest.find('?');
    auto path = rest.substr(0, q);
    url.path = path.empty() ? "/" : std::string(path);
    if (q != std::string_view::npos) url.query = std::string(rest.substr(q + 1));
    for (char c : url.path) {
        if (c == ' ') return std::nullopt;
    }
    return url;
}

}  // namespace cookiegate
