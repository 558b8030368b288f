#include "cookiegate/cookie.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <vector>

#include "cookiegate/party.hpp"

namespace cookiegate {

namespace {

std::string_view trim_ws(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool is_delimiter(unsigned char c) {
    return c == 0x09 || (c >= 0x20 && c <= 0x2F) || (c >= 0x3B && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
}

// Leading 1..max digits followed by anything; returns value and digit count.
std::optional<std::pair<int, std::size_t>> leading_digits(std::string_view tok, std::size_t min, std::size_t max) {
    std::size_t n = 0;
    while (n < tok.size() && std::isdigit(static_cast<unsigned char>(tok[n]))) ++n;
    if (n < min || n > max) return std::nullopt;
    int v = 0;
    std::from_chars(tok.data(), tok.data() + n, v);
    return std::pair{v, n};
}

}  // namespace

std::optional<Instant> parse_cookie_date(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_delimiter(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_delimiter(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) tokens.push_back(text.substr(i, j - i));
        i = j;
    }

    static constexpr std::array<std::string_view, 12> months = {"jan", "feb", "mar", "apr", "may", "jun",
                                                                "jul", "aug", "sep", "oct", "nov", "dec"};
    std::optional<int> hour, minute, second, day, month, year;
    for (auto tok : tokens) {
        if (!hour) {
            // hms-time = 1*2DIGIT ":" 1*2DIGIT ":" 1*2DIGIT
            auto h = leading_digits(tok, 1, 2);
            if (h && h->second < tok.size() && tok[h->second] == ':') {
                auto rest = tok.substr(h->second + 1);
                auto m = leading_digits(rest, 1, 2);
                if (m && m->second < rest.size() && rest[m->second] == ':') {
                    auto s = leading_digits(rest.substr(m->second + 1), 1, 2);
                    if (s) {
                        hour = h->first;
                        minute = m->first;
                        second = s->first;
                        continue;
                    }
                }
            }
        }
        if (!day) {
            if (auto d = leading_digits(tok, 1, 2)) {
                day = d->first;
                continue;
            }
        }
        if (!month && tok.size() >= 3) {
            auto prefix = tok.substr(0, 3);
            auto it = std::find_if(months.begin(), months.end(), [&](auto m) { return iequals(m, prefix); });
            if (it != months.end()) {
                month = static_cast<int>(it - months.begin()) + 1;
                continue;
            }
        }
        if (!year) {
            if (auto y = leading_digits(tok, 2, 4)) {
                year = y->first;
                continue;
            }
        }
    }
    if (!hour || !day || !month || !year) return std::nullopt;
    if (*year >= 70 && *year <= 99) *year += 1900;
    if (*year >= 0 && *year <= 69) *year += 2000;
    if (*day < 1 || *day > 31 || *year < 1601 || *hour > 23 || *minute > 59 || *second > 59) return std::nullopt;

    std::chrono::year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(*month)},
                                    std::chrono::day{static_cast<unsigned>(*day)}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd} + std::chrono::hours{*hour} + std::chrono::minutes{*minute} +
           std::chrono::seconds{*second};
}

std::optional<SetCookie> parse_set_cookie(std::string_view header) {
    auto semi = header.find(';');
    auto pair = header.substr(0, semi);
    auto eq = pair.find('=');
    if (eq == std::string_view::npos) return std::nullopt;

    SetCookie sc;
    sc.name = std::string(trim_ws(pair.substr(0, eq)));
    sc.value = std::string(trim_ws(pair.substr(eq + 1)));
    if (sc.name.empty()) return std::nullopt;

    auto attrs = semi == std::string_view::npos ? std::string_view{} : header.substr(semi + 1);
    while (!attrs.empty()) {
        auto next = attrs.find(';');
        auto av = attrs.substr(0, next);
        attrs = next == std::string_view::npos ? std::string_view{} : attrs.substr(next + 1);

        auto aeq = av.find('=');
        auto key = trim_ws(av.substr(0, aeq));
        auto val = aeq == std::string_view::npos ? std::string_view{} : trim_ws(av.substr(aeq + 1));

        if (iequals(key, "expires")) {
            if (auto t = parse_cookie_date(val)) sc.expires = t;
        } else if (iequals(key, "max-age")) {
            if (val.empty()) continue;
            bool neg = val.front() == '-';
            auto digits = neg ? val.substr(1) : val;
            if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
                continue;
            std::int64_t secs = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), secs);
            if (ec == std::errc::result_out_of_range) secs = INT32_MAX;
            sc.max_age = neg ? -secs : secs;
        } else if (iequals(key, "domain")) {
            if (val.empty()) continue;
            if (val.front() == '.') val.remove_prefix(1);
            sc.domain = canonical_host(val);
        } else if (iequals(key, "path")) {
            if (val.empty() || val.front() != '/') {
                sc.path.reset();
                continue;
            }
            sc.path = std::string(val);
        } else if (iequals(key, "secure")) {
            sc.secure = true;
        } else if (iequals(key, "httponly")) {
            sc.http_only = true;
        } else if (iequals(key, "samesite")) {
            sc.same_site = std::string(val);
        }
    }
    return sc;
}

bool domain_match(std::string_view host, std::string_view domain) {
    if (host == domain) return true;
    if (is_ip_literal(host)) return false;
    return host.size() > domain.size() && host.ends_with(domain) && host[host.size() - domain.size() - 1] == '.';
}

bool path_match(std::string_view request_path, std::string_view cookie_path) {
    if (request_path == cookie_path) return true;
    if (!request_path.starts_with(cookie_path)) return false;
    return cookie_path.ends_with('/') || request_path[cookie_path.size()] == '/';
}

std::string default_path(std::string_view request_path) {
    if (request_path.empty() || request_path.front() != '/') return "/";
    auto last = request_path.rfind('/');
    if (last == 0) return "/";
    return std::string(request_path.substr(0, last));
}

}  // namespace cookiegate
