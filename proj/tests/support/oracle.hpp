#pragma once

// Brute-force reference model of trace replay. Shares only data types with
// the engine; suffix matching, URL splitting, Set-Cookie parsing, the cookie
// store and the policy rules are all reimplemented here, naively.

#include <string>
#include <vector>

#include "cookiegate/replay.hpp"

namespace oracle {

struct StoredCookie {
    std::string name, value, domain, path;
    bool host_only = true;
    bool secure = false;
    bool has_expiry = false;
    long long expires = 0;     // unix seconds
    long long created_at = 0;  // unix seconds
};

struct Outcome {
    cookiegate::ExposureReport report;
    std::vector<StoredCookie> active;  // sorted by (domain, path, name)
    std::size_t quarantined = 0;
};

/// Registrable domain computed from the raw rule text by trying every
/// candidate suffix of the host against every rule.
std::string registrable(const std::string& host, const std::string& rule_text);

Outcome simulate(const cookiegate::SessionTrace& trace, cookiegate::PolicyKind policy,
                 bool drop_new_third_party_cookies = false);

}  // namespace oracle
