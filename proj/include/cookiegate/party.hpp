#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cookiegate {

/// Thrown by load_suffix_rules; carries the 1-based line of the offending rule.
class SuffixParseError : public std::runtime_error {
public:
    SuffixParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct SuffixRule {
    std::vector<std::string> labels;  // reversed: "co.uk" -> {"uk", "co"}
    bool wildcard = false;            // "*.ck": labels {"ck"}, matches one extra label
    bool exception = false;           // "!www.ck": labels {"ck", "www"}

    friend bool operator==(const SuffixRule&, const SuffixRule&) = default;
};

/// Public-suffix rule set. Immutable after load; safe to share across threads.
class SuffixRuleSet {
public:
    SuffixRuleSet();

    const std::vector<SuffixRule>& rules() const noexcept { return rules_; }
    std::size_t size() const noexcept { return rules_.size(); }
    bool empty() const noexcept { return rules_.empty(); }

    /// Number of trailing labels of `reversed_labels` that form the public
    /// suffix. Falls back to 1 (the implicit "*" rule) when nothing matches.
    std::size_t public_suffix_length(const std::vector<std::string>& reversed_labels) const;

private:
    struct Node {
        std::map<std::string, Node, std::less<>> children;
        bool rule = false;
        bool wildcard = false;
        bool exception = false;
    };

    friend SuffixRuleSet load_suffix_rules(std::string_view text);

    std::vector<SuffixRule> rules_;
    std::shared_ptr<Node> root_;
};

/// Parses the standard public-suffix list format: one rule per line,
/// "//" comments, "*." wildcards and "!" exceptions.
SuffixRuleSet load_suffix_rules(std::string_view text);

/// Reads and parses a suffix list file. Throws std::runtime_error if the
/// file cannot be read.
SuffixRuleSet load_suffix_rules_file(const std::string& path);

/// Small offline snapshot of the public suffix list, enough for tests and
/// the bundled fixtures.
std::string_view bundled_suffix_list_text();
const SuffixRuleSet& bundled_suffix_rules();

/// Site identity: eTLD+1 for DNS names, the host itself for IP literals,
/// single-label hosts and hosts that are themselves public suffixes.
class RegistrableDomain {
public:
    RegistrableDomain() = default;

    static RegistrableDomain dns(std::string value) { return {std::move(value), false}; }
    static RegistrableDomain host_literal(std::string value) { return {std::move(value), true}; }

    const std::string& value() const noexcept { return value_; }
    bool is_host_literal() const noexcept { return host_literal_; }
    bool empty() const noexcept { return value_.empty(); }

    friend auto operator<=>(const RegistrableDomain& a, const RegistrableDomain& b) {
        return a.value_ <=> b.value_;
    }
    friend bool operator==(const RegistrableDomain& a, const RegistrableDomain& b) {
        return a.value_ == b.value_;
    }

private:
    RegistrableDomain(std::string value, bool literal) : value_(std::move(value)), host_literal_(literal) {}

    std::string value_;
    bool host_literal_ = false;
};

enum class PartyClass { FirstParty, ThirdParty };

std::string_view to_string(PartyClass p);

/// (third party, top-level site). Used for activations, whitelist entries
/// and quarantine buckets.
struct SitePair {
    RegistrableDomain third_party;
    RegistrableDomain site;

    friend auto operator<=>(const SitePair&, const SitePair&) = default;
    friend bool operator==(const SitePair&, const SitePair&) = default;
};

/// Lowercases, strips one trailing dot and IPv6 brackets.
std::string canonical_host(std::string_view host);

bool is_ip_literal(std::string_view host);

RegistrableDomain registrable_domain(std::string_view host, const SuffixRuleSet& rules);

PartyClass classify(std::string_view request_host, const RegistrableDomain& top_level_site,
                    const SuffixRuleSet& rules);

}  // namespace cookiegate
