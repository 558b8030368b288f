#include "cookiegate/party.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace cookiegate {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_reversed(std::string_view name) {
    std::vector<std::string> labels;
    std::size_t start = 0;
    while (true) {
        auto dot = name.find('.', start);
        labels.emplace_back(name.substr(start, dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    std::reverse(labels.begin(), labels.end());
    return labels;
}

std::string join_reversed(const std::vector<std::string>& reversed, std::size_t count) {
    std::string out;
    for (std::size_t i = count; i-- > 0;) {
        out += reversed[i];
        if (i != 0) out += '.';
    }
    return out;
}

bool is_ipv4(std::string_view host) {
    int parts = 0;
    std::size_t i = 0;
    while (i <= host.size()) {
        std::size_t j = host.find('.', i);
        if (j == std::string_view::npos) j = host.size();
        auto part = host.substr(i, j - i);
        if (part.empty() || part.size() > 3) return false;
        int v = 0;
        for (char c : part) {
            if (c < '0' || c > '9') return false;
            v = v * 10 + (c - '0');
        }
        if (v > 255) return false;
        ++parts;
        i = j + 1;
    }
    return parts == 4;
}

}  // namespace

SuffixParseError::SuffixParseError(std::size_t line, const std::string& what)
    : std::runtime_error("suffix list line " + std::to_string(line) + ": " + what), line_(line) {}

SuffixRuleSet::SuffixRuleSet() : root_(std::make_shared<Node>()) {}

std::size_t SuffixRuleSet::public_suffix_length(const std::vector<std::string>& labels) const {
    std::size_t best = 1;
    const Node* node = root_.get();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = node->children.find(labels[i]);
        const Node* child = it == node->children.end() ? nullptr : &it->second;
        // Exceptions take priority over every other rule.
        if (child && child->exception) return i;
        if (node->wildcard) best = std::max(best, i + 1);
        if (!child) break;
        if (child->rule) best = std::max(best, i + 1);
        node = child;
    }
    return best;
}

SuffixRuleSet load_suffix_rules(std::string_view text) {
    SuffixRuleSet set;
    std::set<std::pair<std::vector<std::string>, int>> seen;
    std::vector<std::pair<std::size_t, SuffixRule>> exceptions;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line.starts_with("//")) continue;
        if (std::any_of(line.begin(), line.end(), is_space))
            throw SuffixParseError(line_no, "whitespace inside rule");

        SuffixRule rule;
        std::string body = canonical_host(line);
        if (body.starts_with('!')) {
            rule.exception = true;
            body.erase(0, 1);
        } else if (body.starts_with("*.")) {
            rule.wildcard = true;
            body.erase(0, 2);
        }
        if (body.empty()) throw SuffixParseError(line_no, "empty rule");
        rule.labels = split_reversed(body);
        for (const auto& l : rule.labels) {
            if (l.empty()) throw SuffixParseError(line_no, "empty label");
            if (l.find('*') != std::string::npos)
                throw SuffixParseError(line_no, "wildcard only allowed as leftmost label");
            if (l.find('!') != std::string::npos) throw SuffixParseError(line_no, "misplaced '!'");
        }
        int kind = rule.exception ? 2 : rule.wildcard ? 1 : 0;
        if (!seen.emplace(rule.labels, kind).second) continue;

        auto* node = set.root_.get();
        for (const auto& l : rule.labels) node = &node->children[l];
        if (rule.exception)
            node->exception = true;
        else if (rule.wildcard)
            node->wildcard = true;
        else
            node->rule = true;

        if (rule.exception) exceptions.emplace_back(line_no, rule);
        set.rules_.push_back(std::move(rule));
    }

    for (const auto& [line, rule] : exceptions) {
        std::vector<std::string> parent(rule.labels.begin(), rule.labels.end() - 1);
        if (parent.empty() || !seen.contains({parent, 1}))
            throw SuffixParseError(line, "exception rule outside any wildcard rule");
    }
    return set;
}

SuffixRuleSet load_suffix_rules_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read suffix list: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_suffix_rules(ss.str());
}

const SuffixRuleSet& bundled_suffix_rules() {
    static const SuffixRuleSet rules = load_suffix_rules(bundled_suffix_list_text());
    return rules;
}

std::string_view to_string(PartyClass p) {
    return p == PartyClass::FirstParty ? "first-party" : "third-party";
}

std::string canonical_host(std::string_view host) {
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    if (host.size() > 1 && host.back() == '.') host.remove_suffix(1);
    std::string out(host);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_ip_literal(std::string_view host) {
    return host.find(':') != std::string_view::npos || is_ipv4(host);
}

RegistrableDomain registrable_domain(std::string_view host, const SuffixRuleSet& rules) {
    std::string h = canonical_host(host);
    if (is_ip_literal(h) || h.find('.') == std::string::npos) return RegistrableDomain::host_literal(h);

    auto labels = split_reversed(h);
    std::size_t suffix = rules.public_suffix_length(labels);
    if (suffix + 1 > labels.size()) return RegistrableDomain::host_literal(h);
    return RegistrableDomain::dns(join_reversed(labels, suffix + 1));
}

PartyClass classify(std::string_view request_host, const RegistrableDomain& top_level_site,
                    const SuffixRuleSet& rules) {
    return registrable_domain(request_host, rules) == top_level_site ? PartyClass::FirstParty
                                                                     : PartyClass::ThirdParty;
}

}  // namespace cookiegate
