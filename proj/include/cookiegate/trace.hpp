#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cookiegate/cookie.hpp"
#include "cookiegate/policy.hpp"
#include "cookiegate/url.hpp"

namespace cookiegate {

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TraceFrame {
    std::string frame_id;
    std::optional<std::string> parent_frame_id;
    std::string url;
    unsigned depth = 0;
};

struct TraceRequest {
    std::string url;
    std::string frame_id;
    Destination destination = Destination::Subresource;
    std::vector<std::string> set_cookies;
};

struct TracePage {
    std::uint64_t seq = 0;
    std::string top_level_url;
    std::vector<TraceFrame> frames;  // frames[0] is the top-level document
    std::vector<TraceRequest> requests;

    const TraceFrame* find_frame(std::string_view id) const;
};

struct TraceEvent {
    std::uint64_t seq = 0;
    std::string kind = "click";
    std::string frame_id;
    std::size_t page_index = 0;  // page that was loaded when the event happened
};

struct TraceWhitelistEntry {
    std::string third_party;
    std::string site;
};

/// A recorded browsing session: page loads with exact frame trees, the
/// requests each page made, and click events interleaved by sequence number.
struct SessionTrace {
    std::int64_t start_time = 1700000000;  // unix seconds; event time = start_time + seq
    std::vector<Cookie> initial_cookies;
    std::vector<TraceWhitelistEntry> whitelist;
    std::vector<TracePage> pages;
    std::vector<TraceEvent> events;

    Instant time_of(std::uint64_t seq) const {
        return Instant{std::chrono::seconds{start_time + static_cast<std::int64_t>(seq)}};
    }
};

/// Parses and validates a JSON trace. Throws TraceError naming the first
/// violated invariant.
SessionTrace parse_trace(std::string_view text);
SessionTrace load_trace_file(const std::string& path);

nlohmann::json to_json(const SessionTrace& trace);

}  // namespace cookiegate
