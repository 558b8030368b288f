#include "cookiegate/trace.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "cookiegate/cookie_jar.hpp"

namespace cookiegate {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw TraceError(where + ": " + what); }

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) fail(where, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t require_seq(const json& obj, const std::string& where) {
    const auto& v = require(obj, "seq", where);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(where, "seq must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

void require_url(const std::string& url, const std::string& where) {
    if (!parse_url(url)) fail(where, "bad URL '" + url + "'");
}

TracePage parse_page(const json& p, const std::string& where) {
    if (!p.is_object()) fail(where, "page must be an object");
    TracePage page;
    page.seq = require_seq(p, where);
    page.top_level_url = require_string(p, "top_level_url", where);
    require_url(page.top_level_url, where);

    std::map<std::string, unsigned> depth_of;
    if (auto it = p.find("frames"); it != p.end()) {
        if (!it->is_array()) fail(where, "frames must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& f = (*it)[i];
            std::string fw = where + ".frames[" + std::to_string(i) + "]";
            TraceFrame frame;
            frame.frame_id = require_string(f, "frame_id", fw);
            frame.url = require_string(f, "url", fw);
            require_url(frame.url, fw);
            if (auto pit = f.find("parent_frame_id"); pit != f.end() && !pit->is_null()) {
                if (!pit->is_string()) fail(fw, "parent_frame_id must be a string or null");
                frame.parent_frame_id = pit->get<std::string>();
            }
            const auto& d = require(f, "depth", fw);
            if (!d.is_number_integer() || d.get<std::int64_t>() < 0) fail(fw, "depth must be a nonnegative integer");
            frame.depth = d.get<unsigned>();

            if (depth_of.contains(frame.frame_id)) fail(fw, "duplicate frame_id '" + frame.frame_id + "'");
            if (frame.parent_frame_id) {
                auto parent = depth_of.find(*frame.parent_frame_id);
                if (parent == depth_of.end())
                    fail(fw, "dangling parent_frame_id '" + *frame.parent_frame_id + "'");
                if (frame.depth != parent->second + 1) fail(fw, "depth inconsistent with parent links");
            } else {
                if (frame.depth != 0) fail(fw, "frame without parent must have depth 0");
                if (!depth_of.empty()) fail(fw, "only the first frame may be the top-level frame");
                if (frame.url != page.top_level_url) fail(fw, "top-level frame url must equal top_level_url");
            }
            depth_of.emplace(frame.frame_id, frame.depth);
            page.frames.push_back(std::move(frame));
        }
    }
    if (page.frames.empty()) {
        page.frames.push_back({"main", std::nullopt, page.top_level_url, 0});
        depth_of.emplace("main", 0);
    }

    if (auto it = p.find("requests"); it != p.end()) {
        if (!it->is_array()) fail(where, "requests must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& r = (*it)[i];
            std::string rw = where + ".requests[" + std::to_string(i) + "]";
            TraceRequest req;
            req.url = require_string(r, "url", rw);
            require_url(req.url, rw);
            req.frame_id = require_string(r, "frame_id", rw);
            auto depth = depth_of.find(req.frame_id);
            if (depth == depth_of.end()) fail(rw, "dangling frame_id '" + req.frame_id + "'");
            auto dest = parse_destination(r.value("destination", "subresource"));
            if (!dest) fail(rw, "unknown destination");
            req.destination = *dest;
            if (req.destination == Destination::Document && depth->second != 0)
                fail(rw, "document destination outside the top-level frame");
            if (req.destination == Destination::Iframe && depth->second == 0)
                fail(rw, "iframe destination on the top-level frame");
            if (auto sc = r.find("set_cookies"); sc != r.end()) {
                if (!sc->is_array()) fail(rw, "set_cookies must be an array");
                for (const auto& h : *sc) {
                    if (!h.is_string()) fail(rw, "set_cookies entries must be strings");
                    req.set_cookies.push_back(h.get<std::string>());
                }
            }
            page.requests.push_back(std::move(req));
        }
    }
    return page;
}

}  // namespace

const TraceFrame* TracePage::find_frame(std::string_view id) const {
    for (const auto& f : frames) {
        if (f.frame_id == id) return &f;
    }
    return nullptr;
}

SessionTrace parse_trace(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw TraceError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw TraceError("trace: top level must be an object");

    SessionTrace trace;
    if (auto it = doc.find("start_time"); it != doc.end()) {
        if (!it->is_number_integer()) fail("start_time", "must be an integer");
        trace.start_time = it->get<std::int64_t>();
    }
    if (auto it = doc.find("initial_cookies"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            try {
                trace.initial_cookies.push_back(cookie_from_json((*it)[i]));
            } catch (const std::exception& e) {
                fail("initial_cookies[" + std::to_string(i) + "]", e.what());
            }
        }
    }
    if (auto it = doc.find("whitelist"); it != doc.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            std::string w = "whitelist[" + std::to_string(i) + "]";
            TraceWhitelistEntry e{require_string((*it)[i], "third_party", w), require_string((*it)[i], "site", w)};
            if (e.third_party.empty() || e.site.empty()) fail(w, "empty domain");
            trace.whitelist.push_back(std::move(e));
        }
    }

    if (auto it = doc.find("pages"); it != doc.end()) {
        if (!it->is_array()) fail("pages", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            std::string w = "pages[" + std::to_string(i) + "]";
            auto page = parse_page((*it)[i], w);
            if (!trace.pages.empty() && page.seq <= trace.pages.back().seq) fail(w, "nonmonotonic seq");
            trace.pages.push_back(std::move(page));
        }
    }

    if (auto it = doc.find("events"); it != doc.end()) {
        if (!it->is_array()) fail("events", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& e = (*it)[i];
            std::string w = "events[" + std::to_string(i) + "]";
            TraceEvent ev;
            ev.seq = require_seq(e, w);
            ev.kind = require_string(e, "kind", w);
            if (ev.kind != "click") fail(w, "unsupported event kind '" + ev.kind + "'");
            ev.frame_id = require_string(e, "frame_id", w);
            if (!trace.events.empty() && ev.seq <= trace.events.back().seq) fail(w, "nonmonotonic seq");

            std::optional<std::size_t> owner;
            for (std::size_t p = 0; p < trace.pages.size(); ++p) {
                if (trace.pages[p].seq == ev.seq) fail(w, "seq collides with a page load");
                if (trace.pages[p].seq < ev.seq) owner = p;
            }
            if (!owner) fail(w, "event before any page load");
            if (!trace.pages[*owner].find_frame(ev.frame_id))
                fail(w, "click references unknown frame '" + ev.frame_id + "'");
            ev.page_index = *owner;
            trace.events.push_back(std::move(ev));
        }
    }
    return trace;
}

SessionTrace load_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TraceError(path + ": cannot open trace file");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_trace(ss.str());
    } catch (const TraceError& e) {
        throw TraceError(path + ": " + e.what());
    }
}

json to_json(const SessionTrace& trace) {
    json doc;
    doc["start_time"] = trace.start_time;
    doc["initial_cookies"] = json::array();
    for (const auto& c : trace.initial_cookies) doc["initial_cookies"].push_back(to_json(c));
    doc["whitelist"] = json::array();
    for (const auto& w : trace.whitelist) doc["whitelist"].push_back({{"third_party", w.third_party}, {"site", w.site}});
    doc["pages"] = json::array();
    for (const auto& p : trace.pages) {
        json page{{"seq", p.seq}, {"top_level_url", p.top_level_url}};
        page["frames"] = json::array();
        for (const auto& f : p.frames) {
            page["frames"].push_back({{"frame_id", f.frame_id},
                                      {"parent_frame_id", f.parent_frame_id ? json(*f.parent_frame_id) : json(nullptr)},
                                      {"url", f.url},
                                      {"depth", f.depth}});
        }
        page["requests"] = json::array();
        for (const auto& r : p.requests) {
            page["requests"].push_back({{"url", r.url},
                                        {"frame_id", r.frame_id},
                                        {"destination", to_string(r.destination)},
                                        {"set_cookies", r.set_cookies}});
        }
        doc["pages"].push_back(std::move(page));
    }
    doc["events"] = json::array();
    for (const auto& e : trace.events)
        doc["events"].push_back({{"seq", e.seq}, {"kind", e.kind}, {"frame_id", e.frame_id}});
    return doc;
}

}  // namespace cookiegate
