// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures (capped), so ctest fails on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cookiegate/proxy_server.hpp"
#include "cookiegate/replay.hpp"
#include "fixtures.hpp"
#include "generator.hpp"
#include "mock_origin.hpp"
#include "oracle.hpp"

namespace cg = cookiegate;
using namespace std::chrono_literals;

namespace {

// Pinned thresholds.
constexpr int kOracleTraces = 1000;
constexpr auto kOracleBudget = 60s;
constexpr int kPropertyTraces = 1000;
constexpr std::size_t kLatencySamples = 10000;
constexpr auto kMedianLimit = 100us;
constexpr auto kP99Limit = 1ms;

const cg::SuffixRuleSet& rules() { return cg::bundled_suffix_rules(); }

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << std::endl;
    if (!c.ok) ++failures;
}

template <class F>
void for_generated(std::uint64_t seed, int count, F&& f) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) f(gen::random_trace(rng), i);
}

cg::SessionTrace fixture(const std::string& name) { return cg::load_trace_file(fixtures::path(name)); }

const cg::RequestLogEntry* find(const cg::ExposureReport& r, std::string_view url, bool interaction) {
    for (const auto& e : r.per_request_log)
        if (e.url == url && e.interaction_initiated == interaction) return &e;
    return nullptr;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string us(std::chrono::nanoseconds d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2fus", d.count() / 1000.0);
    return buf;
}

const cg::SitePair kOsnOnPub{cg::RegistrableDomain::dns("osn.com"), cg::RegistrableDomain::dns("pub.com")};

}  // namespace

int main() {
    criterion("oracle-equivalence", [](Check& c) {
        auto start = std::chrono::steady_clock::now();
        int compared = 0;
        for_generated(101, kOracleTraces, [&](const cg::SessionTrace& t, int i) {
            for (auto p : cg::kAllPolicies) {
                auto engine = cg::replay(t, p, rules());
                auto model = oracle::simulate(t, p);
                std::size_t q = 0;
                for (const auto& [k, v] : engine.final_jar.quarantine()) q += v.size();
                bool same = engine.report == model.report && q == model.quarantined &&
                            engine.final_jar.active().size() == model.active.size();
                c.expect(same, "trace " + std::to_string(i) + " policy " + std::string(cg::to_string(p)));
                ++compared;
            }
        });
        auto elapsed = std::chrono::steady_clock::now() - start;
        c.expect(elapsed < kOracleBudget, "took " + std::to_string(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count()) + "s");
        if (c.ok)
            c.detail = std::to_string(compared) + " replays in " +
                       std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()) + "ms";
    });

    criterion("no-consent-no-cookie", [](Check& c) {
        for_generated(202, kPropertyTraces, [&](const cg::SessionTrace& t, int i) {
            c.expect(cg::simulate(t, cg::PolicyKind::InteractionBased, rules()).non_consented_pairs.empty(),
                     "trace " + std::to_string(i));
        });
    });

    criterion("osn-a-visited-leaks-without-click", [](Check& c) {
        auto r = cg::simulate(fixture("osn-widget-noclick.json"), cg::PolicyKind::VisitedBased, rules());
        c.expect(r.non_consented_pairs.contains(kOsnOnPub), "(osn.com, pub.com) not leaked");
        auto w = find(r, "https://osn.com/widget/like", false);
        c.expect(w && w->cookie_header == "sid=7", "widget request did not carry sid=7");
    });

    criterion("osn-b-interaction-no-click-leaks-nothing", [](Check& c) {
        auto r = cg::simulate(fixture("osn-widget-noclick.json"), cg::PolicyKind::InteractionBased, rules());
        c.expect(r.cookie_bearing_pairs.empty(), "cookie-bearing pairs present");
        for (const auto& e : r.per_request_log)
            if (e.party == cg::PartyClass::ThirdParty) c.expect(!e.cookie_header, e.url + " carried cookies");
    });

    criterion("osn-c-click-reload-carries-cookie", [](Check& c) {
        auto t = fixture("osn-widget.json");
        auto second = t.events.at(0);
        second.seq += 1;
        t.events.push_back(second);
        auto out = cg::replay(t, cg::PolicyKind::InteractionBased, rules());
        c.expect(out.clicks.size() == 2, "expected two click outcomes");
        if (out.clicks.size() != 2) return;
        c.expect(out.clicks[0].reload() && out.clicks[0].frame_id == "osn-like", "first click did not reload osn-like");
        c.expect(out.clicks[1].kind == cg::ClickAction::Kind::PassThrough, "second click was not PassThrough");
        auto reload = find(out.report, "https://osn.com/widget/like", true);
        c.expect(reload && reload->cookie_header == "sid=7; wtrack=w1", "reload cookie header wrong");
        c.expect(out.report.cookie_bearing_pairs.contains(kOsnOnPub), "pair not cookie-bearing");
        c.expect(out.report.non_consented_pairs.empty(), "non-consented pairs present");
    });

    criterion("osn-d-block-third-attaches-nothing", [](Check& c) {
        for (auto name : {"osn-widget.json", "osn-widget-noclick.json"}) {
            auto r = cg::simulate(fixture(name), cg::PolicyKind::BlockThirdParty, rules());
            c.expect(r.cookie_bearing_pairs.empty(), std::string(name) + ": cookie-bearing pairs present");
            for (const auto& e : r.per_request_log)
                if (e.party == cg::PartyClass::ThirdParty) {
                    c.expect(!e.cookie_header, e.url + " carried cookies");
                    c.expect(e.decision.cookie_action == cg::CookieAction::Strip, e.url + " not stripped");
                }
        }
    });

    criterion("invisible-tracker", [](Check& c) {
        auto t = fixture("invisible-tracker.json");
        auto out = cg::replay(t, cg::PolicyKind::InteractionBased, rules());
        std::vector<std::string> tracker_pairs;
        std::size_t pixels = 0;
        for (const auto& page : t.pages)
            for (const auto& req : page.requests)
                if (cg::parse_url(req.url)->host == "tracker.com")
                    for (const auto& sc : req.set_cookies) tracker_pairs.push_back(sc.substr(0, sc.find(';')));
        for (const auto& e : out.report.per_request_log) {
            auto host = cg::parse_url(e.url)->host;
            if (host == "tracker.com") {
                ++pixels;
                c.expect(!e.cookie_header, e.url + " carried cookies");
            }
            if (e.cookie_header)
                for (const auto& p : tracker_pairs)
                    c.expect(e.cookie_header->find(p) == std::string::npos, e.url + " leaked " + p);
        }
        c.expect(pixels == 50, "expected 50 pixel requests, saw " + std::to_string(pixels));
        c.expect(!out.final_jar.quarantine().empty(), "tracker cookies were not quarantined");
    });

    criterion("first-party-non-interference", [](Check& c) {
        auto same = [&](const cg::SessionTrace& t, const std::string& label) {
            auto reference = cg::first_party_stream(cg::simulate(t, cg::PolicyKind::AcceptAll, rules()));
            for (auto p : cg::kAllPolicies)
                c.expect(cg::first_party_stream(cg::simulate(t, p, rules())) == reference,
                         label + " under " + std::string(cg::to_string(p)));
        };
        for (auto name : {"osn-widget.json", "osn-widget-noclick.json", "invisible-tracker.json"}) same(fixture(name), name);
        for_generated(303, kPropertyTraces, [&](const cg::SessionTrace& t, int i) { same(t, "trace " + std::to_string(i)); });
    });

    criterion("retention", [](Check& c) {
        for (auto name : {"invisible-tracker.json", "osn-widget-noclick.json"}) {
            auto t = fixture(name);
            t.events.clear();
            auto out = cg::replay(t, cg::PolicyKind::InteractionBased, rules());
            const auto& active = out.final_jar.active();
            for (const auto& ic : t.initial_cookies) {
                auto it = active.find(cg::key_of(ic));
                c.expect(it != active.end() && it->second == ic, std::string(name) + ": lost initial cookie " + ic.name);
            }
            // Everything else must have been set by a first party.
            std::set<std::string> first_party_names;
            for (const auto& page : t.pages) {
                auto top = cg::registrable_domain(cg::parse_url(page.top_level_url)->host, rules());
                for (const auto& req : page.requests)
                    if (cg::registrable_domain(cg::parse_url(req.url)->host, rules()) == top)
                        for (const auto& sc : req.set_cookies) first_party_names.insert(sc.substr(0, sc.find('=')));
            }
            auto model = oracle::simulate(t, cg::PolicyKind::InteractionBased);
            c.expect(active.size() == model.active.size(), std::string(name) + ": active size differs from oracle");
            for (const auto& [key, cookie] : active) {
                bool initial = false;
                for (const auto& ic : t.initial_cookies) initial = initial || cg::key_of(ic) == key;
                c.expect(initial || first_party_names.contains(cookie.name),
                         std::string(name) + ": unexpected active cookie " + cookie.name);
            }
        }
    });

    criterion("live-proxy-end-to-end", [](Check& c) {
        mock::Origin pub, widget;
        pub.route("/article", {"<html>article</html>", {}});
        widget.route("/login", {"<html>login</html>", {"sid=7; Path=/"}});
        widget.route("/widget/like", {"<html>like</html>", {"wtrack=w1; Path=/"}});
        cg::ProxyConfig cfg;
        cfg.listen_address = "127.0.0.1:0";
        cfg.control_address = "127.0.0.1:0";
        cfg.whitelist_path.clear();
        cg::ProxyServer server(cfg);
        server.start();

        auto get = [&](const std::string& host, int port, const std::string& path, httplib::Headers h) {
            httplib::Client cli(host, port);
            cli.set_proxy("127.0.0.1", server.proxy_port());
            return cli.Get(path, h);
        };
        auto article = "http://localhost:" + std::to_string(pub.port()) + "/article";
        get("127.0.0.1", widget.port(), "/login", {{"Sec-Fetch-Dest", "document"}});
        get("localhost", pub.port(), "/article", {{"Sec-Fetch-Dest", "document"}});
        auto frame = get("127.0.0.1", widget.port(), "/widget/like",
                         {{"Sec-Fetch-Dest", "iframe"}, {"Referer", article}, {"Cookie", "sid=7"}});
        c.expect(frame && frame->status == 200, "widget frame not proxied");
        c.expect(frame && !frame->has_header("Set-Cookie"), "quarantined Set-Cookie delivered downstream");

        auto seen = widget.captured_for("/widget/like");
        c.expect(seen.size() == 1 && !seen[0].header("Cookie"), "first widget request carried a Cookie header");

        httplib::Client ctl("127.0.0.1", server.control_port());
        auto act = ctl.Post("/ctl/v1/activate", R"({"site":"localhost","thirdParty":"127.0.0.1"})", "application/json");
        c.expect(act && act->status == 200, "activate failed");
        auto body = act ? nlohmann::json::parse(act->body, nullptr, false) : nlohmann::json();
        c.expect(body.is_object() && body.value("released", 0) == 1, "activate released nothing");
        auto frames = body.is_object() ? body["frames"] : nlohmann::json::array();
        c.expect(frames.size() == 1, "activate returned no frame");
        if (frames.size() != 1) return;

        auto reload = server.execute_reload(frames[0].get<std::string>());
        c.expect(reload && reload->status == 200, "reload failed");
        seen = widget.captured_for("/widget/like");
        c.expect(seen.size() == 2, "reload did not reach the widget origin");
        if (seen.size() == 2)
            c.expect(seen[1].header("Cookie") == "sid=7; wtrack=w1", "reload Cookie was '" +
                                                                         seen[1].header("Cookie").value_or("") + "'");
    });

    criterion("decision-latency", [](Check& c) {
        // One long session built from the tracker fixture's page pattern.
        auto base = fixture("invisible-tracker.json");
        cg::SessionTrace t;
        t.initial_cookies = base.initial_cookies;
        std::size_t requests = 0;
        for (std::size_t i = 0; requests < kLatencySamples; ++i) {
            auto page = base.pages[i % base.pages.size()];
            page.seq = 10 * (i + 1);
            requests += page.requests.size();
            t.pages.push_back(std::move(page));
        }
        auto r = cg::simulate(t, cg::PolicyKind::InteractionBased, rules());
        const auto& lat = r.decision_latency;
        c.expect(lat.samples >= kLatencySamples, "only " + std::to_string(lat.samples) + " samples");
        c.expect(lat.median < kMedianLimit, "median " + us(lat.median));
        c.expect(lat.p99 < kP99Limit, "p99 " + us(lat.p99));
        if (c.ok)
            c.detail = "median " + us(lat.median) + ", p99 " + us(lat.p99) + " over " + std::to_string(lat.samples) +
                       " requests";
    });

    criterion("compare-determinism", [](Check& c) {
        auto dir = fixtures::temp_dir("determinism");
        std::mt19937_64 rng(404);
        auto generated = dir / "generated.json";
        std::ofstream(generated) << cg::to_json(gen::random_trace(rng)).dump();
        std::vector<std::string> traces{fixtures::path("osn-widget.json"), fixtures::path("invisible-tracker.json"),
                                        generated.string()};
        int n = 0;
        for (const auto& trace : traces)
            for (auto format : {"json", "csv"}) {
                std::string outs[2];
                for (int run = 0; run < 2; ++run) {
                    auto out = dir / ("out" + std::to_string(n) + "-" + std::to_string(run));
                    auto cmd = std::string(COOKIEGATE_CLI_PATH) + " compare " + trace + " --format " + format + " --out " +
                               out.string();
                    int status = std::system(cmd.c_str());
                    c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, cmd + " failed");
                    outs[run] = slurp(out);
                }
                c.expect(!outs[0].empty() && outs[0] == outs[1], trace + " " + format + " differs between runs");
                ++n;
            }
        std::filesystem::remove_all(dir);
    });

    return failures > 100 ? 100 : failures;
}
