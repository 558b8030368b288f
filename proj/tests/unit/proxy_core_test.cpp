#include <random>

#include <gtest/gtest.h>

#include "cookiegate/proxy.hpp"

namespace cg = cookiegate;

namespace {

const cg::SuffixRuleSet& rules() { return cg::bundled_suffix_rules(); }
cg::RegistrableDomain site(std::string_view h) { return cg::registrable_domain(h, rules()); }
const cg::Instant t0{std::chrono::seconds{1700000000}};

struct CoreFixture : ::testing::Test {
    cg::ProxyCore core{rules(), cg::PolicyKind::InteractionBased};

    cg::PreparedRequest get(std::string_view url, cg::HeaderList headers) {
        return core.prepare("GET", *cg::parse_url(url), headers, "10.0.0.1", t0);
    }

    cg::PreparedRequest load_page(std::string_view url) {
        return get(url, {{"Host", cg::parse_url(url)->authority()}, {"Sec-Fetch-Dest", "document"}});
    }

    cg::PreparedRequest load_frame(std::string_view url, std::string_view parent, cg::HeaderList extra = {}) {
        cg::HeaderList h{{"Host", cg::parse_url(url)->authority()},
                         {"Sec-Fetch-Dest", "iframe"},
                         {"Referer", std::string(parent)}};
        h.insert(h.end(), extra.begin(), extra.end());
        return get(url, h);
    }
};

}  // namespace

TEST(HostPort, Parse) {
    EXPECT_EQ(cg::parse_host_port("127.0.0.1:8080"), (cg::HostPort{"127.0.0.1", 8080}));
    EXPECT_EQ(cg::parse_host_port(":9"), (cg::HostPort{"127.0.0.1", 9}));
    EXPECT_EQ(cg::parse_host_port("[::1]:80"), (cg::HostPort{"::1", 80}));
    EXPECT_FALSE(cg::parse_host_port("nohost"));
    EXPECT_FALSE(cg::parse_host_port("x:99999"));
}

TEST(Config, JsonAndValidation) {
    auto c = cg::config_from_json(nlohmann::json{{"listen", "127.0.0.1:1"},
                                                 {"control", "127.0.0.1:2"},
                                                 {"policy", "visited"},
                                                 {"whitelist", "w.json"},
                                                 {"drop_new_third_party_cookies", true}});
    EXPECT_EQ(c.listen_address, "127.0.0.1:1");
    EXPECT_EQ(c.policy, cg::PolicyKind::VisitedBased);
    EXPECT_TRUE(c.drop_new_third_party_cookies);
    EXPECT_THROW(cg::config_from_json(nlohmann::json{{"listne", "x"}}), std::exception);
    EXPECT_THROW(cg::config_from_json(nlohmann::json{{"policy", "strict"}}), std::exception);

    cg::ProxyConfig same;
    same.control_address = same.listen_address;
    EXPECT_THROW(cg::validate(same), cg::StartupError);
    cg::ProxyConfig tls;
    tls.tls_intercept = true;
    EXPECT_THROW(cg::validate(tls), cg::StartupError);
    EXPECT_NO_THROW(cg::validate(cg::ProxyConfig{}));
}

TEST(Config, EnvOverridesListenAddresses) {
    cg::ProxyConfig c;
    cg::apply_env_overrides(c, [](const char* name) -> const char* {
        return std::string_view(name) == "COOKIEGATE_LISTEN" ? "127.0.0.1:7000" : nullptr;
    });
    EXPECT_EQ(c.listen_address, "127.0.0.1:7000");
    EXPECT_EQ(c.control_address, cg::ProxyConfig{}.control_address);
}

TEST_F(CoreFixture, FirstPartyHeadersPassUnchanged) {
    load_page("http://pub.com/");
    cg::HeaderList in{{"Host", "pub.com"},
                      {"Referer", "http://pub.com/"},
                      {"Cookie", "sid=1"},
                      {"X-Custom", "a"},
                      {"cookie", "dup=2"}};
    auto p = get("http://cdn.pub.com/a.png", in);
    EXPECT_EQ(p.decision.cookie_action, cg::CookieAction::PassUnchanged);
    EXPECT_EQ(p.headers, in);
}

TEST_F(CoreFixture, ProxyHopHeadersRemoved) {
    auto p = get("http://pub.com/", {{"Host", "pub.com"}, {"Proxy-Connection", "keep-alive"},
                                     {"Proxy-Authorization", "Basic x"}});
    EXPECT_EQ(p.headers, (cg::HeaderList{{"Host", "pub.com"}}));
}

TEST_F(CoreFixture, ThirdPartyCookieStripped) {
    load_page("http://pub.com/");
    auto p = load_frame("http://osn.com/like", "http://pub.com/", {{"Cookie", "sid=7"}});
    EXPECT_EQ(p.decision.cookie_action, cg::CookieAction::Strip);
    EXPECT_FALSE(cg::find_header(p.headers, "Cookie"));
    EXPECT_EQ(p.ctx.site, site("pub.com"));
    EXPECT_EQ(p.ctx.frame.depth, 1u);
    ASSERT_TRUE(p.frame_id);
}

TEST_F(CoreFixture, QuarantinedSetCookieHiddenDownstream) {
    load_page("http://pub.com/");
    auto p = load_frame("http://osn.com/like", "http://pub.com/");
    auto out = core.finish(p, {{"Content-Type", "text/html"}, {"Set-Cookie", "t=9"}}, t0);
    EXPECT_EQ(out, (cg::HeaderList{{"Content-Type", "text/html"}}));
    EXPECT_EQ(core.jar().quarantined_count({site("osn.com"), site("pub.com")}), 1u);
}

TEST_F(CoreFixture, FirstPartySetCookieDelivered) {
    auto p = load_page("http://osn.com/login");
    auto out = core.finish(p, {{"Set-Cookie", "sid=7"}}, t0);
    EXPECT_EQ(out.size(), 1u);
    EXPECT_EQ(core.jar().cookies_for(*cg::parse_url("http://osn.com/"), t0), "sid=7");
}

TEST_F(CoreFixture, AttributionWithoutFetchMetadata) {
    auto top = get("http://pub.com/", {{"Host", "pub.com"}, {"Accept", "text/html"}});
    EXPECT_EQ(top.ctx.destination, cg::Destination::Document);
    auto frame = get("http://osn.com/w", {{"Referer", "http://pub.com/"}, {"Accept", "text/html,*/*"}});
    EXPECT_EQ(frame.ctx.destination, cg::Destination::Iframe);
    EXPECT_EQ(frame.ctx.site, site("pub.com"));
    auto nested = get("http://adnet.org/x", {{"Referer", "http://osn.com/w"}, {"Accept", "text/html"}});
    EXPECT_EQ(nested.ctx.frame.depth, 2u);
    EXPECT_EQ(nested.ctx.site, site("pub.com"));
    auto sub = get("http://osn.com/btn.png", {{"Referer", "http://osn.com/w"}, {"Accept", "image/*"}});
    EXPECT_EQ(sub.ctx.destination, cg::Destination::Subresource);
    EXPECT_EQ(sub.ctx.site, site("pub.com"));
    auto nav = get("http://news.co.uk/", {{"Referer", "http://pub.com/"}, {"Sec-Fetch-Site", "none"}});
    EXPECT_EQ(nav.ctx.destination, cg::Destination::Document);
    EXPECT_EQ(nav.ctx.site, site("news.co.uk"));
}

TEST_F(CoreFixture, UnknownRefererStillGivesSite) {
    auto p = get("http://osn.com/w", {{"Referer", "http://pub.com/never-seen"}, {"Sec-Fetch-Dest", "iframe"}});
    EXPECT_EQ(p.ctx.site, site("pub.com"));
    EXPECT_EQ(p.decision.cookie_action, cg::CookieAction::Strip);
}

TEST_F(CoreFixture, RegistryIsPerClient) {
    load_page("http://pub.com/");
    auto other = core.prepare("GET", *cg::parse_url("http://osn.com/w"),
                              {{"Referer", "http://osn.com/w"}, {"Sec-Fetch-Dest", "iframe"}}, "10.0.0.2", t0);
    EXPECT_EQ(other.ctx.site, site("osn.com"));
}

TEST_F(CoreFixture, ReloadPlanReleasesAndAttaches) {
    core.finish(load_page("http://osn.com/login"), {{"Set-Cookie", "sid=7"}}, t0);
    load_page("http://pub.com/");
    auto frame = load_frame("http://osn.com/like", "http://pub.com/");
    core.finish(frame, {{"Set-Cookie", "t=9"}}, t0);

    EXPECT_FALSE(core.plan_reload("nope", t0));
    auto plan = core.plan_reload(*frame.frame_id, t0);
    ASSERT_TRUE(plan);
    EXPECT_EQ(plan->released, 1u);
    EXPECT_TRUE(plan->request.ctx.interaction_initiated);
    EXPECT_EQ(plan->request.decision.cookie_action, cg::CookieAction::Attach);
    EXPECT_EQ(cg::find_header(plan->request.headers, "Cookie"), "sid=7; t=9");

    auto again = core.plan_reload(*frame.frame_id, t0);
    EXPECT_EQ(again->released, 0u);
    EXPECT_EQ(cg::find_header(again->request.headers, "Cookie"), "sid=7; t=9");
}

TEST_F(CoreFixture, SiteViewTracksStateAndCookies) {
    core.finish(load_page("http://osn.com/login"), {{"Set-Cookie", "sid=7"}}, t0);
    load_page("http://pub.com/");
    auto frame = load_frame("http://osn.com/like", "http://pub.com/");
    core.finish(frame, {{"Set-Cookie", "t=9"}}, t0);
    load_frame("http://adnet.org/x", "http://osn.com/like");

    auto view = core.site_view(site("pub.com"), t0);
    ASSERT_TRUE(view);
    ASSERT_EQ(view->third_parties.size(), 2u);
    const auto& adnet = view->third_parties[0];
    const auto& osn = view->third_parties[1];
    EXPECT_EQ(osn.domain, site("osn.com"));
    EXPECT_EQ(osn.frame_kind, cg::FrameKind::WidgetCandidate);
    EXPECT_EQ(osn.state, cg::ThirdPartyState::Blocked);
    EXPECT_EQ(osn.cookie_status, cg::CookieStatus::Quarantined);
    EXPECT_EQ(adnet.frame_kind, cg::FrameKind::AdvertisementCandidate);
    EXPECT_EQ(adnet.cookie_status, cg::CookieStatus::None);

    EXPECT_EQ(core.activate(site("osn.com"), site("pub.com")), 1u);
    view = core.site_view(site("pub.com"), t0);
    EXPECT_EQ(view->third_parties[1].state, cg::ThirdPartyState::Activated);
    EXPECT_EQ(view->third_parties[1].cookie_status, cg::CookieStatus::HasCookies);

    core.whitelist_add(site("adnet.org"), site("pub.com"));
    EXPECT_EQ(core.site_view(site("pub.com"), t0)->third_parties[0].state, cg::ThirdPartyState::Whitelisted);
    EXPECT_FALSE(core.site_view(site("nowhere.com"), t0));

    auto j = cg::to_json(*view);
    EXPECT_EQ(j["site"], "pub.com");
    EXPECT_EQ(j["thirdParties"][1]["cookieStatus"], "has_cookies");
}

TEST_F(CoreFixture, FramesForPair) {
    load_page("http://pub.com/");
    auto a = load_frame("http://osn.com/like", "http://pub.com/");
    auto b = load_frame("http://osn.com/share", "http://pub.com/");
    EXPECT_EQ(core.frames_for({site("osn.com"), site("pub.com")}),
              (std::vector<std::string>{*a.frame_id, *b.frame_id}));
}

TEST_F(CoreFixture, HeaderHygieneUnderRandomTraffic) {
    // Whatever the client sends, no upstream request to a non-consented
    // third party carries a Cookie header.
    const std::vector<std::string> hosts = {"pub.com", "osn.com", "www.osn.com", "adnet.org", "news.co.uk"};
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<std::size_t> pick(0, hosts.size() - 1), coin(0, 3);
    for (int i = 0; i < 2000; ++i) {
        auto host = hosts[pick(rng)];
        cg::HeaderList h{{"Host", host}, {"Cookie", "c=" + std::to_string(i)}};
        if (coin(rng)) h.emplace_back("Referer", "http://" + hosts[pick(rng)] + "/");
        if (coin(rng) == 0) h.emplace_back("Sec-Fetch-Dest", coin(rng) ? "iframe" : "document");
        if (i % 97 == 0) core.activate(site("osn.com"), site("pub.com"));
        auto p = get("http://" + host + "/", h);
        if (p.ctx.url.host == host && site(host) != p.ctx.site &&
            !core.state().consented({site(host), p.ctx.site})) {
            ASSERT_FALSE(cg::find_header(p.headers, "Cookie")) << host << " on " << p.ctx.site.value();
        }
    }
}
