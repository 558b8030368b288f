#include <random>

#include <gtest/gtest.h>

#include "cookiegate/replay.hpp"
#include "generator.hpp"
#include "oracle.hpp"

namespace cg = cookiegate;

namespace {

const cg::SuffixRuleSet& rules() { return cg::bundled_suffix_rules(); }

constexpr int kTraces = 300;

template <class F>
void for_traces(std::uint64_t seed, F&& check) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < kTraces; ++i) {
        auto t = gen::random_trace(rng);
        SCOPED_TRACE(cg::to_json(t).dump());
        check(t);
        if (::testing::Test::HasFatalFailure()) return;
    }
}

}  // namespace

TEST(GeneratorProperty, RespectsLimits) {
    for_traces(1, [](const cg::SessionTrace& t) {
        std::set<cg::RegistrableDomain> sites, tps;
        std::size_t requests = 0;
        for (const auto& p : t.pages) {
            auto top = cg::registrable_domain(cg::parse_url(p.top_level_url)->host, rules());
            requests += p.requests.size();
            for (const auto& r : p.requests) {
                auto d = cg::registrable_domain(cg::parse_url(r.url)->host, rules());
                if (d != top) tps.insert(d);
            }
            sites.insert(top);
        }
        ASSERT_LE(requests, 20u);
        ASSERT_LE(tps.size(), 4u);
        // Top-level sites come from the site pool plus third parties visited before embedding.
        ASSERT_LE(sites.size(), 9u);
    });
}

TEST(GeneratorProperty, TracesSurviveJsonRoundTrip) {
    for_traces(2, [](const cg::SessionTrace& t) {
        auto again = cg::parse_trace(cg::to_json(t).dump());
        ASSERT_EQ(cg::to_json(again), cg::to_json(t));
    });
}

TEST(ReplayProperty, EngineMatchesOracle) {
    for_traces(3, [](const cg::SessionTrace& t) {
        for (auto p : cg::kAllPolicies) {
            auto engine = cg::replay(t, p, rules());
            auto model = oracle::simulate(t, p);
            ASSERT_EQ(engine.report, model.report) << cg::to_string(p);
            std::size_t q = 0;
            for (const auto& [k, v] : engine.final_jar.quarantine()) q += v.size();
            ASSERT_EQ(q, model.quarantined);
            ASSERT_EQ(engine.final_jar.active().size(), model.active.size());
        }
    });
}

TEST(ReplayProperty, EngineMatchesOracleWithDrop) {
    for_traces(4, [](const cg::SessionTrace& t) {
        ASSERT_EQ(cg::simulate(t, cg::PolicyKind::InteractionBased, rules(), {true}),
                  oracle::simulate(t, cg::PolicyKind::InteractionBased, true).report);
    });
}

TEST(ReplayProperty, NoConsentNoCookie) {
    for_traces(5, [](const cg::SessionTrace& t) {
        auto r = cg::simulate(t, cg::PolicyKind::InteractionBased, rules());
        ASSERT_TRUE(r.non_consented_pairs.empty());
        ASSERT_TRUE(cg::simulate(t, cg::PolicyKind::BlockThirdParty, rules()).non_consented_pairs.empty());
    });
}

TEST(ReplayProperty, FirstPartyStreamIdenticalAcrossPolicies) {
    for_traces(6, [](const cg::SessionTrace& t) {
        auto reference = cg::first_party_stream(cg::simulate(t, cg::PolicyKind::AcceptAll, rules()));
        for (auto p : cg::kAllPolicies) ASSERT_EQ(cg::first_party_stream(cg::simulate(t, p, rules())), reference);
    });
}

TEST(ReplayProperty, BaselineDominance) {
    for_traces(7, [](const cg::SessionTrace& t) {
        auto table = cg::compare(t, cg::kAllPolicies, rules());
        for (const auto& c : table.checks) ASSERT_TRUE(c.passed) << c.name;
        auto no_clicks = t;
        no_clicks.events.clear();
        no_clicks.whitelist.clear();
        ASSERT_TRUE(cg::simulate(no_clicks, cg::PolicyKind::InteractionBased, rules()).cookie_bearing_pairs.empty());
    });
}

TEST(ReplayProperty, Deterministic) {
    for_traces(8, [](const cg::SessionTrace& t) {
        auto a = cg::to_json(cg::compare(t, cg::kAllPolicies, rules())).dump();
        auto b = cg::to_json(cg::compare(t, cg::kAllPolicies, rules())).dump();
        ASSERT_EQ(a, b);
    });
}
