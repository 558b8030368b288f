#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "cookiegate/proxy_server.hpp"
#include "cookiegate/replay.hpp"

namespace cg = cookiegate;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitTrace = 2;

struct Failure {
    int code;
    std::string message;
};

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    try {
        cg::write_file_atomic(path, content);
    } catch (const std::exception& e) {
        throw Failure{1, "cannot write " + path + ": " + e.what()};
    }
}

cg::PolicyKind policy_or_throw(const std::string& name) {
    auto p = cg::parse_policy(name);
    if (!p) throw Failure{kExitUsage, "unknown policy \"" + name + "\" (accept-all, block-third, visited, interaction)"};
    return *p;
}

cg::SuffixRuleSet rules_from(const std::string& path) {
    if (path.empty()) return cg::bundled_suffix_rules();
    try {
        return cg::load_suffix_rules_file(path);
    } catch (const std::exception& e) {
        throw Failure{1, path + ": " + e.what()};
    }
}

cg::SessionTrace trace_from(const std::string& path) {
    try {
        return cg::load_trace_file(path);
    } catch (const std::exception& e) {
        throw Failure{kExitTrace, e.what()};
    }
}

std::vector<cg::PolicyKind> policy_list(const std::string& names) {
    if (names == "all") return {std::begin(cg::kAllPolicies), std::end(cg::kAllPolicies)};
    std::vector<cg::PolicyKind> out;
    std::stringstream in(names);
    for (std::string name; std::getline(in, name, ',');) out.push_back(policy_or_throw(name));
    if (out.empty()) throw Failure{kExitUsage, "--policies is empty"};
    return out;
}

std::string with_newline(std::string s) {
    s.push_back('\n');
    return s;
}

struct ServeArgs {
    std::string config, listen, control, policy, suffix_list, whitelist, jar;
    bool drop = false;
};

int serve(const ServeArgs& a) {
    cg::ProxyConfig config;
    try {
        if (!a.config.empty()) config = cg::load_config_file(a.config);
    } catch (const std::exception& e) {
        throw Failure{1, e.what()};
    }
    cg::apply_env_overrides(config, [](const char* name) { return std::getenv(name); });
    if (!a.listen.empty()) config.listen_address = a.listen;
    if (!a.control.empty()) config.control_address = a.control;
    if (!a.policy.empty()) config.policy = policy_or_throw(a.policy);
    if (!a.suffix_list.empty()) config.suffix_list_path = a.suffix_list;
    if (!a.whitelist.empty()) config.whitelist_path = a.whitelist;
    if (!a.jar.empty()) config.jar_persistence_path = a.jar;
    if (a.drop) config.drop_new_third_party_cookies = true;
    try {
        cg::run(config);
    } catch (const cg::StartupError& e) {
        throw Failure{1, std::string("startup: ") + e.what()};
    }
    return 0;
}

struct ReplayArgs {
    std::string trace, policy = "interaction", policies = "all", out = "-", format = "json", suffix_list;
    bool with_latency = false, drop = false;
};

int replay(const ReplayArgs& a) {
    auto policy = policy_or_throw(a.policy);
    auto rules = rules_from(a.suffix_list);
    auto trace = trace_from(a.trace);
    auto report = cg::simulate(trace, policy, rules, {a.drop});
    if (a.format == "csv")
        write_output(a.out, cg::to_csv(report));
    else
        write_output(a.out, with_newline(cg::to_json(report, a.with_latency).dump(2)));
    return 0;
}

int compare(const ReplayArgs& a) {
    auto policies = policy_list(a.policies);
    auto rules = rules_from(a.suffix_list);
    auto trace = trace_from(a.trace);
    auto table = cg::compare(trace, policies, rules, {a.drop});
    if (a.format == "csv")
        write_output(a.out, cg::to_csv(table, a.with_latency));
    else
        write_output(a.out, with_newline(cg::to_json(table, a.with_latency).dump(2)));
    return 0;
}

struct WhitelistArgs {
    std::string file = "whitelist.json", site, tp, suffix_list;
};

int whitelist(const std::string& op, const WhitelistArgs& a) {
    auto rules = rules_from(a.suffix_list);
    std::set<cg::SitePair> entries;
    try {
        entries = cg::load_whitelist(a.file, rules);
    } catch (const std::exception& e) {
        throw Failure{1, a.file + ": " + e.what()};
    }
    if (op == "list") {
        for (const auto& p : entries) std::cout << p.third_party.value() << " @ " << p.site.value() << "\n";
        return 0;
    }
    if (a.site.empty() || a.tp.empty()) throw Failure{kExitUsage, "whitelist " + op + " needs --site and --tp"};
    cg::SitePair pair{cg::registrable_domain(a.tp, rules), cg::registrable_domain(a.site, rules)};
    if (pair.third_party == pair.site)
        throw Failure{1, "third party and site are the same party (" + pair.site.value() + ")"};
    if (op == "add")
        entries.insert(pair);
    else
        entries.erase(pair);
    cg::save_whitelist(a.file, entries);
    return 0;
}

struct ReportArgs {
    std::string control = "127.0.0.1:8081", format = "json", out = "-";
};

int report(const ReportArgs& a) {
    auto hp = cg::parse_host_port(a.control);
    if (!hp) throw Failure{kExitUsage, "bad --control address \"" + a.control + "\""};
    httplib::Client client(hp->host, hp->port);
    client.set_connection_timeout(5);
    auto res = client.Get("/ctl/v1/report");
    if (!res) throw Failure{1, "control API unreachable at " + hp->str()};
    if (res->status != 200) throw Failure{1, "control API returned " + std::to_string(res->status)};
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
        if (a.format == "csv") {
            write_output(a.out, cg::to_csv(cg::report_from_json(body)));
            return 0;
        }
    } catch (const std::exception& e) {
        throw Failure{1, std::string("bad report from control API: ") + e.what()};
    }
    write_output(a.out, with_newline(body.dump(2)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cookiegate: interaction-gated third-party cookie proxy and trace replayer"};
    app.require_subcommand(1);

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Run the proxy and control API until SIGINT/SIGTERM");
    serve_cmd->add_option("--config", serve_args.config, "JSON config file");
    serve_cmd->add_option("--listen", serve_args.listen, "Proxy listen address host:port");
    serve_cmd->add_option("--control", serve_args.control, "Control API address host:port");
    serve_cmd->add_option("--policy", serve_args.policy, "accept-all | block-third | visited | interaction");
    serve_cmd->add_option("--suffix-list", serve_args.suffix_list, "Public suffix list file");
    serve_cmd->add_option("--whitelist", serve_args.whitelist, "Whitelist file");
    serve_cmd->add_option("--jar", serve_args.jar, "Cookie jar persistence file");
    serve_cmd->add_flag("--drop-new-third-party-cookies", serve_args.drop, "Drop instead of quarantine");

    ReplayArgs replay_args;
    const std::set<std::string> formats{"json", "csv"};
    auto* replay_cmd = app.add_subcommand("replay", "Replay a trace under one policy");
    replay_cmd->add_option("trace", replay_args.trace, "Trace JSON file")->required();
    replay_cmd->add_option("--policy", replay_args.policy, "accept-all | block-third | visited | interaction");
    replay_cmd->add_option("--out", replay_args.out, "Output file, - for stdout");
    replay_cmd->add_option("--format", replay_args.format, "json | csv")->check(CLI::IsMember(formats));
    replay_cmd->add_option("--suffix-list", replay_args.suffix_list, "Public suffix list file");
    replay_cmd->add_flag("--with-latency", replay_args.with_latency, "Include decision latency");
    replay_cmd->add_flag("--drop-new-third-party-cookies", replay_args.drop, "Drop instead of quarantine");

    ReplayArgs compare_args;
    auto* compare_cmd = app.add_subcommand("compare", "Replay a trace under several policies");
    compare_cmd->add_option("trace", compare_args.trace, "Trace JSON file")->required();
    compare_cmd->add_option("--policies", compare_args.policies, "all, or a comma-separated list");
    compare_cmd->add_option("--out", compare_args.out, "Output file, - for stdout");
    compare_cmd->add_option("--format", compare_args.format, "json | csv")->check(CLI::IsMember(formats));
    compare_cmd->add_option("--suffix-list", compare_args.suffix_list, "Public suffix list file");
    compare_cmd->add_flag("--with-latency", compare_args.with_latency, "Include decision latency");
    compare_cmd->add_flag("--drop-new-third-party-cookies", compare_args.drop, "Drop instead of quarantine");

    WhitelistArgs wl_args;
    auto* wl_cmd = app.add_subcommand("whitelist", "Inspect or edit a whitelist file");
    wl_cmd->require_subcommand(1);
    std::string wl_op;
    for (std::string op : {"list", "add", "remove"}) {
        auto* sub = wl_cmd->add_subcommand(op);
        sub->add_option("--file", wl_args.file, "Whitelist file");
        sub->add_option("--suffix-list", wl_args.suffix_list, "Public suffix list file");
        if (op != "list") {
            sub->add_option("--site", wl_args.site, "Top-level site")->required();
            sub->add_option("--tp", wl_args.tp, "Third party")->required();
        }
        sub->callback([&wl_op, op] { wl_op = op; });
    }

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "Fetch the live exposure report from a running proxy");
    report_cmd->add_option("--control", report_args.control, "Control API address host:port");
    report_cmd->add_option("--format", report_args.format, "json | csv")->check(CLI::IsMember(formats));
    report_cmd->add_option("--out", report_args.out, "Output file, - for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (serve_cmd->parsed()) return serve(serve_args);
        if (replay_cmd->parsed()) return replay(replay_args);
        if (compare_cmd->parsed()) return compare(compare_args);
        if (wl_cmd->parsed()) return whitelist(wl_op, wl_args);
        if (report_cmd->parsed()) return report(report_args);
    } catch (const Failure& f) {
        std::cerr << "cookiegate: " << f.message << "\n";
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "cookiegate: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
