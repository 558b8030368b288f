#include "cookiegate/proxy_server.hpp"

#include <algorithm>
#include <array>
#include <csignal>
#include <iostream>

#include <sys/socket.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/write.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/http.hpp>
#include <httplib.h>

namespace cookiegate {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
using tcp = net::ip::tcp;

namespace {

constexpr std::uint64_t kBodyLimit = 64ull << 20;

Instant wall_now() { return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()); }

struct UpstreamResponse {
    unsigned status = 502;
    std::string reason = "Bad Gateway";
    HeaderList headers;
    std::string body;
    bool reached = false;
};

template <class Fields>
HeaderList to_header_list(const Fields& fields) {
    HeaderList out;
    for (const auto& f : fields) out.emplace_back(std::string(f.name_string()), std::string(f.value()));
    return out;
}

nlohmann::json error_body(std::string_view message) { return {{"error", message}}; }

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Open sockets, so that stop() can unblock every connection thread.
struct Connections {
    net::io_context ioc;
    std::atomic<bool> stopping{false};
    std::mutex mutex;
    std::condition_variable cv;
    std::size_t active = 0;
    std::set<int> open_fds;

    void track(int fd) {
        std::lock_guard lock(mutex);
        open_fds.insert(fd);
    }
    void untrack(int fd) {
        std::lock_guard lock(mutex);
        open_fds.erase(fd);
    }
};

// Sends `prepared` upstream over a fresh connection and reads the full response.
UpstreamResponse forward(Connections& conns, const PreparedRequest& prepared, http::verb verb, const std::string& body) {
    auto& ioc = conns.ioc;
    UpstreamResponse out;
    beast::error_code ec;
    tcp::resolver resolver(ioc);
    auto endpoints = resolver.resolve(prepared.ctx.url.host, std::to_string(prepared.ctx.url.port), ec);
    if (ec) return out;
    tcp::socket upstream(ioc);
    net::connect(upstream, endpoints, ec);
    if (ec) return out;
    int fd = upstream.native_handle();
    conns.track(fd);

    http::request<http::string_body> req;
    if (verb == http::verb::unknown)
        req.method_string(prepared.ctx.method);
    else
        req.method(verb);
    req.target(prepared.ctx.url.target());
    req.version(11);
    for (const auto& [name, value] : prepared.headers) req.insert(name, value);
    if (req.find(http::field::host) == req.end()) req.set(http::field::host, prepared.ctx.url.authority());
    req.body() = body;

    http::write(upstream, req, ec);
    if (!ec) {
        beast::flat_buffer buffer;
        http::response_parser<http::string_body> parser;
        parser.body_limit(kBodyLimit);
        if (verb == http::verb::head) parser.skip(true);
        http::read(upstream, buffer, parser, ec);
        if (!ec || ec == http::error::end_of_stream) {
            auto& res = parser.get();
            out.status = res.result_int();
            out.reason = std::string(res.reason());
            out.headers = to_header_list(res);
            out.body = std::move(res.body());
            out.reached = true;
        }
    }
    conns.untrack(fd);
    upstream.shutdown(tcp::socket::shutdown_both, ec);
    upstream.close(ec);
    return out;
}

void relay(tcp::socket& from, tcp::socket& to) {
    std::array<char, 16384> buf;
    beast::error_code ec;
    while (true) {
        auto n = from.read_some(net::buffer(buf), ec);
        if (ec || n == 0) break;
        net::write(to, net::buffer(buf.data(), n), ec);
        if (ec) break;
    }
    to.shutdown(tcp::socket::shutdown_send, ec);
}

// Opaque CONNECT tunnel; no policy applies inside.
void tunnel(Connections& conns, tcp::socket& client, beast::flat_buffer& pending, std::string_view target) {
    auto& ioc = conns.ioc;
    beast::error_code ec;
    auto hp = parse_host_port(target);
    auto fail = [&](std::string_view status) {
        std::string msg = "HTTP/1.1 " + std::string(status) + "\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
        net::write(client, net::buffer(msg), ec);
    };
    if (!hp) return fail("400 Bad Request");
    tcp::resolver resolver(ioc);
    auto endpoints = resolver.resolve(hp->host, std::to_string(hp->port), ec);
    if (ec) return fail("502 Bad Gateway");
    tcp::socket upstream(ioc);
    net::connect(upstream, endpoints, ec);
    if (ec) return fail("502 Bad Gateway");
    int fd = upstream.native_handle();
    conns.track(fd);

    std::string ok = "HTTP/1.1 200 Connection Established\r\n\r\n";
    net::write(client, net::buffer(ok), ec);
    if (!ec && pending.size() > 0) net::write(upstream, pending.data(), ec);
    if (!ec) {
        std::thread back([&] { relay(upstream, client); });
        relay(client, upstream);
        back.join();
    }
    conns.untrack(fd);
    upstream.close(ec);
}

void handle_connection(Connections& conns, ProxyCore& core, tcp::socket client) {
    beast::error_code ec;
    auto remote = client.remote_endpoint(ec);
    std::string client_id = ec ? "unknown" : remote.address().to_string();
    beast::flat_buffer buffer;

    while (!conns.stopping) {
        http::request_parser<http::string_body> parser;
        parser.body_limit(kBodyLimit);
        http::read(client, buffer, parser, ec);
        if (ec) {
            if (&ec.category() == &http::make_error_code(http::error::end_of_stream).category() &&
                ec != http::error::end_of_stream &&
                ec != http::error::partial_message) {
                http::response<http::string_body> bad{http::status::bad_request, 11};
                bad.set(http::field::connection, "close");
                bad.body() = "malformed request\n";
                bad.prepare_payload();
                http::write(client, bad, ec);
            }
            break;
        }
        auto& req = parser.get();
        std::string target(req.target());

        if (req.method() == http::verb::connect) {
            tunnel(conns, client, buffer, target);
            break;
        }

        auto url = parse_url(target);
        if (!url && target.starts_with("/")) {
            if (auto host = req.find(http::field::host); host != req.end())
                url = parse_url("http://" + std::string(host->value()) + target);
        }
        if (!url) {
            http::response<http::string_body> bad{http::status::bad_request, req.version()};
            bad.set(http::field::connection, "close");
            bad.body() = "proxy requests need an absolute http URL\n";
            bad.prepare_payload();
            http::write(client, bad, ec);
            break;
        }

        auto now = wall_now();
        auto prepared = core.prepare(std::string(req.method_string()), *url, to_header_list(req), client_id, now);
        auto upstream = forward(conns, prepared, req.method(), req.body());

        http::response<http::string_body> res;
        res.version(req.version());
        if (!upstream.reached) {
            res.result(http::status::bad_gateway);
            res.set(http::field::connection, "close");
            res.body() = "upstream unreachable: " + url->authority() + "\n";
            res.prepare_payload();
            http::write(client, res, ec);
            break;
        }
        res.result(upstream.status);
        res.reason(upstream.reason);
        for (const auto& [name, value] : core.finish(prepared, upstream.headers, now)) res.insert(name, value);
        res.body() = std::move(upstream.body);

        bool keep_alive = req.keep_alive() && res.keep_alive() && !res.need_eof();
        http::write(client, res, ec);
        if (ec || !keep_alive) break;
    }
    client.shutdown(tcp::socket::shutdown_both, ec);
}

}  // namespace

struct ProxyServer::Impl {
    Connections conns;
    tcp::acceptor acceptor{conns.ioc};
    httplib::Server control;
    std::thread accept_thread;
    std::thread control_thread;
    std::mutex persist_mutex;
    bool started = false;
    bool stopped = false;
    std::uint16_t proxy_port = 0;
    std::uint16_t control_port = 0;
    std::string proxy_host;
};

ProxyServer::ProxyServer(ProxyConfig config) : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
    validate(config_);

    SuffixRuleSet rules;
    try {
        rules = config_.suffix_list_path.empty() ? bundled_suffix_rules() : load_suffix_rules_file(config_.suffix_list_path);
    } catch (const std::exception& e) {
        throw StartupError(std::string("suffix list: ") + e.what());
    }
    core_ = std::make_unique<ProxyCore>(std::move(rules), config_.policy,
                                        PolicyOptions{config_.drop_new_third_party_cookies});
    try {
        if (!config_.whitelist_path.empty()) core_->seed_whitelist(load_whitelist(config_.whitelist_path, core_->rules()));
        if (!config_.jar_persistence_path.empty())
            core_->seed_jar(load_jar(config_.jar_persistence_path, core_->rules()));
    } catch (const std::exception& e) {
        throw StartupError(std::string("persistence: ") + e.what());
    }

    auto listen = *parse_host_port(config_.listen_address);
    try {
        tcp::resolver resolver(impl_->conns.ioc);
        auto endpoint = resolver.resolve(listen.host, std::to_string(listen.port))->endpoint();
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
        impl_->proxy_port = impl_->acceptor.local_endpoint().port();
        impl_->proxy_host = endpoint.address().to_string();
    } catch (const boost::system::system_error& e) {
        throw StartupError("cannot bind proxy listener " + listen.str() + ": " + e.code().message());
    }

    auto control = *parse_host_port(config_.control_address);
    // httplib's default adds SO_REUSEPORT, which lets a second instance share the port silently.
    impl_->control.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (control.port == 0) {
        int port = impl_->control.bind_to_any_port(control.host);
        if (port < 0) throw StartupError("cannot bind control listener " + control.str());
        impl_->control_port = static_cast<std::uint16_t>(port);
    } else {
        if (!impl_->control.bind_to_port(control.host, control.port))
            throw StartupError("cannot bind control listener " + control.str());
        impl_->control_port = control.port;
    }

    auto& svr = impl_->control;
    auto& core = *core_;
    auto parse_pair = [&core](const httplib::Request& req, httplib::Response& res) -> std::optional<SitePair> {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            reply(res, 400, error_body("body must be JSON"));
            return std::nullopt;
        }
        if (!body.is_object() || !body.contains("site") || !body.contains("thirdParty") || !body["site"].is_string() ||
            !body["thirdParty"].is_string()) {
            reply(res, 400, error_body("expected {\"site\": ..., \"thirdParty\": ...}"));
            return std::nullopt;
        }
        auto site = body["site"].get<std::string>();
        auto tp = body["thirdParty"].get<std::string>();
        if (site.empty() || tp.empty()) {
            reply(res, 422, error_body("empty domain"));
            return std::nullopt;
        }
        SitePair pair{registrable_domain(tp, core.rules()), registrable_domain(site, core.rules())};
        if (pair.third_party == pair.site) {
            reply(res, 422, error_body("thirdParty and site are the same party"));
            return std::nullopt;
        }
        return pair;
    };

    svr.Get("/ctl/v1/health", [&core](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"status", "ok"}, {"policy", to_string(core.policy())}});
    });
    svr.Get("/ctl/v1/sites", [&core](const httplib::Request&, httplib::Response& res) {
        auto arr = nlohmann::json::array();
        for (const auto& s : core.sites()) arr.push_back(s.value());
        reply(res, 200, arr);
    });
    svr.Get(R"(/ctl/v1/sites/([^/]+))", [&core](const httplib::Request& req, httplib::Response& res) {
        auto view = core.site_view(registrable_domain(req.matches[1].str(), core.rules()), wall_now());
        if (!view) return reply(res, 404, error_body("unknown site"));
        reply(res, 200, to_json(*view));
    });
    svr.Post("/ctl/v1/activate", [&core, parse_pair](const httplib::Request& req, httplib::Response& res) {
        auto pair = parse_pair(req, res);
        if (!pair) return;
        auto sites = core.sites();
        if (std::find(sites.begin(), sites.end(), pair->site) == sites.end())
            return reply(res, 404, error_body("unknown site"));
        auto released = core.activate(pair->third_party, pair->site);
        reply(res, 200,
              {{"site", pair->site.value()},
               {"thirdParty", pair->third_party.value()},
               {"released", released},
               {"frames", core.frames_for(*pair)}});
    });
    svr.Get("/ctl/v1/whitelist", [&core](const httplib::Request&, httplib::Response& res) {
        auto arr = nlohmann::json::array();
        for (const auto& p : core.whitelist())
            arr.push_back({{"thirdParty", p.third_party.value()}, {"site", p.site.value()}});
        reply(res, 200, arr);
    });
    svr.Post("/ctl/v1/whitelist", [this, parse_pair](const httplib::Request& req, httplib::Response& res) {
        auto pair = parse_pair(req, res);
        if (!pair) return;
        core_->whitelist_add(pair->third_party, pair->site);
        persist_whitelist();
        reply(res, 200, {{"site", pair->site.value()}, {"thirdParty", pair->third_party.value()}, {"whitelisted", true}});
    });
    svr.Delete("/ctl/v1/whitelist", [this, parse_pair](const httplib::Request& req, httplib::Response& res) {
        auto pair = parse_pair(req, res);
        if (!pair) return;
        core_->whitelist_remove(pair->third_party, pair->site);
        persist_whitelist();
        reply(res, 200, {{"site", pair->site.value()}, {"thirdParty", pair->third_party.value()}, {"whitelisted", false}});
    });
    svr.Post("/ctl/v1/reload", [this](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            return reply(res, 400, error_body("body must be JSON"));
        }
        if (!body.is_object() || !body.contains("frameId") || !body["frameId"].is_string())
            return reply(res, 400, error_body("expected {\"frameId\": ...}"));
        auto result = execute_reload(body["frameId"].get<std::string>());
        if (!result) return reply(res, 404, error_body("unknown frame"));
        reply(res, 200,
              {{"frameId", result->frame_id},
               {"url", result->url},
               {"status", result->status},
               {"cookie", result->cookie ? nlohmann::json(*result->cookie) : nlohmann::json(nullptr)},
               {"released", result->released}});
    });
    svr.Get("/ctl/v1/report", [&core](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, to_json(core.report(), true));
    });
}

ProxyServer::~ProxyServer() { stop(); }

void ProxyServer::start() {
    if (impl_->started) return;
    impl_->started = true;
    impl_->control_thread = std::thread([this] { impl_->control.listen_after_bind(); });
    impl_->accept_thread = std::thread([this] {
        auto& conns = impl_->conns;
        while (!conns.stopping) {
            tcp::socket socket(conns.ioc);
            beast::error_code ec;
            impl_->acceptor.accept(socket, ec);
            if (conns.stopping) break;
            if (ec) continue;
            int fd = socket.native_handle();
            {
                std::lock_guard lock(conns.mutex);
                ++conns.active;
                conns.open_fds.insert(fd);
            }
            std::thread([this, &conns, fd, s = std::move(socket)]() mutable {
                try {
                    handle_connection(conns, *core_, std::move(s));
                } catch (const std::exception& e) {
                    std::cerr << "cookiegate: connection error: " << e.what() << "\n";
                }
                std::lock_guard lock(conns.mutex);
                conns.open_fds.erase(fd);
                --conns.active;
                conns.cv.notify_all();
            }).detach();
        }
    });
}

void ProxyServer::stop() {
    if (!impl_ || impl_->stopped) return;
    impl_->stopped = true;
    auto& conns = impl_->conns;
    conns.stopping = true;
    if (impl_->started) {
        // Wake the blocking accept with a throwaway connection.
        beast::error_code ec;
        tcp::socket wake(conns.ioc);
        wake.connect({net::ip::make_address(impl_->proxy_host), impl_->proxy_port}, ec);
        wake.close(ec);
        impl_->accept_thread.join();
        impl_->control.stop();
        impl_->control_thread.join();

        std::unique_lock lock(conns.mutex);
        for (int fd : conns.open_fds) ::shutdown(fd, SHUT_RDWR);
        conns.cv.wait(lock, [&conns] { return conns.active == 0; });
    }
    beast::error_code ec;
    impl_->acceptor.close(ec);

    try {
        persist_whitelist();
        if (!config_.jar_persistence_path.empty()) save_jar(config_.jar_persistence_path, core_->jar());
    } catch (const std::exception& e) {
        std::cerr << "cookiegate: failed to flush state: " << e.what() << "\n";
    }
}

std::uint16_t ProxyServer::proxy_port() const { return impl_->proxy_port; }
std::uint16_t ProxyServer::control_port() const { return impl_->control_port; }

std::optional<ReloadResult> ProxyServer::execute_reload(const std::string& frame_id) {
    auto now = wall_now();
    auto plan = core_->plan_reload(frame_id, now);
    if (!plan) return std::nullopt;
    ReloadResult result;
    result.frame_id = frame_id;
    result.url = plan->request.ctx.url.str();
    result.cookie = find_header(plan->request.headers, "Cookie");
    result.released = plan->released;
    auto upstream = forward(impl_->conns, plan->request, http::verb::get, {});
    result.status = static_cast<int>(upstream.status);
    if (upstream.reached) core_->finish(plan->request, upstream.headers, now);
    return result;
}

void ProxyServer::persist_whitelist() {
    if (config_.whitelist_path.empty()) return;
    std::lock_guard lock(impl_->persist_mutex);
    save_whitelist(config_.whitelist_path, core_->whitelist());
}

void run(const ProxyConfig& config) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ProxyServer server(config);
    server.start();
    std::cerr << "cookiegate: proxy on port " << server.proxy_port() << ", control API on port "
              << server.control_port() << ", policy " << to_string(config.policy) << "\n";
    int received = 0;
    sigwait(&signals, &received);
    std::cerr << "cookiegate: shutting down\n";
    server.stop();
}

}  // namespace cookiegate
