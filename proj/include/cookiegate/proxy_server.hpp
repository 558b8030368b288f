#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "cookiegate/proxy.hpp"

namespace cookiegate {

struct ReloadResult {
    std::string frame_id;
    std::string url;
    int status = 0;                      // upstream status, 502 if unreachable
    std::optional<std::string> cookie;   // Cookie header that went upstream
    std::size_t released = 0;
};

/// HTTP forward proxy plus JSON control API. The constructor loads every
/// configured file and binds both listeners, so a constructed server is
/// ready to start().
class ProxyServer {
public:
    explicit ProxyServer(ProxyConfig config);
    ~ProxyServer();

    ProxyServer(const ProxyServer&) = delete;
    ProxyServer& operator=(const ProxyServer&) = delete;

    void start();
    /// Stops both listeners, closes open connections and flushes persistence.
    /// Safe to call more than once.
    void stop();

    std::uint16_t proxy_port() const;
    std::uint16_t control_port() const;

    ProxyCore& core() noexcept { return *core_; }

    /// Reissues the frame's document request with its cookies attached.
    /// nullopt for an unknown frame (no network traffic happens).
    std::optional<ReloadResult> execute_reload(const std::string& frame_id);

    /// Persists the whitelist (called after every whitelist mutation).
    void persist_whitelist();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    ProxyConfig config_;
    std::unique_ptr<ProxyCore> core_;
};

/// Blocks serving `config` until SIGINT or SIGTERM, then shuts down cleanly.
void run(const ProxyConfig& config);

}  // namespace cookiegate
