#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "json.hpp"

#include "gridstab/ops.hpp"

namespace gridstab {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8750;  // 0 picks a free port
    std::size_t job_cap = 100;
    unsigned workers = 2;
    OpContext ctx;
};

/// Port from GRIDSTAB_PORT when set, otherwise `fallback`.
int service_port_from_env(int fallback);

/// Local JSON-over-HTTP front end for execute().
///
///   GET  /feeder           default feeder with metrics (?path= loads another)
///   POST /acrit /sweep /simulate /heatmap
///   GET  /jobs/{id}        status of an async heatmap ({"async": true})
///
/// Errors come back as {"error": {"code", "message"}}: 400 for bad requests,
/// 422 for domain failures, 404 for unknown jobs.
class HttpService {
public:
    explicit HttpService(ServiceOptions opt);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and serves on a background thread. Returns the bound port.
    int start();
    /// Blocks until the service stops.
    void wait();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gridstab
