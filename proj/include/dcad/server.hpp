#pragma once

// Session-oriented JSON service. Service is transport independent; serve()
// mounts it on an HTTP listener.

#include "dcad/io.hpp"
#include "dcad/model.hpp"
#include "dcad/sync.hpp"

#include <chrono>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace dcad {

struct ServiceOptions {
    /// Edits still running after this long answer 202 with a poll URL.
    double async_after_seconds = 1.0;
    /// Sessions idle longer than this are dropped.
    double session_ttl_seconds = 3600.0;
    SyncOptions sync;
};

struct Response {
    int status = 200;
    json body;
};

class Service {
public:
    explicit Service(ServiceOptions opt = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Dispatches by method and path, e.g. ("POST", "/programs/3/edits").
    Response handle(const std::string& method, const std::string& path, const std::string& body);

    Response create_program(const json& body);
    Response update_program(const std::string& id, const json& body);
    Response update_params(const std::string& id, const json& body);
    Response get_program(const std::string& id);
    Response get_mesh(const std::string& id);
    Response post_edit(const std::string& id, const json& body);
    Response poll_edit(const std::string& id, const std::string& eid);
    Response select_option(const std::string& id, const std::string& eid, const json& body);
    Response dump(const std::string& id);

    std::size_t session_count();
    /// Drops sessions idle for longer than the TTL; returns how many.
    std::size_t evict_expired();

private:
    struct EditJob {
        long revision = 0;
        std::shared_future<OptionGallery> future;
        std::optional<OptionGallery> gallery;
        std::string error;
    };

    struct Session {
        std::mutex mutex;
        std::string id;
        std::shared_ptr<const CompiledModel> model;
        std::vector<double> P;
        long revision = 0;
        int next_edit = 0;
        std::map<std::string, std::shared_ptr<EditJob>> edits;
        std::chrono::steady_clock::time_point last_used;
    };

    std::shared_ptr<Session> find(const std::string& id);
    json session_json(const Session& s) const;
    /// Moves a finished job's result into place. Caller holds the session lock.
    static void settle(EditJob& job);

    ServiceOptions opt_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    long next_id_ = 1;
};

/// HTTP transport for a Service. run() blocks until stop() is called from
/// another thread.
class HttpListener {
public:
    explicit HttpListener(Service& service);
    ~HttpListener();

    /// Port 0 picks a free port. Returns the bound port; throws Error.
    int bind(const std::string& host, int port);
    void run();
    void stop();

private:
    std::unique_ptr<httplib::Server> http_;
};

/// Blocks serving HTTP on host:port until the process ends.
void serve(Service& service, const std::string& host, int port);

} // namespace dcad
