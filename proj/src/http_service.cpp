#include "gridstab/http_service.hpp"

#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <list>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "httplib.h"

#include "gridstab/error.hpp"

namespace gridstab {
namespace {

using json = nlohmann::json;

json error_doc(const std::string& code, const std::string& message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(render_json(body), "application/json");
}

// Runs fn and maps failures onto status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        reply(res, e.is_input_error() ? 400 : 422, error_doc(e.code(), e.what()));
    } catch (const json::exception& e) {
        reply(res, 400, error_doc("ParseError", e.what()));
    } catch (const std::exception& e) {
        reply(res, 500, error_doc("InternalError", e.what()));
    }
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body.empty() ? std::string("{}") : req.body);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body: ") + e.what());
    }
}

struct Job {
    std::string id;
    std::string status = "queued";  // queued | running | done | failed
    json request;
    json result;
    json error;
    int http_status = 200;
};

}  // namespace

int service_port_from_env(int fallback) {
    const char* env = std::getenv("GRIDSTAB_PORT");
    if (!env || !*env) return fallback;
    char* end = nullptr;
    const long p = std::strtol(env, &end, 10);
    if (*end != '\0' || p < 0 || p > 65535) throw ParseError(std::string("bad GRIDSTAB_PORT: ") + env);
    return int(p);
}

struct HttpService::Impl {
    ServiceOptions opt;
    httplib::Server server;
    std::thread listener;
    int bound_port = 0;

    std::mutex mu;
    std::condition_variable cv;
    bool stopping = false;
    std::uint64_t next_id = 1;
    // most recently touched first
    std::list<std::shared_ptr<Job>> lru;
    std::unordered_map<std::string, std::list<std::shared_ptr<Job>>::iterator> jobs;
    std::deque<std::shared_ptr<Job>> queue;
    std::vector<std::thread> workers;

    explicit Impl(ServiceOptions o) : opt(std::move(o)) {
        if (opt.job_cap == 0) opt.job_cap = 1;
        if (opt.workers == 0) opt.workers = 1;
        routes();
        for (unsigned i = 0; i < opt.workers; ++i) workers.emplace_back([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lk(mu);
            stopping = true;
        }
        cv.notify_all();
        server.stop();
        if (listener.joinable()) listener.join();
        for (auto& w : workers) w.join();
    }

    std::shared_ptr<Job> submit(json request) {
        auto job = std::make_shared<Job>();
        job->request = std::move(request);
        std::lock_guard lk(mu);
        job->id = std::to_string(next_id++);
        lru.push_front(job);
        jobs[job->id] = lru.begin();
        while (lru.size() > opt.job_cap) {
            jobs.erase(lru.back()->id);
            lru.pop_back();
        }
        queue.push_back(job);
        cv.notify_one();
        return job;
    }

    void work() {
        for (;;) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lk(mu);
                cv.wait(lk, [&] { return stopping || !queue.empty(); });
                if (stopping) return;
                job = queue.front();
                queue.pop_front();
                job->status = "running";
            }
            json result, error;
            int status = 200;
            try {
                result = execute("heatmap", job->request, opt.ctx);
            } catch (const Error& e) {
                status = e.is_input_error() ? 400 : 422;
                error = error_doc(e.code(), e.what())["error"];
            } catch (const std::exception& e) {
                status = 500;
                error = error_doc("InternalError", e.what())["error"];
            }
            std::lock_guard lk(mu);
            job->result = std::move(result);
            job->error = std::move(error);
            job->http_status = status;
            job->status = status == 200 ? "done" : "failed";
        }
    }

    json job_doc(const Job& j) {
        json d{{"job_id", j.id}, {"status", j.status}};
        if (j.status == "done") d["result"] = j.result;
        if (j.status == "failed") d["error"] = j.error;
        return d;
    }

    void post(const std::string& path, const std::string& op) {
        server.Post(path, [this, op](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, execute(op, parse_body(req), opt.ctx)); });
        });
    }

    void routes() {
        server.Get("/feeder", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json r = json::object();
                if (req.has_param("path")) r["feeder"] = req.get_param_value("path");
                reply(res, 200, execute("feeder", r, opt.ctx));
            });
        });
        post("/acrit", "acrit");
        post("/sweep", "sweep");
        post("/simulate", "simulate");
        post("/metrics", "metrics");
        server.Post("/heatmap", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = parse_body(req);
                const bool async = body.is_object() && body.value("async", false);
                if (body.is_object()) body.erase("async");
                if (!async) {
                    reply(res, 200, execute("heatmap", body, opt.ctx));
                    return;
                }
                const auto job = submit(std::move(body));
                std::lock_guard lk(mu);
                reply(res, 202, job_doc(*job));
            });
        });
        server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lk(mu);
            const auto it = jobs.find(req.matches[1].str());
            if (it == jobs.end()) {
                reply(res, 404, error_doc("UnknownJob", "no job " + req.matches[1].str()));
                return;
            }
            lru.splice(lru.begin(), lru, it->second);
            reply(res, 200, job_doc(**it->second));
        });
    }
};

HttpService::HttpService(ServiceOptions opt) : impl_(std::make_unique<Impl>(std::move(opt))) {}
HttpService::~HttpService() = default;

int HttpService::start() {
    auto& im = *impl_;
    if (im.opt.port == 0) im.bound_port = im.server.bind_to_any_port(im.opt.host);
    else if (im.server.bind_to_port(im.opt.host, im.opt.port)) im.bound_port = im.opt.port;
    else im.bound_port = -1;
    if (im.bound_port < 0) throw std::runtime_error("cannot bind " + im.opt.host + ":" + std::to_string(im.opt.port));
    im.listener = std::thread([&im] { im.server.listen_after_bind(); });
    im.server.wait_until_ready();
    return im.bound_port;
}

void HttpService::wait() {
    if (impl_->listener.joinable()) impl_->listener.join();
}

void HttpService::stop() { impl_->server.stop(); }

int HttpService::port() const { return impl_->bound_port; }

}  // namespace gridstab
