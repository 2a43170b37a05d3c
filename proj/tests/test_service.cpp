#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "gridstab/error.hpp"
#include "gridstab/http_service.hpp"
#include "gridstab/twobus.hpp"
#include "support.hpp"

// after Eigen: resolv.h defines _res as a macro
#include "httplib.h"

using namespace gridstab;
using json = nlohmann::json;
using testing_support::data_path;

namespace {

ServiceOptions options() {
    ServiceOptions o;
    o.port = 0;
    o.ctx.base_dir = GRIDSTAB_DATA_DIR;
    o.ctx.default_feeder = two_bus_raw_b(0.0, 0.2);
    return o;
}

json body(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("request execution") {
    SUBCASE("acrit of the single-phase family") {
        const auto r = execute("acrit", {{"family", "pbc_1ph"}, {"params", {{"x", 0.2}}}});
        CHECK(r["a_crit"].get<double>() == doctest::Approx(10.0).epsilon(1e-6));
        CHECK(r["analytic"].get<double>() == doctest::Approx(10.0));
    }
    SUBCASE("sweep grid") {
        const auto g = parse_grid("0:0.1:20");
        CHECK(g.size() == 201);
        CHECK(g.back() == doctest::Approx(20.0));
        const auto r = execute("sweep", {{"family", "droop_rx"}, {"params", {{"d", 0.0}, {"l1", 0.2}}}, {"a", "0:0.5:5"}});
        for (const auto& p : r["points"])
            CHECK(p["rho"].get<double>() == doctest::Approx(0.2 * p["a"].get<double>()));
        CHECK(sweep_csv(r).rfind("a,rho,stable\n0,0,true\n", 0) == 0);
        CHECK_THROWS_AS(parse_grid("0:0:1"), ParseError);
        CHECK_THROWS_AS(parse_grid("1:0.1"), ParseError);
    }
    SUBCASE("feeder configuration acrit") {
        OpContext ctx;
        ctx.default_feeder = two_bus_raw_b(0.0, 0.2);
        const auto r = execute("acrit", {{"kind", "pbc"}, {"config", {"load"}}}, ctx);
        CHECK(r["a_crit"].get<double>() == doctest::Approx(10.0).epsilon(1e-6));
        CHECK(r["analytic"].is_null());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(execute("nope", json::object()), ParseError);
        CHECK_THROWS_AS(execute("acrit", {{"family", "pbc_phase"}, {"params", {{"cx", 2.3}, {"l2", 0.2}}}}),
                        NoStabilizingGain);
        CHECK_THROWS_AS(execute("heatmap", {{"kind", "pbc"}}), ParseError);
    }
    SUBCASE("metrics of a fixture") {
        OpContext ctx;
        ctx.base_dir = GRIDSTAB_DATA_DIR;
        const auto r = execute("metrics", {{"feeder", "feeders/two_bus_rx.json"}}, ctx);
        REQUIRE(r["lines"].size() == 1);
        CHECK(r["lines"][0]["d"][0].get<double>() == doctest::Approx(0.6));
        CHECK(r["lines"][0]["d"][1].is_null());
        CHECK(metrics_csv(r).find("line,source,load,A,0.6,") != std::string::npos);
    }
}

TEST_CASE("http service") {
    HttpService svc(options());
    const int port = svc.start();
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    SUBCASE("feeder") {
        auto r = cli.Get("/feeder");
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(body(r)["feeder"]["substation"] == "source");
        CHECK(body(r)["metrics"]["lines"].size() == 1);
        r = cli.Get("/feeder?path=feeders/two_bus_phase.json");
        CHECK(body(r)["feeder"]["nodes"][1]["phases"] == "ABC");
    }
    SUBCASE("acrit and byte-identical bodies") {
        const json req{{"family", "pbc_1ph"}, {"params", {{"x", 0.2}}}};
        auto r = cli.Post("/acrit", req.dump(), "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(body(r)["a_crit"].get<double>() == doctest::Approx(10.0).epsilon(1e-6));
        CHECK(r->body == render_json(execute("acrit", req)));
    }
    SUBCASE("synchronous heatmap on the two-bus fixture") {
        auto r = cli.Post("/heatmap", R"({"kind":"pbc","config":[]})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        const auto j = body(r);
        REQUIRE(j["verdicts"].size() == 1);
        CHECK(j["verdicts"][0]["node"] == "load");
        CHECK(j["verdicts"][0]["color"] == "blue");
    }
    SUBCASE("status codes") {
        auto bad_phase = cli.Post("/heatmap",
                                  R"({"kind":"pbc","feeder":{"substation":"s","nodes":[{"id":"s","phases":"ABQ"}],"lines":[]}})",
                                  "application/json");
        REQUIRE(bad_phase);
        CHECK(bad_phase->status == 400);
        CHECK(body(bad_phase)["error"]["code"] == "ParseError");

        auto garbage = cli.Post("/acrit", "{not json", "application/json");
        CHECK(garbage->status == 400);

        auto domain = cli.Post("/acrit", R"({"family":"pbc_phase","params":{"cx":2.3,"l2":0.2}})", "application/json");
        CHECK(domain->status == 422);
        CHECK(body(domain)["error"]["code"] == "NoStabilizingGain");

        auto unknown = cli.Get("/jobs/12345");
        CHECK(unknown->status == 404);
        CHECK(body(unknown)["error"]["code"] == "UnknownJob");
    }
    SUBCASE("async heatmap job") {
        auto r = cli.Post("/heatmap", R"({"kind":"droop","config":[],"async":true})", "application/json");
        REQUIRE(r);
        CHECK(r->status == 202);
        const std::string id = body(r)["job_id"];
        json j;
        for (int i = 0; i < 200; ++i) {
            j = body(cli.Get("/jobs/" + id));
            if (j["status"] == "done" || j["status"] == "failed") break;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        REQUIRE(j["status"] == "done");
        const json sync_req{{"kind", "droop"}, {"config", json::array()}};
        CHECK(j["result"] == execute("heatmap", sync_req, options().ctx));
    }
    SUBCASE("simulate and sweep") {
        auto r = cli.Post("/simulate",
                          R"({"kind":"pbc","config":["load"],"gain_scale":5,"loads":[{"node":"load","p":0.1,"q":0.02}],"horizon":20})",
                          "application/json");
        REQUIRE(r);
        CHECK(r->status == 200);
        CHECK(body(r)["steps"] == 21);
        CHECK(body(r)["converged"] == true);
        auto s = cli.Post("/sweep", R"({"family":"pbc_1ph","params":{"x":0.2},"a":[5,15]})", "application/json");
        CHECK(body(s)["points"][1]["stable"] == false);
    }
    svc.stop();
}

TEST_CASE("job store evicts the least recently used job") {
    auto o = options();
    o.job_cap = 2;
    HttpService svc(o);
    const int port = svc.start();
    httplib::Client cli("127.0.0.1", port);
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
        auto r = cli.Post("/heatmap", R"({"kind":"pbc","config":[],"async":true})", "application/json");
        ids.push_back(body(r)["job_id"]);
    }
    CHECK(cli.Get("/jobs/" + ids[0])->status == 404);
    CHECK(cli.Get("/jobs/" + ids[2])->status == 200);
}

TEST_CASE("port from the environment") {
    ::setenv("GRIDSTAB_PORT", "9123", 1);
    CHECK(service_port_from_env(8750) == 9123);
    ::setenv("GRIDSTAB_PORT", "abc", 1);
    CHECK_THROWS_AS(service_port_from_env(8750), ParseError);
    ::unsetenv("GRIDSTAB_PORT");
    CHECK(service_port_from_env(8750) == 8750);
}
