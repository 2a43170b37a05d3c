#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "gridstab/error.hpp"
#include "gridstab/http_service.hpp"
#include "gridstab/ops.hpp"

using namespace gridstab;
using json = nlohmann::json;

namespace {

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

json read_request(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open request file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(tok);
    return out;
}

struct Common {
    std::string out;
    std::string request;
    std::string format;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_format) {
    c.format = default_format;
    sub->add_option("--out,-o", c.out, "write output here instead of stdout");
    sub->add_option("--request", c.request, "JSON request file (same document as the HTTP API)");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

void emit(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw ParseError("cannot write " + c.out);
    f << text;
}

struct FamilyArgs {
    std::string family;
    double x = 0, d = 0, l1 = 0, cx = 0, l2 = 0;
    std::string feeder, config, kind;
    double lo = 1e-6, hi = 1e4, tol = 1e-6;
};

void add_family(CLI::App* sub, FamilyArgs& a) {
    sub->add_option("--family", a.family, "pbc_1ph, droop_1ph, pbc_rx, droop_rx, pbc_phase or droop_phase");
    sub->add_option("--x", a.x, "line reactance (*_1ph)");
    sub->add_option("--d", a.d, "R/X ratio (*_rx)");
    sub->add_option("--l1", a.l1, "line length |Z| (*_rx)");
    sub->add_option("--cx", a.cx, "phase ratio (*_phase)");
    sub->add_option("--l2", a.l2, "line length, largest singular value (*_phase)");
    sub->add_option("--feeder", a.feeder, "feeder file, instead of a family");
    sub->add_option("--config", a.config, "comma separated co-located nodes (with --feeder)");
    sub->add_option("--kind", a.kind, "pbc or droop (with --feeder)");
    sub->add_option("--lo", a.lo, "bisection lower bound");
    sub->add_option("--hi", a.hi, "bisection upper bound");
    sub->add_option("--tol", a.tol, "bisection tolerance");
}

json family_request(const FamilyArgs& a) {
    json r;
    if (!a.family.empty()) {
        r["family"] = a.family;
        r["params"] = {{"x", a.x}, {"d", a.d}, {"l1", a.l1}, {"cx", a.cx}, {"l2", a.l2}};
    } else if (!a.feeder.empty()) {
        r["feeder"] = a.feeder;
        r["config"] = split(a.config);
        r["kind"] = a.kind;
    } else {
        throw ParseError("give --family or --feeder/--config/--kind");
    }
    r["bisect"] = {{"lo", a.lo}, {"hi", a.hi}, {"tol", a.tol}};
    return r;
}

struct SamplingArgs {
    int samples = 100;
    double gain_min = 1e-2, gain_max = 1e2;
    std::uint64_t seed = 1;
    bool untied = false;
};

void add_sampling(CLI::App* sub, SamplingArgs& s) {
    sub->add_option("--samples", s.samples, "gain samples per candidate");
    sub->add_option("--gain-min", s.gain_min, "smallest sampled gain");
    sub->add_option("--gain-max", s.gain_max, "largest sampled gain");
    sub->add_option("--seed", s.seed, "random seed");
    sub->add_flag("--untied", s.untied, "sample the PBC angle gain independently");
}

json sampling_request(const SamplingArgs& s) {
    return {{"num_samples", s.samples},
            {"gain_min", s.gain_min},
            {"gain_max", s.gain_max},
            {"seed", s.seed},
            {"tie_pbc", !s.untied}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability toolkit for inverter DER control on radial feeders"};
    app.require_subcommand(1);
    const std::string default_feeder = std::string(GRIDSTAB_DATA_DIR) + "/feeders/ieee123.json";

    Common c_metrics, c_acrit, c_sweep, c_sim, c_heat, c_t1, c_bc;

    auto* metrics = app.add_subcommand("metrics", "per-line and per-path impedance metrics");
    std::string metrics_feeder;
    metrics->add_option("--feeder", metrics_feeder, "feeder file")->required();
    add_common(metrics, c_metrics, "csv");

    auto* acrit = app.add_subcommand("acrit", "critical gain by bisection");
    FamilyArgs acrit_args;
    add_family(acrit, acrit_args);
    add_common(acrit, c_acrit, "json");

    auto* sweep = app.add_subcommand("sweep", "spectral radius over a gain grid");
    FamilyArgs sweep_args;
    std::string grid;
    add_family(sweep, sweep_args);
    sweep->add_option("--a", grid, "gain grid start:step:stop");
    add_common(sweep, c_sweep, "csv");

    auto* simulate = app.add_subcommand("simulate", "quasi-static time series simulation");
    std::string scenario;
    simulate->add_option("--scenario", scenario, "scenario JSON file")->required();
    add_common(simulate, c_sim, "csv");

    auto* heatmap = app.add_subcommand("heatmap", "co-located placement heatmap");
    std::string heat_feeder = default_feeder, heat_config, heat_kind = "pbc";
    SamplingArgs heat_sampling;
    heatmap->add_option("--feeder", heat_feeder, "feeder file");
    heatmap->add_option("--config", heat_config, "comma separated co-located nodes already placed");
    heatmap->add_option("--kind", heat_kind, "pbc or droop");
    add_sampling(heatmap, heat_sampling);
    add_common(heatmap, c_heat, "json");

    auto* experiment = app.add_subcommand("experiment", "reproduction experiments");
    experiment->require_subcommand(1);
    auto* table1 = experiment->add_subcommand("table1", "orig vs scaled-ratio cross application");
    std::string t1_feeder = default_feeder, t1_m = "1,5,10,15", t1_kinds = "pbc,droop", t1_ratios = "rx,phase";
    double t1_factor = 1.5;
    int t1_trials = 10, t1_budget = 500;
    SamplingArgs t1_sampling;
    table1->add_option("--feeder", t1_feeder, "feeder file");
    table1->add_option("--m", t1_m, "comma separated configuration sizes");
    table1->add_option("--kinds", t1_kinds, "comma separated control kinds");
    table1->add_option("--ratios", t1_ratios, "comma separated ratio kinds (rx, phase)");
    table1->add_option("--factor", t1_factor, "ratio multiplier");
    table1->add_option("--trials", t1_trials, "trials per cell");
    table1->add_option("--budget", t1_budget, "random configurations tried per search");
    add_sampling(table1, t1_sampling);
    add_common(table1, c_t1, "csv");

    auto* bc = experiment->add_subcommand("branch-compare", "heatmap colors for two base configurations");
    std::string bc_feeder = default_feeder, bc_chi1 = "node_8,node_53,node_57,node_66",
                bc_chi2 = "node_8,node_53,node_57,node_74";
    SamplingArgs bc_sampling;
    bc->add_option("--feeder", bc_feeder, "feeder file");
    bc->add_option("--chi1", bc_chi1, "first configuration");
    bc->add_option("--chi2", bc_chi2, "second configuration");
    add_sampling(bc, bc_sampling);
    add_common(bc, c_bc, "csv");

    auto* serve = app.add_subcommand("serve", "local HTTP JSON service");
    ServiceOptions sopt;
    std::string serve_feeder = default_feeder;
    serve->add_option("--host", sopt.host, "bind address");
    serve->add_option("--port", sopt.port, "port (GRIDSTAB_PORT overrides the default)");
    serve->add_option("--feeder", serve_feeder, "default feeder");
    serve->add_option("--workers", sopt.workers, "heatmap worker threads");
    serve->add_option("--job-cap", sopt.job_cap, "jobs kept in memory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    OpContext ctx;
    try {
        auto run = [&](const Common& c, const std::string& op, json req, auto csv) {
            if (!c.request.empty()) req = read_request(c.request);
            if (c.format == "json") {
                emit(c, render_json(execute(op, req, ctx)));
            } else {
                emit(c, csv(req));
            }
        };
        if (*metrics) {
            run(c_metrics, "metrics", {{"feeder", metrics_feeder}},
                [&](const json& r) { return metrics_csv(execute("metrics", r, ctx)); });
        } else if (*acrit) {
            if (c_acrit.format == "csv") throw ParseError("acrit only writes JSON");
            run(c_acrit, "acrit", c_acrit.request.empty() ? family_request(acrit_args) : json{},
                [](const json&) { return std::string(); });
        } else if (*sweep) {
            json req;
            if (c_sweep.request.empty()) {
                req = family_request(sweep_args);
                if (grid.empty()) throw ParseError("--a is required");
                req["a"] = grid;
            }
            run(c_sweep, "sweep", req, [&](const json& r) { return sweep_csv(execute("sweep", r, ctx)); });
        } else if (*simulate) {
            json req = read_request(scenario);
            ctx.base_dir = std::filesystem::path(scenario).parent_path();
            if (ctx.base_dir.empty()) ctx.base_dir = ".";
            run(c_sim, "simulate", req, [&](const json& r) { return simulate_csv(r, ctx); });
        } else if (*heatmap) {
            if (c_heat.format == "csv") throw ParseError("heatmap only writes JSON");
            run(c_heat, "heatmap",
                {{"feeder", heat_feeder},
                 {"config", split(heat_config)},
                 {"kind", heat_kind},
                 {"sampling", sampling_request(heat_sampling)}},
                [](const json&) { return std::string(); });
        } else if (*table1) {
            json ms = json::array();
            for (const auto& m : split(t1_m)) {
                try {
                    ms.push_back(std::stoi(m));
                } catch (const std::exception&) {
                    throw ParseError("--m expects integers, got " + m);
                }
            }
            run(c_t1, "table1",
                {{"feeder", t1_feeder},
                 {"m", ms},
                 {"kinds", split(t1_kinds)},
                 {"ratios", split(t1_ratios)},
                 {"factor", t1_factor},
                 {"trials", t1_trials},
                 {"budget", t1_budget},
                 {"sampling", sampling_request(t1_sampling)}},
                [&](const json& r) { return table1_csv(execute("table1", r, ctx)); });
        } else if (*bc) {
            run(c_bc, "branch_compare",
                {{"feeder", bc_feeder},
                 {"chi1", split(bc_chi1)},
                 {"chi2", split(bc_chi2)},
                 {"sampling", sampling_request(bc_sampling)}},
                [&](const json& r) { return branch_compare_csv(execute("branch_compare", r, ctx)); });
        } else if (*serve) {
            if (serve->count("--port") == 0) sopt.port = service_port_from_env(sopt.port);
            sopt.ctx.default_feeder = load_feeder(serve_feeder);
            HttpService svc(sopt);
            const int port = svc.start();
            std::cerr << "listening on http://" << sopt.host << ':' << port << '\n';
            svc.wait();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
        return e.is_input_error() ? kUsageError : kDomainError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomainError;
    }
    return 0;
}
