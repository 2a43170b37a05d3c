#include "gridstab/placement.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "gridstab/error.hpp"
#include "gridstab/json_io.hpp"

namespace gridstab {
namespace {

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

std::size_t bounded(std::mt19937_64& rng, std::size_t n) {
    return std::size_t((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = unsigned(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

void SamplingSpec::validate() const {
    if (num_samples < 1) throw ParseError("num_samples must be at least 1");
    if (!(gain_min > 0.0) || !(gain_max >= gain_min) || !std::isfinite(gain_max))
        throw ParseError("gain range must satisfy 0 < min <= max");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t seed, const std::string& key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ h);
}

std::vector<ApnpGains> sample_gains(const SamplingSpec& spec, const Configuration& cfg, ControlKind kind,
                                    std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const double span = std::log(spec.gain_max / spec.gain_min);
    auto draw = [&] { return spec.gain_min * std::exp(span * uniform01(rng)); };
    std::vector<ApnpGains> out;
    out.reserve(std::size_t(spec.num_samples));
    for (int k = 0; k < spec.num_samples; ++k) {
        ApnpGains g(cfg.apnps.size());
        for (std::size_t a = 0; a < g.size(); ++a) {
            const double g1 = draw();
            double g2 = 0.0;
            if (kind == ControlKind::droop || !spec.tie_pbc) g2 = draw();
            else g2 = 2.0 * g1;
            for (std::size_t p = 0; p < 3; ++p) {
                if (!cfg.apnps[a].phases.contains(p)) continue;
                g[a].f11[p] = g1;
                (kind == ControlKind::pbc ? g[a].f22[p] : g[a].f21[p]) = g2;
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

SampleEvaluation evaluate_samples(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                                  const SamplingSpec& spec, std::uint64_t seed) {
    const ReducedModel model(s, cfg, kind);
    SampleEvaluation ev;
    for (auto& g : sample_gains(spec, cfg, kind, seed)) {
        const Goodness good = is_good(model, g, s);
        ++ev.num_samples;
        if (!good.good) continue;
        ++ev.good_count;
        if (!ev.best_rho || good.rho < *ev.best_rho) {
            ev.best_rho = good.rho;
            ev.best_gains = std::move(g);
        }
    }
    return ev;
}

std::string to_string(Color c) {
    switch (c) {
        case Color::blue: return "blue";
        case Color::yellow: return "yellow";
        case Color::red: return "red";
        case Color::error: return "error";
    }
    return {};
}

Color classify(int good_count, int num_samples) {
    if (good_count <= 0) return Color::red;
    // compare counts exactly: good/num >= 0.07
    return 100 * std::int64_t(good_count) >= 7 * std::int64_t(num_samples) ? Color::blue : Color::yellow;
}

HeatmapResult cpp(const Feeder& f, const Configuration& base_cfg, ControlKind kind, const SamplingSpec& spec) {
    spec.validate();
    const auto s = build_sensitivity(f);
    base_cfg.validate(s);
    std::vector<std::string> candidates;
    for (const auto& id : s.nodes)
        if (!base_cfg.uses_node(id)) candidates.push_back(id);
    std::sort(candidates.begin(), candidates.end());

    HeatmapResult res{base_cfg, kind, spec, std::vector<NodeVerdict>(candidates.size())};
    parallel_for(candidates.size(), spec.threads, [&](std::size_t i) {
        NodeVerdict& v = res.verdicts[i];
        v.node = candidates[i];
        Configuration cfg = base_cfg;
        cfg.apnps.push_back({v.node, v.node, s.phases[s.position(v.node)]});
        try {
            const auto ev = evaluate_samples(s, cfg, kind, spec, sub_seed(spec.seed, v.node));
            v.good_count = ev.good_count;
            v.good_fraction = ev.fraction();
            v.color = classify(ev.good_count, ev.num_samples);
            v.best_rho = ev.best_rho;
            v.best_gains = ev.best_gains;
        } catch (const Error& e) {
            if (e.is_input_error()) throw;
            v.color = Color::error;
            v.error = e.code() + ": " + e.what();
        }
    });
    for (const auto& v : res.verdicts) {
        switch (v.color) {
            case Color::blue: ++res.blue; break;
            case Color::yellow: ++res.yellow; break;
            case Color::red: ++res.red; break;
            case Color::error: ++res.errors; break;
        }
    }
    return res;
}

GoodConfiguration find_good_configuration(const SensitivityMatrices& s, ControlKind kind, int m,
                                          const SamplingSpec& spec, std::mt19937_64& rng, int budget,
                                          const std::set<std::vector<std::string>>* exclude) {
    if (m < 1 || std::size_t(m) > s.node_count())
        throw ParseError("m must lie between 1 and the number of non-substation nodes");
    std::vector<std::size_t> idx(s.node_count());
    for (int draw = 1; draw <= budget; ++draw) {
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<std::string> chosen;
        for (int k = 0; k < m; ++k) {
            const std::size_t j = std::size_t(k) + bounded(rng, idx.size() - std::size_t(k));
            std::swap(idx[std::size_t(k)], idx[j]);
            chosen.push_back(s.nodes[idx[std::size_t(k)]]);
        }
        std::sort(chosen.begin(), chosen.end());
        if (exclude && exclude->contains(chosen)) continue;
        const auto cfg = Configuration::colocated(chosen, s);
        const auto ev = evaluate_samples(s, cfg, kind, spec, rng());
        if (ev.best_gains) return {cfg, *ev.best_gains, *ev.best_rho, draw};
    }
    throw NoGoodConfigurationFound("no good " + std::to_string(m) + "-node configuration in " +
                                   std::to_string(budget) + " random draws");
}

double CrossApplyResult::percent_support() const {
    return trials.empty() ? 0.0 : 100.0 * support / double(trials.size());
}

CrossApplyResult cross_apply_experiment(const Feeder& f, ControlKind kind, int m, RatioKind ratio_kind, double factor,
                                        int trials, const SamplingSpec& spec, int budget) {
    spec.validate();
    if (trials < 1) throw ParseError("trials must be at least 1");
    const auto sa = build_sensitivity(f);
    const auto sb = build_sensitivity(scale_feeder_ratios(f, ratio_kind, factor).feeder);
    CrossApplyResult res{kind, m, ratio_kind, factor, {}};

    auto goodness_on = [&](const SensitivityMatrices& s, const GoodConfiguration& gc) {
        return is_good(ReducedModel(s, gc.cfg, kind), gc.best_gains, s);
    };
    // each direction uses distinct configurations across trials
    std::set<std::vector<std::string>> used_a, used_b;
    auto key = [](const Configuration& c) {
        std::vector<std::string> k;
        for (const auto& ap : c.apnps) k.push_back(ap.actuator);
        return k;
    };
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng_a(splitmix64(spec.seed + 2 * std::uint64_t(t)));
        std::mt19937_64 rng_b(splitmix64(spec.seed + 2 * std::uint64_t(t) + 1));
        const auto ga = find_good_configuration(sa, kind, m, spec, rng_a, budget, &used_a);
        const auto gb = find_good_configuration(sb, kind, m, spec, rng_b, budget, &used_b);
        used_a.insert(key(ga.cfg));
        used_b.insert(key(gb.cfg));
        CrossTrial tr;
        tr.cfg_ab = ga.cfg;
        tr.cfg_ba = gb.cfg;
        tr.rho_a = ga.best_rho;
        tr.rho_b = gb.best_rho;
        const auto on_b = goodness_on(sb, ga);
        const auto on_a = goodness_on(sa, gb);
        tr.rho_on_b = on_b.rho;
        tr.rho_on_a = on_a.rho;
        tr.lost_ab = !on_b.good;
        tr.lost_ba = !on_a.good;
        res.lost_ab += tr.lost_ab;
        res.lost_ba += tr.lost_ba;
        if (tr.lost_ab && !tr.lost_ba) {
            tr.verdict = "support";
            ++res.support;
        } else if (tr.lost_ba && !tr.lost_ab) {
            tr.verdict = "contradict";
            ++res.contradict;
        } else {
            tr.verdict = "inconclusive";
            ++res.inconclusive;
        }
        res.trials.push_back(std::move(tr));
    }
    return res;
}

std::vector<BranchMetric> branch_metrics_ranking(const Feeder& f, bool three_phase_only) {
    std::vector<BranchMetric> out;
    for (const auto& nd : f.nodes()) {
        if (nd.id == f.substation()) continue;
        if (three_phase_only && nd.phases.size() != 3) continue;
        const auto m = path_metrics(f, nd.id);
        BranchMetric b{nd.id, nd.phases, m.d, m.cx, m.cr};
        bool defined = true;
        for (std::size_t p = 0; p < 3; ++p) {
            if (!nd.phases.contains(p)) continue;
            if (std::isnan(m.d[p]) || std::isnan(m.cx[p])) defined = false;
            b.mean_d += m.d[p] / double(nd.phases.size());
            b.mean_cx += m.cx[p] / double(nd.phases.size());
        }
        if (defined) out.push_back(b);
    }
    auto by = [](double BranchMetric::*key) {
        return [key](const BranchMetric& a, const BranchMetric& b) {
            return a.*key != b.*key ? a.*key > b.*key : a.node < b.node;
        };
    };
    std::sort(out.begin(), out.end(), by(&BranchMetric::mean_cx));
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank_cx = int(i) + 1;
    std::sort(out.begin(), out.end(), by(&BranchMetric::mean_d));
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank_d = int(i) + 1;
    return out;
}

std::vector<BranchCompareRow> branch_compare(const Feeder& f, const std::vector<std::string>& chi1,
                                             const std::vector<std::string>& chi2, const SamplingSpec& spec) {
    const auto s = build_sensitivity(f);
    std::vector<BranchCompareRow> rows;
    for (ControlKind kind : {ControlKind::pbc, ControlKind::droop}) {
        rows.push_back({"chi1", kind, cpp(f, Configuration::colocated(chi1, s), kind, spec)});
        rows.push_back({"chi2", kind, cpp(f, Configuration::colocated(chi2, s), kind, spec)});
    }
    return rows;
}

nlohmann::json to_json(const SamplingSpec& spec) {
    return {{"num_samples", spec.num_samples},
            {"gain_min", spec.gain_min},
            {"gain_max", spec.gain_max},
            {"seed", spec.seed},
            {"tie_pbc", spec.tie_pbc}};
}

SamplingSpec sampling_from_json(const nlohmann::json& doc) {
    SamplingSpec spec;
    if (doc.is_null()) return spec;
    if (!doc.is_object()) throw ParseError("sampling must be an object");
    spec.num_samples = get_field<int>(doc, "num_samples", spec.num_samples);
    spec.gain_min = get_field<double>(doc, "gain_min", spec.gain_min);
    spec.gain_max = get_field<double>(doc, "gain_max", spec.gain_max);
    spec.seed = get_field<std::uint64_t>(doc, "seed", spec.seed);
    spec.tie_pbc = get_field<bool>(doc, "tie_pbc", spec.tie_pbc);
    spec.validate();
    return spec;
}

nlohmann::json to_json(const HeatmapResult& h) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : h.verdicts) {
        nlohmann::json j{{"node", v.node},
                         {"color", to_string(v.color)},
                         {"good_fraction", v.good_fraction},
                         {"good_count", v.good_count}};
        if (v.best_rho) j["best_rho"] = *v.best_rho;
        if (v.best_gains) {
            Configuration cfg = h.base_config;
            cfg.apnps.push_back({v.node, v.node, {}});
            j["best_gains"] = gains_to_json(*v.best_gains, cfg, h.kind);
        }
        if (v.error) j["error"] = *v.error;
        verdicts.push_back(std::move(j));
    }
    return {{"kind", to_string(h.kind)},
            {"config", config_to_json(h.base_config)},
            {"sampling", to_json(h.spec)},
            {"verdicts", verdicts},
            {"counts", {{"blue", h.blue}, {"yellow", h.yellow}, {"red", h.red}, {"error", h.errors}}}};
}

nlohmann::json to_json(const CrossApplyResult& r) {
    nlohmann::json trials = nlohmann::json::array();
    auto nodes = [](const Configuration& c) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& ap : c.apnps) a.push_back(ap.actuator);
        return a;
    };
    for (const auto& t : r.trials)
        trials.push_back({{"config_ab", nodes(t.cfg_ab)},
                          {"config_ba", nodes(t.cfg_ba)},
                          {"rho_a", t.rho_a},
                          {"rho_on_b", t.rho_on_b},
                          {"rho_b", t.rho_b},
                          {"rho_on_a", t.rho_on_a},
                          {"lost_ab", t.lost_ab},
                          {"lost_ba", t.lost_ba},
                          {"verdict", t.verdict}});
    return {{"kind", to_string(r.kind)},         {"m", r.m},
            {"ratio", to_string(r.ratio_kind)},  {"factor", r.factor},
            {"support", r.support},              {"contradict", r.contradict},
            {"inconclusive", r.inconclusive},    {"lost_ab", r.lost_ab},
            {"lost_ba", r.lost_ba},              {"percent_support", r.percent_support()},
            {"trials", trials}};
}

}  // namespace gridstab
