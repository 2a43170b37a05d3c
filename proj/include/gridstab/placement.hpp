#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridstab/metrics.hpp"
#include "gridstab/stability.hpp"

namespace gridstab {

struct SamplingSpec {
    int num_samples = 100;
    double gain_min = 1e-2;
    double gain_max = 1e2;
    std::uint64_t seed = 1;
    bool tie_pbc = true;  // F22 = 2 F11; otherwise F22 is drawn on its own
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Seed for one candidate, independent of evaluation order.
std::uint64_t sub_seed(std::uint64_t seed, const std::string& key);

/// One log-uniform gain per actuator, shared by its phases. Samples are drawn
/// in sequence, so a longer run with the same seed extends a shorter one.
std::vector<ApnpGains> sample_gains(const SamplingSpec& spec, const Configuration& cfg, ControlKind kind,
                                    std::uint64_t seed);

struct SampleEvaluation {
    int good_count = 0;
    int num_samples = 0;
    std::optional<double> best_rho;  // smallest rho among good samples
    std::optional<ApnpGains> best_gains;
    double fraction() const { return num_samples ? double(good_count) / num_samples : 0.0; }
};
SampleEvaluation evaluate_samples(const SensitivityMatrices& s, const Configuration& cfg, ControlKind kind,
                                  const SamplingSpec& spec, std::uint64_t seed);

enum class Color { blue, yellow, red, error };
std::string to_string(Color c);
Color classify(int good_count, int num_samples);

struct NodeVerdict {
    std::string node;
    Color color = Color::red;
    double good_fraction = 0.0;
    int good_count = 0;
    std::optional<double> best_rho;
    std::optional<ApnpGains> best_gains;  // gains of the whole candidate configuration
    std::optional<std::string> error;
};

struct HeatmapResult {
    Configuration base_config;
    ControlKind kind = ControlKind::pbc;
    SamplingSpec spec;
    std::vector<NodeVerdict> verdicts;
    int blue = 0, yellow = 0, red = 0, errors = 0;
};

/// Co-located placement process: each empty node in turn joins the base
/// configuration and is colored by the fraction of good sampled gains.
HeatmapResult cpp(const Feeder& f, const Configuration& base_cfg, ControlKind kind, const SamplingSpec& spec);

struct GoodConfiguration {
    Configuration cfg;
    ApnpGains best_gains;
    double best_rho = 0.0;
    int draws = 0;
};
/// Random co-located m-node subsets until one has a good sampled gain.
/// Throws NoGoodConfigurationFound after `budget` subsets.
GoodConfiguration find_good_configuration(const SensitivityMatrices& s, ControlKind kind, int m,
                                          const SamplingSpec& spec, std::mt19937_64& rng, int budget = 500,
                                          const std::set<std::vector<std::string>>* exclude = nullptr);

struct CrossTrial {
    Configuration cfg_ab, cfg_ba;
    double rho_a = 0.0, rho_on_b = 0.0, rho_b = 0.0, rho_on_a = 0.0;
    bool lost_ab = false;  // good on A, not good on B with A's best gains
    bool lost_ba = false;
    std::string verdict;  // support | contradict | inconclusive
};

struct CrossApplyResult {
    ControlKind kind;
    int m;
    RatioKind ratio_kind;
    double factor;
    std::vector<CrossTrial> trials;
    int support = 0, contradict = 0, inconclusive = 0;
    int lost_ab = 0, lost_ba = 0;
    double percent_support() const;
};

CrossApplyResult cross_apply_experiment(const Feeder& f, ControlKind kind, int m, RatioKind ratio_kind, double factor,
                                        int trials, const SamplingSpec& spec, int budget = 500);

struct BranchMetric {
    std::string node;
    PhaseSet phases;
    PhaseTriple d{}, cx{}, cr{};
    double mean_d = 0.0, mean_cx = 0.0;
    int rank_d = 0, rank_cx = 0;  // 1-based among ranked nodes
};
/// Path-cumulative ratios per node, sorted by mean R/X ratio (descending).
/// Nodes whose path has no reactance on some phase are left out.
std::vector<BranchMetric> branch_metrics_ranking(const Feeder& f, bool three_phase_only = true);

struct BranchCompareRow {
    std::string label;
    ControlKind kind;
    HeatmapResult heatmap;
};
std::vector<BranchCompareRow> branch_compare(const Feeder& f, const std::vector<std::string>& chi1,
                                             const std::vector<std::string>& chi2, const SamplingSpec& spec);

nlohmann::json to_json(const HeatmapResult& h);
nlohmann::json to_json(const CrossApplyResult& r);
SamplingSpec sampling_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SamplingSpec& spec);

}  // namespace gridstab
