#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridstab/feeder.hpp"

namespace testing_support {

using namespace gridstab;

inline std::string data_path(const std::string& rel) { return std::string(GRIDSTAB_DATA_DIR) + "/" + rel; }

inline PhaseSet random_subset(std::mt19937_64& rng, PhaseSet parent) {
    std::vector<Phase> avail;
    for (Phase p : kAllPhases)
        if (parent.contains(p)) avail.push_back(p);
    PhaseSet out;
    while (out.empty()) {
        for (Phase p : avail)
            if (std::bernoulli_distribution(0.7)(rng)) out.insert(p);
    }
    return out;
}

inline Matrix3c random_block(std::mt19937_64& rng, PhaseSet ph) {
    std::uniform_real_distribution<double> r(0.01, 0.2), x(0.02, 0.3), m(0.0, 0.3);
    Matrix3c z = Matrix3c::Zero();
    for (int i = 0; i < 3; ++i)
        if (ph.contains(std::size_t(i))) z(i, i) = {r(rng), x(rng)};
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (ph.contains(std::size_t(i)) && ph.contains(std::size_t(j))) {
                const double s = std::min(z(i, i).imag(), z(j, j).imag());
                z(i, j) = z(j, i) = {m(rng) * s, m(rng) * s};
            }
    return z;
}

/// Random radial feeder with `lines` lines; node 0 is a three-phase substation.
inline Feeder random_feeder(std::mt19937_64& rng, int lines, bool unbalanced = true) {
    std::vector<Node> nodes{{"n0", PhaseSet::all()}};
    std::vector<Line> ls;
    for (int k = 1; k <= lines; ++k) {
        const auto parent = std::uniform_int_distribution<int>(0, k - 1)(rng);
        const PhaseSet ph = unbalanced ? random_subset(rng, nodes[std::size_t(parent)].phases)
                                       : PhaseSet::all();
        nodes.push_back({"n" + std::to_string(k), ph});
        const bool flip = std::bernoulli_distribution(0.2)(rng);
        Line ln{"l" + std::to_string(k), nodes[std::size_t(parent)].id, nodes.back().id,
                LineImpedance(random_block(rng, ph), ph)};
        if (flip) std::swap(ln.from, ln.to);
        ls.push_back(ln);
    }
    return Feeder(nodes, ls, "n0");
}

/// Line ids on each node's path, found by an independent depth-first walk over
/// the raw (undirected) line list.
inline std::map<std::string, std::set<std::string>> oracle_paths(const Feeder& f) {
    std::map<std::string, std::set<std::string>> paths;
    std::vector<std::string> stack{f.substation()};
    paths[f.substation()] = {};
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (const auto& ln : f.lines()) {
            std::string v;
            if (ln.from == u) v = ln.to;
            else if (ln.to == u) v = ln.from;
            else continue;
            if (paths.count(v)) continue;
            paths[v] = paths[u];
            paths[v].insert(ln.id);
            stack.push_back(v);
        }
    }
    return paths;
}

/// Brute-force R and X: 2 x sum over the shared path lines, absent phases zero.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> oracle_sensitivity(const Feeder& f) {
    const auto paths = oracle_paths(f);
    std::map<std::string, const Line*> by_id;
    for (const auto& ln : f.lines()) by_id[ln.id] = &ln;
    std::vector<const Node*> st;
    for (const auto& nd : f.nodes())
        if (nd.id != f.substation()) st.push_back(&nd);
    const auto n = Eigen::Index(st.size());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(3 * n, 3 * n), X = R;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& pi = paths.at(st[std::size_t(i)]->id);
            const auto& pj = paths.at(st[std::size_t(j)]->id);
            for (const auto& id : pi) {
                if (!pj.count(id)) continue;
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) {
                        if (!st[std::size_t(i)]->phases.contains(std::size_t(a)) ||
                            !st[std::size_t(j)]->phases.contains(std::size_t(b)))
                            continue;
                        R(3 * i + a, 3 * j + b) += 2.0 * by_id[id]->impedance.z(a, b).real();
                        X(3 * i + a, 3 * j + b) += 2.0 * by_id[id]->impedance.z(a, b).imag();
                    }
            }
        }
    return {R, X};
}

}  // namespace testing_support
