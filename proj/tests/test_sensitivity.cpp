#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include <Eigen/Eigenvalues>

#include "gridstab/error.hpp"
#include "gridstab/sensitivity.hpp"
#include "gridstab/twobus.hpp"
#include "support.hpp"

using namespace gridstab;

TEST_CASE("two-bus single phase: factor two") {
    const auto s = build_sensitivity(load_feeder(testing_support::data_path("feeders/two_bus_1ph.json")));
    REQUIRE(s.dim() == 3);
    CHECK(s.X(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(s.R(0, 0) == 0.0);
    CHECK(s.active_indices() == std::vector<Eigen::Index>{0});
    CHECK(s.X.cwiseAbs().sum() == doctest::Approx(0.4));
    CHECK_THROWS_AS(s.position("source"), UnknownNode);
}

TEST_CASE("two-bus three-phase diagonal") {
    const auto s = build_sensitivity(two_bus(LineImpedance::balanced(0.0, 0.3)));
    CHECK((s.X - 0.6 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("three-node shared trunk") {
    // s - t (trunk) - {a, b}
    std::vector<Node> nodes{{"s", PhaseSet::all()}, {"t", PhaseSet::all()}, {"a", PhaseSet::all()},
                            {"b", PhaseSet::all()}};
    std::vector<Line> lines{{"st", "s", "t", LineImpedance::balanced(0.07, 0.11)},
                            {"ta", "t", "a", LineImpedance::balanced(0.3, 0.2)},
                            {"tb", "t", "b", LineImpedance::balanced(0.5, 0.4)}};
    const auto s = build_sensitivity(Feeder(nodes, lines, "s"));
    const auto a = s.index("a", Phase::B), b = s.index("b", Phase::B);
    CHECK(s.R(a, b) == doctest::Approx(2 * 0.07));
    CHECK(s.X(a, b) == doctest::Approx(2 * 0.11));
    CHECK(s.R(a, a) == doctest::Approx(2 * (0.07 + 0.3)));
    CHECK(s.R(b, b) == doctest::Approx(2 * (0.07 + 0.5)));
    CHECK(s.R(a, s.index("b", Phase::C)) == 0.0);
}

TEST_CASE("random feeders match the brute-force oracle") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const Feeder f = testing_support::random_feeder(rng, 5 + trial);
        const auto s = build_sensitivity(f);
        const auto [R, X] = testing_support::oracle_sensitivity(f);
        CHECK((s.R - R).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((s.X - X).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((s.R - s.R.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((s.X - s.X.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (Eigen::Index i = 0; i < s.dim(); ++i)
            if (!s.mask[i]) CHECK(s.R.row(i).cwiseAbs().sum() + s.X.row(i).cwiseAbs().sum() == 0.0);
    }
}

TEST_CASE("active block is positive semidefinite") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = build_sensitivity(testing_support::random_feeder(rng, 20));
        const auto idx = s.active_indices();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(s.X(idx, idx));
        CHECK(ex.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("appending a line never decreases diagonal entries") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Feeder f = testing_support::random_feeder(rng, 12);
        const auto s = build_sensitivity(f);
        // hang a new node under each node in turn and compare its diagonal to the parent's
        for (const auto& parent : f.nodes()) {
            if (parent.id == f.substation()) continue;
            auto nodes = f.nodes();
            auto lines = f.lines();
            nodes.push_back({"extra", parent.phases});
            lines.push_back({"lx", parent.id, "extra",
                             LineImpedance(testing_support::random_block(rng, parent.phases), parent.phases)});
            const auto s2 = build_sensitivity(Feeder(nodes, lines, f.substation()));
            for (Phase p : kAllPhases) {
                if (!parent.phases.contains(p)) continue;
                const auto i = s2.index("extra", p), j = s.index(parent.id, p);
                CHECK(s2.R(i, i) >= s.R(j, j));
                CHECK(s2.X(i, i) >= s.X(j, j));
            }
            break;
        }
    }
}
