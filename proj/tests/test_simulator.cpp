#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>

#include "gridstab/error.hpp"
#include "gridstab/json_io.hpp"
#include "gridstab/simulator.hpp"
#include "gridstab/stability.hpp"
#include "gridstab/twobus.hpp"
#include "support.hpp"

using namespace gridstab;

namespace {

SimScenario two_bus_scenario(Feeder f, ControlKind kind, double a, SolverKind solver, PhaseLoad load) {
    const auto s = build_sensitivity(f);
    auto cfg = Configuration::colocated({"load"}, s);
    SimScenario scn{f, cfg, kind, uniform_gains(cfg, kind, a), {{"load", load}}};
    scn.solver = solver;
    return scn;
}

PhaseLoad uniform_load(PhaseSet ph, double p, double q) {
    PhaseLoad l;
    for (std::size_t i = 0; i < 3; ++i)
        if (ph.contains(i)) {
            l.p[i] = p;
            l.q[i] = q;
        }
    return l;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace

TEST_CASE("step_control") {
    const auto s = build_sensitivity(two_bus(LineImpedance::balanced(0.1, 0.2)));
    const auto cfg = Configuration::colocated({"load"}, s);
    Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 7.0), q = p;
    SUBCASE("droop at nominal voltage") {
        step_control(ControlKind::droop, s, cfg, uniform_gains(cfg, ControlKind::droop, 3.0), Eigen::VectorXd::Zero(3), p, q);
        CHECK(p.isZero(0.0));
        CHECK(q.isZero(0.0));
    }
    SUBCASE("droop with F21 = 0") {
        auto g = uniform_gains(cfg, ControlKind::droop, 3.0);
        g[0].f21 = {0, 0, 0};
        step_control(ControlKind::droop, s, cfg, g, Eigen::VectorXd::Constant(3, 0.01), p, q);
        CHECK(q.isApprox(Eigen::VectorXd::Constant(3, -0.03)));
        CHECK(p.isZero(0.0));
    }
    SUBCASE("PBC keeps setpoints without error") {
        step_control(ControlKind::pbc, s, cfg, uniform_gains(cfg, ControlKind::pbc, 3.0), Eigen::VectorXd::Zero(6), p, q);
        CHECK(p == Eigen::VectorXd::Constant(3, 7.0));
        CHECK(q == Eigen::VectorXd::Constant(3, 7.0));
    }
    SUBCASE("PBC increments") {
        Eigen::VectorXd e(6);
        e << 0.01, 0.0, 0.0, 0.0, 0.02, 0.0;
        step_control(ControlKind::pbc, s, cfg, uniform_gains(cfg, ControlKind::pbc, 3.0), e, p, q);
        CHECK(q[0] == doctest::Approx(7.0 - 0.03));
        CHECK(p[1] == doctest::Approx(7.0 - 6.0 * 0.02));
    }
}

TEST_CASE("linear flow") {
    const auto s = build_sensitivity(two_bus_raw_b(0.0, 0.4));
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    CHECK(solve_linear_flow(s, zero, zero).v[0] == 1.0);
    Eigen::VectorXd q = zero;
    q[0] = -0.1;
    CHECK(solve_linear_flow(s, zero, q).v[0] == doctest::Approx(0.96));

    std::mt19937_64 rng(3);
    const auto sr = build_sensitivity(testing_support::random_feeder(rng, 10));
    Eigen::VectorXd p1 = Eigen::VectorXd::Random(sr.dim()), p2 = Eigen::VectorXd::Random(sr.dim());
    Eigen::VectorXd qq = Eigen::VectorXd::Random(sr.dim());
    const auto z = Eigen::VectorXd::Zero(sr.dim());
    const auto a = solve_linear_flow(sr, p1 + p2, qq), b = solve_linear_flow(sr, p1, qq), c = solve_linear_flow(sr, p2, z);
    Eigen::VectorXd lhs = a.v, rhs = b.v + c.v;
    for (Eigen::Index i = 0; i < sr.dim(); ++i)
        if (sr.mask[i]) rhs[i] -= 1.0;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.angle - b.angle - c.angle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exact two-bus solver") {
    const auto z = LineImpedance::single_phase(0.05, 0.08);
    std::array<std::complex<double>, 3> none{};
    CHECK(std::abs(solve_exact_two_bus(z, none)[0]) == doctest::Approx(1.0));
    CHECK(std::abs(solve_exact_two_bus(z, none, 1.02)[0]) == doctest::Approx(1.02));

    // linearized |V|^2 differs from the exact one at second order in |S|
    for (double p = -0.05; p <= 0.05; p += 0.01)
        for (double q = -0.05; q <= 0.05; q += 0.01) {
            if (std::hypot(p, q) > 0.05) continue;
            const auto v = solve_exact_two_bus(z, {std::complex<double>(p, q), 0.0, 0.0});
            const double lin = 1.0 - 2.0 * (0.05 * p + 0.08 * q);
            CHECK(std::abs(std::norm(v[0]) - lin) < 1e-4);
        }

    // the closed form and the phasor iteration agree (zero mutual coupling)
    for (double p : {0.1, 0.3, 0.5}) {
        const std::array<std::complex<double>, 3> sl{std::complex<double>(p, 0.1), std::complex<double>(p, 0.1),
                                                     std::complex<double>(p, 0.1)};
        const auto one = solve_exact_two_bus(z, sl);
        const auto three = solve_exact_two_bus(LineImpedance::balanced(0.05, 0.08), sl);
        CHECK(std::abs(one[0] - three[0]) < 1e-12);
        // and satisfy the branch equation
        const auto i = std::conj(sl[0] / one[0]);
        CHECK(std::abs(1.0 - std::complex<double>(0.05, 0.08) * i - one[0]) < 1e-12);
    }
    CHECK_THROWS_AS(solve_exact_two_bus(z, {std::complex<double>(20.0, 20.0), 0.0, 0.0}), NoRealSolution);
    CHECK_THROWS_AS(solve_exact_two_bus(LineImpedance::balanced(0.05, 0.08),
                                        {std::complex<double>(20.0, 20.0), 20.0, 20.0}),
                    NoRealSolution);
}

TEST_CASE("the two-bus load sits below nominal voltage") {
    const auto scn = scenario_from_json(read_json(testing_support::data_path("scenarios/two_bus_rx_pbc.json")),
                                        testing_support::data_path("scenarios"));
    CHECK(scn.loads.at("load").p[0] == doctest::Approx(0.5));
    CHECK(scn.loads.at("load").q[0] == doctest::Approx(0.1));
    const auto t = run(scn);
    CHECK(t.vmag[0][0] < 1.0);
    CHECK(t.vmag[0][0] == doctest::Approx(0.963).epsilon(2e-3));
}

TEST_CASE("zero droop gains give a constant trajectory") {
    auto scn = two_bus_scenario(two_bus_raw_b(0.02, 0.2), ControlKind::droop, 0.0, SolverKind::exact_two_bus,
                                uniform_load(PhaseSet::parse("A"), 0.3, 0.1));
    scn.horizon = 20;
    const auto t = run(scn);
    REQUIRE(t.steps() == 21);
    for (int k = 1; k < t.steps(); ++k) CHECK(t.vmag[std::size_t(k)] == t.vmag[1]);
    CHECK(t.converged());
}

TEST_CASE("PBC at matching references holds its setpoints") {
    auto scn = two_bus_scenario(two_bus_raw_b(0.05, 0.15), ControlKind::pbc, 4.0, SolverKind::linear,
                                uniform_load(PhaseSet::parse("A"), 0.2, 0.05));
    scn.horizon = 1;
    const auto t0 = run(scn);
    scn.v_ref = t0.vmag[0][0];
    scn.angle_ref_deg = t0.angle[0][0] * 180.0 / std::numbers::pi;
    scn.horizon = 10;
    const auto t = run(scn);
    for (int k = 0; k < t.steps(); ++k) {
        CHECK(std::abs(t.q_inv[std::size_t(k)][0]) < 1e-12);
        CHECK(std::abs(t.p_inv[std::size_t(k)][0]) < 1e-12);
    }
}

TEST_CASE("linear straddle for every two-bus family") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ud(0.0, 1.0), ul(0.05, 0.5), uc(0.0, 1.9);
    for (Family f : {Family::pbc_1ph, Family::droop_1ph, Family::pbc_rx, Family::droop_rx, Family::pbc_phase,
                     Family::droop_phase}) {
        for (int trial = 0; trial < 10; ++trial) {
            FamilyParams p;
            p.x = ul(rng);
            p.d = ud(rng);
            p.l1 = ul(rng);
            p.cx = uc(rng);
            p.l2 = ul(rng);
            Feeder fd = f == Family::pbc_1ph || f == Family::droop_1ph ? two_bus_raw_b(0.0, p.x)
                        : f == Family::pbc_rx || f == Family::droop_rx ? two_bus_rx(p.d, p.l1)
                                                                        : two_bus_phase_ratio(p.cx, p.l2);
            const double a = analytic_acrit(f, p).a_crit;
            const auto kind = family_kind(f);
            auto load = uniform_load(fd.nodes()[1].phases, 0.2, 0.05);
            for (double factor : {0.9, 1.1}) {
                auto scn = two_bus_scenario(fd, kind, factor * a, SolverKind::linear, load);
                scn.v_ref = 0.98;
                scn.horizon = 600;
                const auto t = run(scn);
                if (factor < 1.0) {
                    CHECK(t.converged());
                } else {
                    CHECK(t.diverged());
                }
            }
        }
    }
}

TEST_CASE("scenario documents") {
    const auto base = testing_support::data_path("scenarios");
    auto doc = read_json(testing_support::data_path("scenarios/two_bus_phase_pbc.json"));
    const auto scn = scenario_from_json(doc, base);
    CHECK(scn.cfg.apnps.size() == 1);
    CHECK(scn.gains[0].f22[2] == doctest::Approx(19.0));
    CHECK(scn.horizon == 1000);
    auto bad = doc;
    bad["kind"] = "fuzzy";
    CHECK_THROWS_AS(scenario_from_json(bad, base), ParseError);
    bad = doc;
    bad.erase("gain_scale");
    CHECK_THROWS_AS(scenario_from_json(bad, base), ParseError);
    bad = doc;
    bad["config"] = {"nowhere"};
    CHECK_THROWS_AS(scenario_from_json(bad, base), UnknownNode);
    bad = doc;
    bad["horizon"] = 0;
    CHECK_THROWS_AS(scenario_from_json(bad, base), ParseError);
    auto big = scn;
    big.feeder = load_feeder(testing_support::data_path("feeders/ieee123.json"));
    big.cfg = {};
    big.gains = {};
    big.loads.clear();
    CHECK_THROWS_AS(run(big), StructureError);

    const auto t = run(scn);
    const auto csv = trajectory_csv(t);
    CHECK(csv.rfind("step,node,phase,vmag,angle,p_inv,q_inv\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * t.steps());
    const auto sum = trajectory_summary(t);
    CHECK(sum["converged"] == true);
    CHECK(sum["divergence_step"].is_null());
}
