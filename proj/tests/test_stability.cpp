#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gridstab/error.hpp"
#include "gridstab/stability.hpp"
#include "gridstab/twobus.hpp"
#include "support.hpp"

using namespace gridstab;

namespace {

FamilyParams rx(double d, double l1) {
    FamilyParams p;
    p.d = d;
    p.l1 = l1;
    return p;
}
FamilyParams ph(double c, double l2) {
    FamilyParams p;
    p.cx = c;
    p.l2 = l2;
    return p;
}
FamilyParams one(double x) {
    FamilyParams p;
    p.x = x;
    return p;
}

}  // namespace

TEST_CASE("eigen report examples") {
    const auto s = build_sensitivity(two_bus_raw_b(0.0, 0.2));
    const auto cfg = Configuration::colocated({"load"}, s);
    const auto rep = eigen_report(build_system(s, cfg, ControlKind::pbc, uniform_gains(cfg, ControlKind::pbc, 5.0)));
    REQUIRE(rep.eigenvalues.size() == 2);
    CHECK(std::abs(rep.eigenvalues[0]) < 1e-15);
    CHECK(rep.spectral_radius < 1e-15);
    CHECK(rep.stable);

    const double c = 1.2, l2 = 0.2, a = 3.0;
    const double x = l2 / (1 + c), xm = c * x / 2;
    const auto sp = build_sensitivity(two_bus_phase_ratio(c, l2));
    const auto cp = Configuration::colocated({"load"}, sp);
    const auto r2 = eigen_report(build_system(sp, cp, ControlKind::droop, uniform_gains(cp, ControlKind::droop, a)));
    std::vector<double> re;
    for (auto l : r2.eigenvalues) re.push_back(l.real());
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(-a * (2 * xm + x)));
    CHECK(re[1] == doctest::Approx(a * (xm - x)));
    CHECK(re[2] == doctest::Approx(a * (xm - x)));
    REQUIRE(r2.dominant.size() == 1);
    CHECK(r2.dominant[0].real() == doctest::Approx(-a * l2));
}

TEST_CASE("dominance ties are all reported") {
    Eigen::MatrixXd m(2, 2);
    m << 0.5, 0.0, 0.0, -0.5;
    CHECK(eigen_report(m).dominant.size() == 2);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(2, 2, std::nan(""));
    CHECK_THROWS_AS(eigen_report(bad), NumericalFailure);
}

TEST_CASE("analytic a_crit values") {
    CHECK(analytic_acrit(Family::pbc_1ph, one(0.2)).a_crit == doctest::Approx(10.0));
    CHECK(analytic_acrit(Family::droop_1ph, one(0.2)).a_crit == doctest::Approx(5.0));
    const double pbc = analytic_acrit(Family::pbc_rx, rx(0.6, 0.2)).a_crit;
    CHECK(pbc == doctest::Approx(8.575).epsilon(1e-4));
    CHECK(std::abs(pbc - 8.6) <= 0.05);
    CHECK(analytic_acrit(Family::droop_rx, rx(1.0, 0.2)).a_crit == doctest::Approx(std::sqrt(2.0) / 0.4));
    CHECK_THROWS_AS(analytic_acrit(Family::pbc_phase, ph(2.3, 0.2)), NoStabilizingGain);
    CHECK_THROWS_AS(analytic_acrit(Family::pbc_1ph, one(0.0)), ParseError);
}

TEST_CASE("bisection agrees with closed forms on random parameters") {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> ud(0.0, 1.0), ul(0.05, 0.5);
    for (int i = 0; i < 50; ++i) {
        const double d = ud(rng), l1 = ul(rng);
        for (Family f : {Family::pbc_rx, Family::droop_rx}) {
            const double a = analytic_acrit(f, rx(d, l1)).a_crit;
            CHECK(std::abs(bisect_acrit(family_rho(f, rx(d, l1))).a_crit - a) <= 1e-5);
        }
        for (Family f : {Family::pbc_1ph, Family::droop_1ph}) {
            const double a = analytic_acrit(f, one(l1)).a_crit;
            CHECK(std::abs(bisect_acrit(family_rho(f, one(l1))).a_crit - a) <= 1e-5);
        }
    }
}

TEST_CASE("bisection bracket invariant") {
    const auto rho = family_rho(Family::pbc_rx, rx(0.6, 0.2));
    const auto cg = bisect_acrit(rho);
    CHECK(cg.method == "bisection");
    CHECK(cg.hi - cg.lo <= cg.tol);
    CHECK(rho(cg.lo) < 1.0);
    CHECK(rho(cg.hi) >= 1.0);
    CHECK(rho(cg.a_crit * (1 - 1e-6)) < 1.0);
    CHECK(rho(cg.a_crit * (1 + 1e-6)) >= 1.0);
}

TEST_CASE("bisection failure modes") {
    CHECK_THROWS_AS(bisect_acrit(family_rho(Family::pbc_phase, ph(2.3, 0.2))), NoStabilizingGain);
    CHECK_THROWS_AS(bisect_acrit(family_rho(Family::pbc_phase, ph(2.0, 0.2))), NoStabilizingGain);
    CHECK_THROWS_AS(bisect_acrit([](double) { return 0.5; }), Unbounded);
    BisectOptions bad;
    bad.hi = bad.lo;
    CHECK_THROWS_AS(bisect_acrit([](double) { return 0.5; }, bad), ParseError);
}

TEST_CASE("monotonicity in X and d") {
    double prev_p = 1e300, prev_d = 1e300;
    for (int k = 1; k <= 20; ++k) {
        const double x = 0.05 * k;
        const double p = bisect_acrit(family_rho(Family::pbc_1ph, one(x))).a_crit;
        const double d = bisect_acrit(family_rho(Family::droop_1ph, one(x))).a_crit;
        CHECK(p < prev_p);
        CHECK(d < prev_d);
        prev_p = p;
        prev_d = d;
    }
    double prev = 1e300;
    for (double d = 0.0; d <= 3.0; d += 0.25) {
        const double a = analytic_acrit(Family::pbc_rx, rx(d, 0.2)).a_crit;
        CHECK(a < prev);
        prev = a;
    }
    prev = 1e300;
    for (double d = 0.0; d <= 1.0; d += 0.1) {
        const double a = bisect_acrit(family_rho(Family::droop_rx, rx(d, 0.2))).a_crit;
        CHECK(a < prev);
        prev = a;
    }
    for (double d = 1.25; d <= 3.0; d += 0.25) {
        const double a = bisect_acrit(family_rho(Family::droop_rx, rx(d, 0.2))).a_crit;
        CHECK(a > prev);
        prev = a;
    }
}

TEST_CASE("phase-ratio families") {
    for (double c : {0.0, 0.5, 1.0, 1.5, 1.9, 1.99}) {
        CHECK(std::abs(bisect_acrit(family_rho(Family::pbc_phase, ph(c, 0.2))).a_crit - 10.0) <= 1e-6);
        CHECK(std::abs(bisect_acrit(family_rho(Family::droop_phase, ph(c, 0.2))).a_crit - 5.0) <= 1e-6);
    }
    for (double c : {2.3, 3.0}) CHECK(std::abs(bisect_acrit(family_rho(Family::droop_phase, ph(c, 0.2))).a_crit - 5.0) <= 1e-6);
}

TEST_CASE("scaling B by s scales a_crit by 1/s") {
    for (double s : {0.5, 2.0, 3.0}) {
        for (Family f : {Family::pbc_rx, Family::droop_rx}) {
            const double base = bisect_acrit(family_rho(f, rx(0.4, 0.2))).a_crit;
            const double sc = bisect_acrit(family_rho(f, rx(0.4, 0.2 * s))).a_crit;
            CHECK(sc == doctest::Approx(base / s).epsilon(1e-6));
        }
    }
}

TEST_CASE("gain sweep") {
    std::vector<double> a;
    for (int k = 0; k <= 200; ++k) a.push_back(0.1 * k);
    const auto sw = gain_sweep(family_rho(Family::droop_rx, rx(0.0, 0.2)), a);
    for (const auto& pt : sw) CHECK(pt.rho == doctest::Approx(0.2 * pt.a).epsilon(1e-12));
    const auto pbc = gain_sweep(family_rho(Family::pbc_rx, rx(0.0, 0.2)), {0.0, 5.0, 10.0, 9.99, 10.01});
    CHECK(pbc[0].rho == 1.0);
    CHECK_FALSE(pbc[0].stable);
    CHECK(pbc[1].rho == doctest::Approx(0.0));
    CHECK(pbc[3].stable);
    CHECK_FALSE(pbc[4].stable);
    CHECK(gain_sweep(family_rho(Family::droop_1ph, one(0.2)), {0.0})[0].rho == 0.0);
    CHECK_THROWS_AS(gain_sweep(family_rho(Family::droop_1ph, one(0.2)), {-1.0}), ParseError);

    // larger d gives an earlier crossing for droop while d <= 1
    double prev = 1e300;
    for (double d : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        const auto curve = gain_sweep(family_rho(Family::droop_rx, rx(d, 0.2)), a);
        const auto cross = std::find_if(curve.begin(), curve.end(), [](auto& p) { return !p.stable; });
        REQUIRE(cross != curve.end());
        CHECK(cross->a <= prev);
        prev = cross->a;
    }
}

TEST_CASE("goodness predicate") {
    const auto s = build_sensitivity(two_bus_raw_b(0.0, 0.2));
    const auto cfg = Configuration::colocated({"load"}, s);
    CHECK(is_good(build_system(s, cfg, ControlKind::pbc, uniform_gains(cfg, ControlKind::pbc, 5.0)), s).good);
    const auto zero_pbc = is_good(build_system(s, cfg, ControlKind::pbc, uniform_gains(cfg, ControlKind::pbc, 0.0)), s);
    CHECK_FALSE(zero_pbc.good);
    CHECK(zero_pbc.rho == 1.0);
    const auto zero = is_good(build_system(s, cfg, ControlKind::droop, uniform_gains(cfg, ControlKind::droop, 0.0)), s);
    CHECK(zero.stable);
    CHECK_FALSE(zero.good);
    CHECK(zero.mean_contraction == 0.0);

    // X = 0.2: contraction 1 - 1/(1 + 0.2 a), 7% reached at a = 0.376...
    const double a_min = (1.0 / 0.93 - 1.0) / 0.2;
    const ReducedModel red(s, cfg, ControlKind::droop);
    const auto below = is_good(red, uniform_gains(cfg, ControlKind::droop, a_min * 0.99), s);
    const auto above = is_good(red, uniform_gains(cfg, ControlKind::droop, a_min * 1.01), s);
    CHECK_FALSE(below.good);
    CHECK(above.good);
    CHECK(above.worst_node == "load");
    CHECK(above.mean_contraction == doctest::Approx(1 - 1 / (1 + 0.2 * a_min * 1.01)));
    CHECK(is_good(build_system(s, cfg, ControlKind::droop, uniform_gains(cfg, ControlKind::droop, a_min * 1.01)), s)
              .mean_contraction == doctest::Approx(above.mean_contraction));
    CHECK_FALSE(is_good(red, uniform_gains(cfg, ControlKind::droop, 6.0), s).good);

    const auto sp = build_sensitivity(two_bus_phase_ratio(2.3, 0.2));
    const auto cp = Configuration::colocated({"load"}, sp);
    const ReducedModel rp(sp, cp, ControlKind::pbc);
    for (double a : {1e-3, 0.1, 1.0, 5.0, 9.0, 50.0}) CHECK_FALSE(is_good(rp, uniform_gains(cp, ControlKind::pbc, a), sp).good);
}
