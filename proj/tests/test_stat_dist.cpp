#include "mnnspec/stat_dist.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace mnnspec;
using namespace mnnspec::stat;
using Catch::Approx;

namespace {

// Closed forms for d1 = 2: CDF 1 - (d/(2x+d))^{d/2}, inverse d/2 ((1-p)^{-2/d} - 1).
double f2_cdf(double x, double d) { return 1.0 - std::pow(d / (2.0 * x + d), 0.5 * d); }
double f2_inv(double p, double d) { return 0.5 * d * (std::pow(1.0 - p, -2.0 / d) - 1.0); }

} // namespace

TEST_CASE("incomplete beta against reference values", "[stat_dist]") {
    // reference values from an independent implementation
    CHECK(reg_inc_beta(0.3, 2.5, 3.5) == Approx(0.29675298929566646).epsilon(1e-12));
    CHECK(reg_inc_beta(0.2, 0.5, 0.5) == Approx(0.2951672353008665).epsilon(1e-12));
    CHECK(reg_inc_beta(0.45, 30, 40) == Approx(0.6447480085585666).epsilon(1e-11));
    CHECK(reg_inc_beta(0.01, 1.001, 200) == Approx(0.8658018239533374).epsilon(1e-11));
}

TEST_CASE("incomplete beta identities", "[stat_dist]") {
    for (double x : {0.05, 0.3, 0.77}) {
        CHECK(reg_inc_beta(x, 1.0, 4.0) == Approx(1.0 - std::pow(1.0 - x, 4.0)).epsilon(1e-13));
        CHECK(reg_inc_beta(x, 3.0, 1.0) == Approx(std::pow(x, 3.0)).epsilon(1e-13));
        CHECK(reg_inc_beta(x, 2.2, 5.1) == Approx(1.0 - reg_inc_beta(1.0 - x, 5.1, 2.2)).epsilon(1e-12));
    }
    CHECK(reg_inc_beta(0.5, 7.0, 7.0) == Approx(0.5).epsilon(1e-13));
    CHECK(reg_inc_beta(0.0, 2.0, 3.0) == 0.0);
    CHECK(reg_inc_beta(1.0, 2.0, 3.0) == 1.0);
    CHECK_THROWS_AS(reg_inc_beta(0.5, 0.0, 1.0), Error);
    CHECK_THROWS_AS(reg_inc_beta(1.5, 1.0, 1.0), Error);
}

TEST_CASE("normal quantile", "[stat_dist]") {
    CHECK(std_normal_inv_cdf(0.975) == Approx(1.959963984540054).epsilon(1e-12));
    CHECK(std_normal_inv_cdf(0.3) == Approx(-0.5244005127080409).epsilon(1e-12));
    CHECK(std_normal_inv_cdf(1e-6) == Approx(-4.753424308822899).epsilon(1e-12));
    CHECK(std_normal_inv_cdf(1e-12) == Approx(-7.034483825301131).epsilon(1e-11));
    CHECK(std::abs(std_normal_inv_cdf(1.0 - 1e-6) - 4.753424) < 1e-5);
    CHECK(std_normal_inv_cdf(0.5) == 0.0);
    CHECK_THROWS_AS(std_normal_inv_cdf(0.0), Error);
    CHECK_THROWS_AS(std_normal_inv_cdf(1.0), Error);
}

TEST_CASE("central F against closed form and reference values", "[stat_dist]") {
    for (double d : {2.0, 7.0, 30.0, 62.0, 200.0})
        for (double x : {0.1, 1.0, 3.0, 18.0}) CHECK(f_cdf(x, {2.0, d}) == Approx(f2_cdf(x, d)).epsilon(1e-12));
    CHECK(f_cdf(2.5, {3, 7}) == Approx(0.8564905437210608).epsilon(1e-12));
    CHECK(f_cdf(0.7, {5, 11}) == Approx(0.3651180060861227).epsilon(1e-12));
    CHECK(f_sf(40.0, {2, 30}) == Approx(3.435014252937534e-09).epsilon(1e-9));
    CHECK(f_inv_cdf(0.99, {4, 58}) == Approx(3.661090180446178).epsilon(1e-10));
    CHECK(f_inv_cdf(0.5, {3, 7}) == Approx(0.8709442531872845).epsilon(1e-10));
    CHECK(f_inv_cdf(1.0 - 1e-6, {6, 20}) == Approx(16.173239028836328).epsilon(1e-8));
}

TEST_CASE("F quantile for d1 = 2 matches closed-form inversion", "[stat_dist]") {
    for (int d2 = 2; d2 <= 200; ++d2) {
        for (double p : {0.5, 0.99, 1.0 - 1e-6}) {
            const double want = f2_inv(p, d2);
            INFO("d2 = " << d2 << ", p = " << p);
            CHECK(std::abs(f_inv_cdf(p, {2.0, static_cast<double>(d2)}) - want) <= 1e-9 * want);
        }
    }
    CHECK(f_inv_cdf(0.0, {2, 10}) == 0.0);
    CHECK_THROWS_AS(f_inv_cdf(1.0, {2, 10}), Error);
}

TEST_CASE("noncentral F against reference values", "[stat_dist]") {
    CHECK(noncentral_f_cdf(3.0, {2, 60, 5.0}) == Approx(0.492630885260456).epsilon(1e-10));
    CHECK(noncentral_f_sf(18.7166, {2, 60, 20.0}) == Approx(0.0917205299843946).epsilon(1e-9));
    CHECK(noncentral_f_cdf(1.0, {2, 20, 0.5}) == Approx(0.5321435748495031).epsilon(1e-10));
    CHECK(noncentral_f_cdf(10.0, {4, 58, 30.0}) == Approx(0.684948017451437).epsilon(1e-10));
    CHECK(noncentral_f_sf(0.5, {2, 62, 320.0}) == Approx(1.0).epsilon(1e-12));
    // zero noncentrality reduces to the central law
    CHECK(noncentral_f_cdf(2.0, {2, 40, 0.0}) == Approx(f_cdf(2.0, {2, 40})));
}

TEST_CASE("noncentral F against simulation", "[stat_dist]") {
    // F' = (chi'^2_2(lambda)/2) / (chi^2_d/d) built from normals
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 1.0);
    const double lambda = 6.0, d = 20.0, x = 4.0;
    const int trials = 20000;
    int below = 0;
    for (int t = 0; t < trials; ++t) {
        const double a = z(rng) + std::sqrt(lambda), b = z(rng);
        double den = 0.0;
        for (int k = 0; k < static_cast<int>(d); ++k) {
            const double v = z(rng);
            den += v * v;
        }
        below += ((a * a + b * b) / 2.0) / (den / d) <= x ? 1 : 0;
    }
    const double p = noncentral_f_cdf(x, {2.0, d, lambda});
    CHECK(std::abs(below / static_cast<double>(trials) - p) < 4.0 * std::sqrt(p * (1 - p) / trials));
}

TEST_CASE("Kolmogorov distribution and KS test", "[stat_dist]") {
    CHECK(kolmogorov_sf(0.5) == Approx(0.9639452436648751).epsilon(1e-9));
    CHECK(kolmogorov_sf(1.0) == Approx(0.26999967167735456).epsilon(1e-9));
    CHECK(kolmogorov_sf(1.36) == Approx(0.049485876755377876).epsilon(1e-9));
    CHECK(kolmogorov_sf(2.0) == Approx(0.0006709252557796953).epsilon(1e-8));
    CHECK(kolmogorov_sf(0.0) == 1.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) s.push_back(u(rng));
    const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
    CHECK(ks_test(s, uniform).p_value > 0.01);
    for (double& v : s) v = v * v; // no longer uniform
    CHECK(ks_test(s, uniform).p_value < 1e-6);
    // D for a single point at 0.5 is 0.5
    CHECK(ks_test({0.5}, uniform).statistic == Approx(0.5));
}

TEST_CASE("F quantile inverts the CDF and CDFs are monotone", "[stat_dist]") {
    CHECK(f_cdf(1.0, {2, 2}) == Approx(0.5));
    CHECK(f_inv_cdf(0.5, {2, 2}) == Approx(1.0).epsilon(1e-12));
    CHECK(f_inv_cdf(1.0 - 1e-6, {2, 60}) == Approx(17.54679).epsilon(1e-6));
    CHECK(f_cdf(0.0, {3, 9}) == 0.0);
    CHECK(f_cdf(1e15, {3, 9}) == Approx(1.0).margin(1e-9));
    for (double d : {2.0, 5.0, 40.0, 200.0}) {
        for (double x : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
            const FParams p{2.0, d};
            const double c = f_cdf(x, p);
            if (c < 1.0 - 1e-12) CHECK(f_inv_cdf(c, p) == Approx(x).epsilon(1e-8));
        }
        double prev = 0.0, prev_nc = 0.0;
        for (int i = 1; i <= 200; ++i) {
            const double x = 0.05 * i;
            const double c = f_cdf(x, {4.0, d});
            const double nc = noncentral_f_cdf(x, {2.0, d, 3.0});
            CHECK(c >= prev);
            CHECK(nc >= prev_nc);
            prev = c;
            prev_nc = nc;
        }
    }
    // heavier noncentrality shifts mass upward
    CHECK(noncentral_f_cdf(3.0, {2, 30, 10.0}) <= noncentral_f_cdf(3.0, {2, 30, 2.0}));
    CHECK(std_normal_inv_cdf(0.2) == Approx(-std_normal_inv_cdf(0.8)).epsilon(1e-12));
    CHECK_THROWS_AS(f_cdf(1.0, {0.0, 2.0}), Error);
    CHECK_THROWS_AS(noncentral_f_cdf(1.0, {2.0, 2.0, -1.0}), Error);
}
