#include "mnnspec/signal_model.hpp"

#include <catch_amalgamated.hpp>

using namespace mnnspec;
using Catch::Approx;

TEST_CASE("atom entries are unit-modulus phasors", "[signal_model]") {
    const CVec a = atom(0.3, 8);
    REQUIRE(a.size() == 8);
    for (Eigen::Index n = 0; n < 8; ++n) {
        CHECK(a[n].real() == Approx(std::cos(0.3 * n)).margin(1e-15));
        CHECK(a[n].imag() == Approx(std::sin(0.3 * n)).margin(1e-15));
    }
    // periodic in omega
    CHECK((atom(0.3 + 4 * kTwoPi, 8) - a).norm() < 1e-12);
    CHECK((atom(-0.3, 8) - a.conjugate()).norm() < 1e-12);
    CHECK_THROWS_AS(atom(0.1, 0), Error);
}

TEST_CASE("wrap_angle maps into [0, 2pi)", "[signal_model]") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kTwoPi) == 0.0);
    CHECK(wrap_angle(-0.5) == Approx(kTwoPi - 0.5));
    CHECK(wrap_angle(7.0) == Approx(7.0 - kTwoPi));
    const double w = wrap_angle(-1e-18);
    CHECK(w >= 0.0);
    CHECK(w < kTwoPi);
}

TEST_CASE("design matrix and clean signal agree", "[signal_model]") {
    const SinusoidSet comps{{{1.0, 0.5}, 0.4}, {{-0.2, 2.0}, 2.9}};
    RVec w(2);
    w << 0.4, 2.9;
    CVec alpha(2);
    alpha << cplx(1.0, 0.5), cplx(-0.2, 2.0);
    const CMat a = design_matrix(w, 16);
    CHECK((a * alpha - clean_signal(comps, 16)).norm() < 1e-13);
    // on-grid atoms are orthogonal
    RVec g(2);
    g << kTwoPi * 2 / 16, kTwoPi * 5 / 16;
    const CMat b = design_matrix(g, 16);
    CHECK(std::abs(b.col(0).dot(b.col(1))) < 1e-12);
    CHECK(std::abs(b.col(0).squaredNorm() - 16.0) < 1e-12);
}

TEST_CASE("noise is circular with the requested power", "[signal_model]") {
    std::mt19937_64 rng(5);
    const Eigen::Index n = 200000;
    const CVec e = complex_noise(n, 2.0, rng);
    const double dn = static_cast<double>(n);
    CHECK(e.squaredNorm() / dn == Approx(2.0).epsilon(0.02));
    // E[e^2] = 0 for circular noise; real and imaginary parts share the power
    CHECK(std::abs(e.array().square().sum()) / dn < 0.03);
    CHECK(e.real().squaredNorm() / dn == Approx(1.0).epsilon(0.02));
    CHECK(std::abs(e.mean()) < 0.02);
}

TEST_CASE("SNR sets noise variance from clean energy", "[signal_model]") {
    const CVec x = clean_signal({{{2.0, 0.0}, 1.0}}, 32);
    CHECK(noise_var_for_snr(x, 0.0) == Approx(4.0));
    CHECK(noise_var_for_snr(x, 20.0) == Approx(0.04));
    CHECK_THROWS_AS(noise_var_for_snr(CVec::Zero(4).eval(), 10.0), Error);
}

TEST_CASE("synthesis is deterministic in the seed", "[signal_model]") {
    const SinusoidSet comps{{{1.0, 0.0}, 1.2}};
    const Signal a = synthesize(comps, 32, {0.1, 42});
    const Signal b = synthesize(comps, 32, {0.1, 42});
    const Signal c = synthesize(comps, 32, {0.1, 43});
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(synthesize(comps, 32, {0.0, 1}).samples() == clean_signal(comps, 32));
    CHECK_THROWS_AS(synthesize(comps, 32, {-1.0, 1}), Error);
    CHECK_THROWS_AS(synthesize({{{1.0, 0.0}, std::nan("")}}, 8, {}), Error);
}

TEST_CASE("signal rejects bad samples", "[signal_model]") {
    CHECK_THROWS_AS(Signal(CVec(0)), Error);
    CVec bad = CVec::Zero(3);
    bad[1] = cplx(std::numeric_limits<double>::infinity(), 0.0);
    CHECK_THROWS_AS(Signal(bad), Error);
}
