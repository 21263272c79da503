#include "mnnspec/experiments.hpp"
#include "mnnspec/pipeline.hpp"

#include <catch_amalgamated.hpp>

using namespace mnnspec;
using Catch::Approx;

namespace {

void check_sorted_wrapped(const RunReport& r) {
    for (std::size_t i = 0; i < r.estimates.size(); ++i) {
        CHECK(r.estimates[i].omega >= 0.0);
        CHECK(r.estimates[i].omega < kTwoPi);
        if (i > 0) CHECK(r.estimates[i].omega > r.estimates[i - 1].omega);
    }
}

} // namespace

TEST_CASE("noiseless on-grid tone is recovered exactly", "[pipeline]") {
    const double w = kTwoPi * 5 / 32;
    const Signal y(cplx(0.7, -1.2) * atom(w, 32));
    const RunReport r = estimate_spectrum(y, {});
    REQUIRE(r.k_hat() == 1);
    CHECK(std::abs(r.estimates[0].omega - w) < 1e-8);
    CHECK(std::abs(r.estimates[0].amplitude - cplx(0.7, -1.2)) < 1e-8);
    CHECK(r.sigma2_hat < 1e-16);
    check_sorted_wrapped(r);
}

TEST_CASE("three tones with two below the FFT resolution", "[pipeline]") {
    TrialSpec spec;
    spec.random_phase = false;
    for (double f : {0.1, 0.115, 0.37}) spec.truth.push_back({{1.0, 0.0}, kTwoPi * f});
    const TrialData d = make_trial(spec, 0);
    const RunReport r = estimate_spectrum(d.signal, {});
    CHECK(r.initial_nodes >= 4);
    REQUIRE(r.k_hat() == 3);
    const auto m = match_components(d.truth, r.estimates);
    for (std::size_t i = 0; i < 3; ++i) CHECK(freq_distance(r.estimates[static_cast<std::size_t>(m[i])].omega, d.truth[i].omega) < 0.02);
    check_sorted_wrapped(r);
    CHECK_FALSE((r.prune_events.empty() && r.merge_events.empty()));
}

TEST_CASE("pure noise usually yields an empty model", "[pipeline]") {
    int empty = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) empty += estimate_spectrum(synthesize({}, 32, {1.0, seed}), {}).k_hat() == 0 ? 1 : 0;
    CHECK(empty >= 38);
    const RunReport zero = estimate_spectrum(Signal(CVec::Zero(16)), {});
    CHECK(zero.k_hat() == 0);
    CHECK(zero.initial_nodes == 0);
}

TEST_CASE("node count never grows and runs are deterministic", "[pipeline]") {
    const Signal y = synthesize({{{1.0, 0.0}, 0.9}, {{0.5, 0.5}, 2.4}, {{0.3, 0.0}, 4.0}}, 32, {0.05, 17});
    const RunReport a = estimate_spectrum(y, {});
    const RunReport b = estimate_spectrum(y, {});
    REQUIRE(a.k_hat() == b.k_hat());
    for (std::size_t i = 0; i < a.k_hat(); ++i) CHECK(a.estimates[i] == b.estimates[i]);
    CHECK(a.cost_trace == b.cost_trace);
    CHECK(static_cast<int>(a.k_hat()) + static_cast<int>(a.prune_events.size() + a.merge_events.size()) == a.initial_nodes);
    CHECK(a.outer_iterations <= EstimatorConfig{}.max_outer);
    check_sorted_wrapped(a);
}

TEST_CASE("caller-supplied initialization", "[pipeline]") {
    const Eigen::Index n = 32;
    // two close tones at 20 dB, nodes a sixteenth of a bin apart
    const double w0 = kTwoPi * 0.5;
    const double gap = kTwoPi / (16.0 * n);
    int both = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SinusoidSet truth{{{1.0, 0.0}, w0}, {{0.0, 1.0}, w0 + 6 * gap}};
        const double s2 = noise_var_for_snr(clean_signal(truth, n), 20.0);
        const Signal y = synthesize(truth, n, {s2, seed});
        RVec w(2);
        w << w0, w0 + gap;
        both += estimate_with_fixed_order(y, w, {}).k_hat() == 2 ? 1 : 0;
    }
    CHECK(both >= 8);

    // one tone, two nodes
    int one = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Signal y = synthesize({{{1.0, 0.0}, w0}}, n, {0.01, seed});
        RVec w(2);
        w << w0, w0 + gap;
        one += estimate_with_fixed_order(y, w, {}).k_hat() == 1 ? 1 : 0;
    }
    CHECK(one >= 9);

    // one node on pure noise
    int pruned = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        pruned += estimate_with_fixed_order(synthesize({}, n, {1.0, seed}), RVec::Constant(1, 1.0), {}).k_hat() == 0 ? 1 : 0;
    CHECK(pruned == 10);
    CHECK(estimate_with_fixed_order(synthesize({}, n, {1.0, 1}), RVec(0), {}).k_hat() == 0);
}

TEST_CASE("estimates are invariant to signal scale", "[pipeline]") {
    const Signal y = synthesize({{{1.0, 0.0}, 1.1}, {{0.4, 0.0}, 3.3}}, 32, {0.02, 2});
    const RunReport a = estimate_spectrum(y, {});
    const RunReport b = estimate_spectrum(Signal(1e4 * y.samples()), {});
    REQUIRE(a.k_hat() == b.k_hat());
    for (std::size_t i = 0; i < a.k_hat(); ++i) {
        CHECK(a.estimates[i].omega == Approx(b.estimates[i].omega).epsilon(1e-9));
        CHECK(std::abs(1e4 * a.estimates[i].amplitude - b.estimates[i].amplitude) < 1e-6 * std::abs(b.estimates[i].amplitude));
    }
    CHECK(b.sigma2_hat == Approx(1e8 * a.sigma2_hat).epsilon(1e-6));
}

TEST_CASE("divergence carries a partial report", "[pipeline]") {
    const Signal y = synthesize({{{1.0, 0.0}, 1.0}}, 32, {0.01, 1});
    EstimatorConfig cfg;
    cfg.train.gamma_alpha = 1e300;
    try {
        estimate_spectrum(y, cfg);
        FAIL("expected divergence");
    } catch (const EstimationDiverged& e) {
        CHECK(e.kind() == ErrorKind::NumericalDivergence);
        CHECK(e.partial().initial_nodes >= 1);
        CHECK(e.partial().outer_iterations == 1);
    }
}

TEST_CASE("estimator config validation", "[pipeline]") {
    EstimatorConfig cfg;
    cfg.max_outer = 0;
    CHECK_THROWS_AS(estimate_spectrum(Signal(CVec::Ones(8)), cfg), Error);
    CHECK_THROWS_AS(estimate_spectrum(Signal(CVec::Ones(1)), {}), Error);
    cfg = {};
    cfg.init.l_factor = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
