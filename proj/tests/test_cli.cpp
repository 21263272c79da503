#include "mnnspec/io.hpp"

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

namespace fs = std::filesystem;
using namespace mnnspec;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("mnnspec_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(MNNSPEC_CLI) + " " + args + " > " + (scratch() / "stdout.txt").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

void write_components(const std::string& name, const std::string& body) { io::write_text(path(name), body); }

} // namespace

TEST_CASE("simulate writes a reproducible CSV and sidecar", "[cli]") {
    write_components("three.json", R"([{"re":1,"im":0,"normalized_freq":0.1},{"re":1,"im":0,"normalized_freq":0.115},{"re":1,"im":0,"normalized_freq":0.37}])");
    REQUIRE(run("simulate --n 32 --components " + path("three.json") + " --snr-db 10 --seed 5 --out " + path("a.csv")) == 0);
    REQUIRE(run("simulate --n 32 --components " + path("three.json") + " --snr-db 10 --seed 5 --out " + path("b.csv")) == 0);
    CHECK(io::read_text(path("a.csv")) == io::read_text(path("b.csv")));
    CHECK(io::read_text(path("stdout.txt")).rfind("sigma2 ", 0) == 0);
    const Signal y = io::signal_from_csv(io::read_text(path("a.csv")));
    CHECK(y.size() == 32);
    const auto meta = io::parse_json(io::read_text(path("a.csv.json")), "sidecar");
    CHECK(meta.at("seed").get<int>() == 5);
    CHECK(meta.at("components").size() == 3);

    // very high SNR reproduces the clean model
    REQUIRE(run("simulate --n 32 --components " + path("three.json") + " --snr-db 300 --seed 5 --out " + path("clean.csv")) == 0);
    const Signal c = io::signal_from_csv(io::read_text(path("clean.csv")));
    const CVec want = clean_signal(io::components_from_json(io::parse_json(io::read_text(path("three.json")), "c")), 32);
    CHECK((c.samples() - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("estimate on simulated files", "[cli]") {
    write_components("tone.json", R"([{"re":0.5,"im":1.5,"normalized_freq":0.1875}])");
    REQUIRE(run("simulate --n 32 --components " + path("tone.json") + " --snr-db 400 --seed 1 --out " + path("tone.csv")) == 0);
    REQUIRE(run("estimate --in " + path("tone.csv") + " --report " + path("tone-report.json")) == 0);
    const auto rep = io::report_from_json(io::parse_json(io::read_text(path("tone-report.json")), "report"));
    REQUIRE(rep.k_hat() == 1);
    CHECK(std::abs(rep.estimates[0].omega - kTwoPi * 0.1875) < 1e-8);
    CHECK(std::abs(rep.estimates[0].amplitude - cplx(0.5, 1.5)) < 1e-8);
    CHECK(rep.seed == std::optional<std::uint64_t>(1));

    write_components("three.json", R"([{"re":1,"im":0,"normalized_freq":0.1},{"re":1,"im":0,"normalized_freq":0.115},{"re":1,"im":0,"normalized_freq":0.37}])");
    REQUIRE(run("simulate --n 32 --components " + path("three.json") + " --snr-db 10 --seed 1 --out " + path("three.csv")) == 0);
    REQUIRE(run("estimate --in " + path("three.csv") + " --report " + path("three-report.json")) == 0);
    const auto j = io::parse_json(io::read_text(path("three-report.json")), "report");
    CHECK(j.at("k_hat").get<int>() == 3);
    CHECK(j.at("config").at("order").at("epsilon_f").get<double>() == 1e-6);

    // re-running with the emitted config reproduces the report byte for byte
    io::write_text(path("emitted-config.json"), j.at("config").dump());
    REQUIRE(run("estimate --in " + path("three.csv") + " --config " + path("emitted-config.json") + " --report " + path("three-again.json")) == 0);
    CHECK(io::read_text(path("three-report.json")) == io::read_text(path("three-again.json")));

    // flags override
    REQUIRE(run("estimate --in " + path("three.csv") + " --epsa 0.01 --lambda 0.5 --report " + path("flags.json")) == 0);
    const auto f = io::parse_json(io::read_text(path("flags.json")), "report");
    CHECK(f.at("config").at("order").at("epsilon_a").get<double>() == 0.01);
    CHECK(f.at("config").at("train").at("lambda").get<double>() == 0.5);

    // pure noise: no components, still success
    io::write_text(path("noise.csv"), io::signal_to_csv(synthesize({}, 32, {1.0, 3})));
    REQUIRE(run("estimate --in " + path("noise.csv") + " --report " + path("noise.json")) == 0);
    CHECK(io::parse_json(io::read_text(path("noise.json")), "r").at("k_hat").get<int>() == 0);
}

TEST_CASE("estimate error exits", "[cli]") {
    io::write_text(path("bad.csv"), "index,re,im\n0,1,x\n");
    CHECK(run("estimate --in " + path("bad.csv") + " --report " + path("bad.json")) == 2);
    CHECK(run("estimate --in " + path("missing.csv") + " --report " + path("bad.json")) == 2);
    CHECK(run("estimate --report " + path("bad.json")) == 2);
    io::write_text(path("ok.csv"), io::signal_to_csv(synthesize({{{1.0, 0.0}, 1.0}}, 32, {0.01, 1})));
    CHECK(run("estimate --in " + path("ok.csv") + " --lambda 1.5 --report " + path("bad.json")) == 2);
    // runaway amplitude rate: partial report and exit 3
    CHECK(run("estimate --in " + path("ok.csv") + " --gamma-alpha 1e300 --report " + path("div.json")) == 3);
    CHECK(io::parse_json(io::read_text(path("div.json")), "r").contains("events"));
    CHECK(run("frobnicate") == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("experiment subcommands", "[cli]") {
    CHECK(run("experiment nonsense --out-dir " + path("exp")) == 2);

    REQUIRE(run("experiment order --trials 6 --seed 1 --out-dir " + path("exp1")) == 0);
    REQUIRE(run("experiment order --trials 6 --seed 1 --out-dir " + path("exp2")) == 0);
    const std::string a = io::read_text(path("exp1/order.json"));
    CHECK(a == io::read_text(path("exp2/order.json")));
    CHECK(io::read_text(path("exp1/order.csv")) == io::read_text(path("exp2/order.csv")));
    const SweepResult s = io::sweep_from_json(io::parse_json(a, "order"));
    REQUIRE(s.rows.size() == 5);
    for (const auto& row : s.rows) CHECK(row.histogram.size() == 6);
    CHECK(s.base_seed == 1);
}

TEST_CASE("gradcheck subcommand", "[cli]") {
    CHECK(run("gradcheck") == 0);
    CHECK(io::read_text(path("stdout.txt")).find("PASS") != std::string::npos);
    CHECK(run("gradcheck --n 2 --m 1") == 0);
    CHECK(run("gradcheck --self-test") == 1);
    CHECK(run("gradcheck --n 1") == 2);
}
