#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "tscale/cli_config.hpp"

using namespace tscale;

TEST_CASE("empty config keeps the defaults") {
    std::istringstream in("");
    const CliConfig cfg = parse_config(in);
    CHECK(cfg.table_path.empty());
    CHECK(cfg.output_dir == ".");
    CHECK(cfg.params.p == doctest::Approx(0.4));
    CHECK(cfg.params.q == doctest::Approx(0.6));
    CHECK(cfg.params.c == doctest::Approx(0.0153));
    CHECK(cfg.thickness_cm == doctest::Approx(0.4));
    CHECK(cfg.refractive_index == doctest::Approx(1.3));
    cfg.validate();
}

TEST_CASE("all keys parse") {
    std::istringstream in(
        "# a comment\n"
        "table = /tmp/t.mtab\n"
        "output_dir = /tmp/out  # trailing comment\n"
        "p = 0.5\n"
        "q = 0.7\n"
        "c = 0.02\n"
        "photons = 5000\n"
        "seed = 9\n"
        "thickness_cm = 0.3\n"
        "n = 1.4\n"
        "detection_half_angle_deg = 4\n"
        "backing_white_factor = 0.9\n"
        "threads = 2\n"
        "\n");
    const CliConfig cfg = parse_config(in, "inline");
    CHECK(cfg.table_path == "/tmp/t.mtab");
    CHECK(cfg.output_dir == "/tmp/out");
    CHECK(cfg.params.p == doctest::Approx(0.5));
    CHECK(cfg.params.q == doctest::Approx(0.7));
    CHECK(cfg.params.c == doctest::Approx(0.02));
    CHECK(cfg.sim.n_photons == 5000);
    CHECK(cfg.sim.seed == 9);
    CHECK(cfg.thickness_cm == doctest::Approx(0.3));
    CHECK(cfg.refractive_index == doctest::Approx(1.4));
    cfg.validate();
}

TEST_CASE("errors carry the source location") {
    std::istringstream unknown("speed = 9\n");
    CHECK_THROWS_WITH_AS(parse_config(unknown, "cfg"), doctest::Contains("cfg:1"),
                         std::runtime_error);

    std::istringstream dup("p = 0.4\np = 0.5\n");
    CHECK_THROWS_WITH_AS(parse_config(dup, "cfg"), doctest::Contains("duplicate"),
                         std::runtime_error);

    std::istringstream noval("p\n");
    CHECK_THROWS(parse_config(noval, "cfg"));

    std::istringstream bad("photons = many\n");
    CHECK_THROWS(parse_config(bad, "cfg"));
}

TEST_CASE("validation rejects out-of-range values") {
    std::istringstream zero_q("q = 0\n");
    const CliConfig cfg = parse_config(zero_q);
    CHECK_THROWS(cfg.validate());

    std::istringstream neg("thickness_cm = -1\n");
    CHECK_THROWS(parse_config(neg).validate());

    std::istringstream thin_n("n = 0.5\n");
    CHECK_THROWS(parse_config(thin_n).validate());
}

TEST_CASE("missing config file") {
    CHECK_THROWS(parse_config_file("/nonexistent/tscale.cfg"));
}
