#include <doctest.h>

#include "bzsl/runconfig.hpp"
#include "test_support.hpp"

using namespace bzsl;

TEST_CASE("config file parsing") {
    TempDir dir("cfg");
    dir.write("a.cfg",
              "# comment\n"
              "kappa0 = 0.5\n"
              "\n"
              "features=data/x.bmat\n"
              "grid.kappa1=0.1, 1, 10\n");
    const RunConfig cfg = RunConfig::from_file(dir.file("a.cfg"));
    CHECK(cfg.get_double("kappa0", 0.0) == 0.5);
    CHECK(cfg.get_string("features", "") == "data/x.bmat");
    CHECK(cfg.get_double_list("grid.kappa1") == std::vector<double>{0.1, 1.0, 10.0});
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK(!cfg.get_optional("missing").has_value());
    CHECK_THROWS_AS(cfg.get_required("missing"), ConfigError);

    dir.write("dup.cfg", "kappa0=1\nkappa0=2\n");
    CHECK_THROWS_WITH_AS(RunConfig::from_file(dir.file("dup.cfg")), "duplicate key kappa0",
                         ConfigError);

    dir.write("noeq.cfg", "kappa0 0.5\n");
    CHECK_THROWS_AS(RunConfig::from_file(dir.file("noeq.cfg")), ConfigError);

    CHECK_THROWS_AS(RunConfig::from_file(dir.file("absent.cfg")), ConfigError);
}

TEST_CASE("flags collide with file keys instead of overriding them") {
    TempDir dir("cfg2");
    dir.write("a.cfg", "kappa0=1\n");
    RunConfig cfg = RunConfig::from_file(dir.file("a.cfg"));
    CHECK_THROWS_WITH_AS(cfg.set("kappa0", "2"), "duplicate key kappa0", ConfigError);
    cfg.set("kappa1", "3");
    CHECK(cfg.get_double("kappa1", 0.0) == 3.0);
}

TEST_CASE("unknown keys are rejected") {
    RunConfig cfg;
    cfg.set("kappa0", "1");
    cfg.set("typo_key", "x");
    CHECK_THROWS_WITH_AS(cfg.require_known({"kappa0"}), "unknown key typo_key", ConfigError);
    cfg = RunConfig{};
    cfg.set("kappa0", "1");
    CHECK_NOTHROW(cfg.require_known({"kappa0", "kappa1"}));
}

TEST_CASE("typed getters validate their input") {
    RunConfig cfg;
    cfg.set("bad", "abc");
    CHECK_THROWS_AS(cfg.get_double("bad", 0.0), ConfigError);
    CHECK_THROWS_AS(cfg.get_int("bad", 0), ConfigError);
    cfg.set("neg", "-4");
    CHECK(cfg.get_int("neg", 0) == -4);
    CHECK_THROWS_AS(cfg.get_u64("neg", 0), ConfigError);
    CHECK(parse_int_list("1,2, 3") == std::vector<int>{1, 2, 3});
    CHECK(parse_double_list("").empty());
}
