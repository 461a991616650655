#include "doctest.h"

#include "mixlab/config.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/experiment.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace mixlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mixlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

std::string status_of(const nlohmann::json& m, const std::string& id) {
  for (const auto& e : m["invariants"])
    if (e["id"] == id) return e["status"];
  return "missing";
}

CommandResult run(const std::string& cmd, const std::string& cfg_text, const fs::path& dir,
                  std::uint64_t seed_offset = 0) {
  RunOptions opt;
  opt.out_dir = dir.string();
  opt.quiet = true;
  opt.seed_offset = seed_offset;
  return run_command(cmd, parse_config(cfg_text), opt);
}

const char* kSmall = "domain.h = 1/64\nschedule.max_exponent = 24\n";

std::map<std::pair<int, int>, double> triplets(const fs::path& p) {
  std::map<std::pair<int, int>, double> out;
  std::istringstream in(slurp(p));
  int i, j;
  double v;
  while (in >> i >> j >> v) out[{i, j}] = v;
  return out;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("config defaults") {
    const ExperimentConfig c = parse_config("");
    CHECK(c.domain.a == 0.0);
    CHECK(c.domain.b == 1.0);
    CHECK(c.domain.h == 1.0 / 128);
    CHECK(c.n_schedule.size() == 31);
    CHECK(c.n_schedule.back() == (std::int64_t{1} << 30));
    CHECK(c.linear_solver == SolverKind::cholesky);
  }

  TEST_CASE("config values, fractions, comments and lists") {
    const ExperimentConfig c = parse_config(
        "# header\n"
        "domain.h = 1/64   # trailing\n"
        "\n"
        "problem.q = 0.25\n"
        "problem.lambda_factors = 0.2, 0.4\n"
        "schedule.n = 1, 4, 16\n"
        "seeds = 9, 10\n"
        "linear_solver = cg\n");
    CHECK(c.domain.h == 1.0 / 64);
    CHECK(c.q == 0.25);
    CHECK(c.lambda_factors == std::vector<double>{0.2, 0.4});
    CHECK(c.n_schedule == std::vector<std::int64_t>{1, 4, 16});
    CHECK(c.seeds == std::vector<std::uint64_t>{9, 10});
    CHECK(c.linear_solver == SolverKind::conjugate_gradient);
    CHECK(parse_config("schedule.max_exponent = 3").n_schedule ==
          std::vector<std::int64_t>{1, 2, 4, 8});
  }

  TEST_CASE("config errors name the line") {
    auto message = [](const std::string& text) {
      try {
        parse_config(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message("\nfoo = 1").find("config line 2") != std::string::npos);
    CHECK(message("\nfoo = 1").find("unknown key 'foo'") != std::string::npos);
    CHECK(message("problem.q = 1\nproblem.q = 2").find("repeated") != std::string::npos);
    CHECK(message("problem.q =").find("empty value") != std::string::npos);
    CHECK(message("problem.q = abc").find("not a number") != std::string::npos);
    CHECK(message("seeds = 1,,2").find("empty list entry") != std::string::npos);
    CHECK(message("no equals sign").find("expected") != std::string::npos);
    CHECK(message("schedule.n = 4, 2").find("strictly increasing") != std::string::npos);
    CHECK(message("problem.p = 7").find("problem.p") != std::string::npos);
    CHECK(message("linear_solver = lu").find("config line 1") != std::string::npos);
    CHECK(message("domain.h = 0.3").find("divide") != std::string::npos);
  }

  TEST_CASE("canonical form and hash") {
    const ExperimentConfig a = parse_config("domain.h = 1/64\noutput_dir = x");
    const ExperimentConfig b = parse_config("output_dir = y\ndomain.h = 0.015625");
    CHECK(canonical_config(a) == canonical_config(b));
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash(parse_config("domain.h = 1/128")));
    CHECK(parse_config(canonical_config(a)).domain.h == a.domain.h);
    CHECK(format_real(0.1) == "0.10000000000000001");
  }

  TEST_CASE("assemble writes operators and passes") {
    const fs::path dir = scratch("assemble");
    const CommandResult r = run("assemble", kSmall, dir);
    CHECK(r.exit_code == 0);
    const nlohmann::json m = manifest(dir);
    CHECK(m["result"] == "pass");
    for (const char* id : {"DM1", "DM2", "OP1", "OP2", "OP3", "OP4", "OP5", "OP6", "OP7"})
      CHECK(status_of(m, id) == "pass");
    CHECK(status_of(m, "SF1") == "skip");
    for (const char* f : {"A_loc.txt", "A_nl.txt", "M_omega.txt", "M_full.txt"})
      CHECK(fs::exists(dir / f));
    fs::remove_all(dir);
  }

  TEST_CASE("kernel constant scales the nonlocal dump exactly") {
    const fs::path d1 = scratch("kappa1"), d2 = scratch("kappa2");
    REQUIRE(run("assemble", kSmall, d1).exit_code == 0);
    REQUIRE(run("assemble", std::string(kSmall) + "domain.kernel_constant = 2\n", d2).exit_code == 0);
    const auto t1 = triplets(d1 / "A_nl.txt"), t2 = triplets(d2 / "A_nl.txt");
    REQUIRE(t1.size() == t2.size());
    for (const auto& [k, v] : t1) CHECK(t2.at(k) == 2.0 * v);
    CHECK(slurp(d1 / "A_loc.txt") == slurp(d2 / "A_loc.txt"));
    fs::remove_all(d1);
    fs::remove_all(d2);
  }

  TEST_CASE("misaligned mesh is a config error") {
    ExperimentConfig c;
    c.domain.h = 0.3;
    RunOptions opt;
    opt.out_dir = scratch("misaligned").string();
    opt.quiet = true;
    const CommandResult r = run_command("assemble", c, opt);
    CHECK(r.exit_code == 1);
    CHECK(r.message.find("divide") != std::string::npos);
  }

  TEST_CASE("singular runs per exponent") {
    {
      const fs::path dir = scratch("sing05");
      run("singular", std::string(kSmall) + "problem.q = 0.5\n", dir);
      const nlohmann::json m = manifest(dir);
      CHECK(status_of(m, "SF1") == "pass");
      CHECK(status_of(m, "SF2") == "pass");
      CHECK(status_of(m, "SF4") == "pass");
      CHECK(fs::exists(dir / "singular_q0.5.csv"));
      CHECK(fs::exists(dir / "u_hat_q0.5.txt"));
      fs::remove_all(dir);
    }
    {
      const fs::path dir = scratch("sing1");
      run("singular", std::string(kSmall) + "problem.q = 1\n", dir);
      CHECK(status_of(manifest(dir), "SF10") == "pass");
      fs::remove_all(dir);
    }
    {
      const fs::path dir = scratch("sing3");
      run("singular", std::string(kSmall) + "problem.q = 3\n", dir);
      const nlohmann::json m = manifest(dir);
      CHECK(status_of(m, "SF6") == "pass");
      CHECK(status_of(m, "SF4") == "skip");
      for (const auto& e : m["invariants"])
        if (e["id"] == "SF4") CHECK(e["detail"].get<std::string>().find("q") != std::string::npos);
      fs::remove_all(dir);
    }
  }

  TEST_CASE("sobolev rejects exponents outside (0,1)") {
    const fs::path dir = scratch("sob15");
    CHECK(run("sobolev", std::string(kSmall) + "problem.q = 1.5\n", dir).exit_code == 1);
    fs::remove_all(dir);
  }

  TEST_CASE("sobolev passes") {
    const fs::path dir = scratch("sob");
    CHECK(run("sobolev", kSmall, dir).exit_code == 0);
    CHECK(fs::exists(dir / "sobolev_q0.5.csv"));
    fs::remove_all(dir);
  }

  TEST_CASE("nehari output is reproducible") {
    const fs::path d1 = scratch("neh1"), d2 = scratch("neh2"), d3 = scratch("neh3");
    CHECK(run("nehari", kSmall, d1).exit_code == 0);
    CHECK(run("nehari", kSmall, d2).exit_code == 0);
    for (const char* f : {"nehari.csv", "lambda_star.csv", "nehari_witness.csv"})
      CHECK(slurp(d1 / f) == slurp(d2 / f));
    CHECK(status_of(manifest(d1), "NL1") == "pass");
    run("nehari", kSmall, d3, 17);
    CHECK(manifest(d3)["seed_offset"] == 17);
    CHECK(slurp(d1 / "lambda_star.csv") != slurp(d3 / "lambda_star.csv"));
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::remove_all(d3);
  }

  TEST_CASE("manifest lists every invariant once") {
    const fs::path dir = scratch("manifest");
    run("assemble", kSmall, dir);
    const nlohmann::json m = manifest(dir);
    std::multiset<std::string> ids;
    for (const auto& e : m["invariants"]) ids.insert(e["id"].get<std::string>());
    CHECK(ids.size() == invariant_catalog().size());
    for (const InvariantInfo& info : invariant_catalog()) CHECK(ids.count(info.id) == 1);
    CHECK(m["command"] == "assemble");
    CHECK(m["config_hash"] == config_hash(parse_config(kSmall)));
    const int total = m["summary"]["pass"].get<int>() + m["summary"]["fail"].get<int>() +
                      m["summary"]["skip"].get<int>();
    CHECK(total == static_cast<int>(invariant_catalog().size()));
    fs::remove_all(dir);
  }

  TEST_CASE("unknown command and missing config") {
    RunOptions opt;
    opt.quiet = true;
    opt.out_dir = scratch("unknown").string();
    CHECK(run_command("frobnicate", ExperimentConfig{}, opt).exit_code == 1);
    CHECK(run_command_file("assemble", "/nonexistent/cfg.txt", opt).exit_code == 1);
    CHECK(command_names() ==
          std::vector<std::string>{"assemble", "singular", "sobolev", "nehari", "verify"});
  }

  TEST_CASE("invariant log merging") {
    InvariantLog log;
    log.record("DM1", Status::skip, "a");
    log.record("DM1", Status::pass, "b");
    CHECK(log.at("DM1").status == Status::pass);
    log.record("DM1", Status::fail, "c");
    log.record("DM1", Status::pass, "d");
    CHECK(log.at("DM1").status == Status::fail);
    CHECK(log.any_failed());
    CHECK_FALSE(log.has("DM2"));
    CHECK_THROWS(log.record("XYZ", Status::pass, ""));
  }
}
