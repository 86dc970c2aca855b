#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

int run(const std::string& args) {
    std::string cmd = "./tapcli " + args + " > /dev/null 2> cli_err.txt";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

// CSV body with comment lines stripped of the timestamp line
std::string body_of(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream body;
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("# generated:", 0) != 0) body << line << "\n";
    return body.str();
}

std::string cell_for(const std::string& path, const std::string& key) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
    }
    return "";
}

const char* kSkConfig = R"({
  "xi": {"coeffs": [[2, 0.25]]},
  "measure": {"atoms": [[0.0, 1.0]]},
  "grid": {"points": 1201, "quad_nodes": 48},
  "mc": {"paths": 20000, "seed": 7}
})";

}  // namespace

TEST_CASE("parisi-solve writes the RS value") {
    write_file("cfg_sk.json", kSkConfig);
    REQUIRE(run("--task parisi-solve --config cfg_sk.json --out ps.csv") == 0);
    double v = std::stod(cell_for("ps.csv", "parisi_value"));
    CHECK(v == doctest::Approx(0.8181471805599453).epsilon(1e-7));
}

TEST_CASE("unknown config keys are rejected with a usage error") {
    write_file("cfg_bad.json", R"({"xi": {"coeffs": [[2, 0.25]]}, "oops": 1})");
    CHECK(run("--task parisi-solve --config cfg_bad.json --out bad.csv") == 2);
    write_file("cfg_bad2.json", R"({"xi": {"coeffs": [[2, 0.25]], "extra": 3}})");
    CHECK(run("--task parisi-solve --config cfg_bad2.json --out bad.csv") == 2);
    CHECK(run("--task no-such-task --config cfg_sk.json") == 2);
}

TEST_CASE("verify-suite passes and is byte-deterministic") {
    write_file("cfg_vs.json", kSkConfig);
    REQUIRE(run("--task verify-suite --config cfg_vs.json --seed 5 --out vs1.csv") == 0);
    REQUIRE(run("--task verify-suite --config cfg_vs.json --seed 5 --out vs2.csv") == 0);
    CHECK(body_of("vs1.csv") == body_of("vs2.csv"));
    CHECK(!body_of("vs1.csv").empty());
}

TEST_CASE("sde-sim determinism and moment sanity") {
    write_file("cfg_sde.json", R"({
      "xi": {"coeffs": [[2, 0.64]]},
      "measure": {"prefix": {"u": [0.4], "q": [0.5], "tail": [[0.5, 0.6]]}},
      "grid": {"points": 1201, "quad_nodes": 48},
      "mc": {"paths": 20000, "seed": 9}
    })");
    REQUIRE(run("--task sde-sim --config cfg_sde.json --out sde1.csv") == 0);
    REQUIRE(run("--task sde-sim --config cfg_sde.json --out sde2.csv") == 0);
    CHECK(body_of("sde1.csv") == body_of("sde2.csv"));
    // a different seed changes the body
    REQUIRE(run("--task sde-sim --config cfg_sde.json --seed 10 --out sde3.csv") == 0);
    CHECK(body_of("sde1.csv") != body_of("sde3.csv"));
}

TEST_CASE("lambda-curve endpoint row") {
    write_file("cfg_lc.json", R"({
      "xi": {"coeffs": [[2, 1.0]]},
      "grid": {"points": 1201, "quad_nodes": 48},
      "mc": {"seed": 3},
      "task": {"thetas": [1.0], "multistarts": 1}
    })");
    REQUIRE(run("--task lambda-curve --config cfg_lc.json --out lc.csv") == 0);
    std::ifstream in("lc.csv");
    std::string line, data;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#' && line[0] != 'a') data = line;
    double lam1 = std::stod(data.substr(data.find(',') + 1));
    CHECK(lam1 == doctest::Approx(std::log(2.0) + 0.5).epsilon(1e-7));
}

TEST_CASE("freeconv density task matches the semicircle peak") {
    write_file("cfg_fc.json", R"({
      "task": {"atoms": [[0.0, 1.0]], "t": 1.0, "grid_min": -0.01, "grid_max": 0.01,
               "grid_n": 3}
    })");
    REQUIRE(run("--task freeconv --config cfg_fc.json --out fc.csv") == 0);
    std::ifstream in("fc.csv");
    std::string line;
    std::vector<double> dens;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
        dens.push_back(std::stod(line.substr(line.find(',') + 1)));
    }
    REQUIRE(dens.size() == 3);
    CHECK(dens[1] == doctest::Approx(1.0 / M_PI).epsilon(1e-6));
}

TEST_CASE("tap-eval reports value, defect and gradients") {
    write_file("cfg_te.json", R"({
      "xi": {"coeffs": [[2, 0.64]]},
      "measure": {"prefix": {"u": [0.4], "q": [0.2], "tail": [[0.2, 0.6]]}},
      "grid": {"points": 1201, "quad_nodes": 48},
      "task": {"mu": [0.5, -0.3, 0.2, -0.4]}
    })");
    REQUIRE(run("--task tap-eval --config cfg_te.json --out te.csv") == 0);
    CHECK(!cell_for("te.csv", "tap_value").empty());
    CHECK(!cell_for("te.csv", "defect").empty());
    CHECK(!cell_for("te.csv", "grad_3").empty());
    double q = std::stod(cell_for("te.csv", "q_mu"));
    CHECK(q == doctest::Approx((0.25 + 0.09 + 0.04 + 0.16) / 4.0));
}

TEST_CASE("rmt-verify small run passes") {
    write_file("cfg_rmt.json", R"({
      "mc": {"seed": 2},
      "task": {"N": 300, "samples": 12, "t": 1.0}
    })");
    CHECK(run("--task rmt-verify --config cfg_rmt.json --out rmt.csv") == 0);
}
