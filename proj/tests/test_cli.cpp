#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hamflow/experiments.hpp"

using namespace hamflow;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmpdir() {
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() / ("hamflow_cli_test_" + std::to_string(counter++));
    std::filesystem::create_directories(p);
    return p.string();
}

json mechanical_curvature_config() {
    return json{{"experiment", "curvature"},
                {"hamiltonian",
                 {{"name", "mechanical"},
                  {"params", {{"dim", 2}, {"potential", {{"type", "quadratic"}, {"coeffs", {1.0, 0.0}}}}}}}},
                {"states", json::array({{{"x", {0.3, -0.2}}, {"alpha", {0.4, 0.7}}}})},
                {"output", {{"csv", "curv.csv"}}}};
}

}  // namespace

TEST_CASE("config validation") {
    SECTION("unknown top-level keys are rejected") {
        json cfg{{"experiment", "heat"}, {"bogus", 1}};
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SECTION("unknown experiment names are rejected with the available list") {
        json cfg{{"experiment", "nope"}};
        CHECK_THROWS_WITH(validate_config(cfg), Catch::Matchers::ContainsSubstring("available:"));
    }
    SECTION("nested unknown keys are rejected") {
        json cfg{{"experiment", "heat"},
                 {"hamiltonian", {{"name", "euclidean"}, {"params", {{"dim", 1}}}, {"oops", 2}}}};
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        json cfg2{{"experiment", "heat"}, {"output", {{"csvv", "x"}}}};
        CHECK_THROWS_AS(validate_config(cfg2), ConfigError);
    }
    SECTION("missing required keys are rejected") {
        CHECK_THROWS_WITH(validate_config(json::object()), Catch::Matchers::ContainsSubstring("experiment"));
    }
    SECTION("the shipped schema file documents the same experiment list") {
        std::ifstream in(HAMFLOW_SCHEMA_PATH);
        REQUIRE(in.good());
        json schema;
        in >> schema;
        const auto& names = schema.at("properties").at("experiment").at("enum");
        CHECK(names.size() == 10);
        for (const auto& n : names) CHECK_NOTHROW(validate_config(json{{"experiment", n}, {"hamiltonian", {{"name", "euclidean"}, {"params", {{"dim", 1}}}}}, {"points", json::array()}, {"x0", {0.1}}, {"u", {{"type", "linear"}, {"coeffs", {1.0}}}}}));
    }
}

TEST_CASE("experiments") {
    SECTION("curvature on the mechanical fixture reproduces diag(1, 0)") {
        const std::string dir = tmpdir();
        auto files = run_experiment(mechanical_curvature_config(), dir);
        REQUIRE(files.size() == 1);
        std::ifstream in(files[0]);
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header ==
              "x1,x2,alpha_1,alpha_2,R_11,R_12,R_21,R_22,ric,ric_N3,ric_N4,ric_N1e+06");
        std::vector<double> vals;
        std::stringstream ss(row);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        REQUIRE(vals.size() == 12);
        CHECK(std::abs(vals[4] - 1.0) <= 1e-5);  // R_11
        CHECK(std::abs(vals[5]) <= 1e-5);        // R_12
        CHECK(std::abs(vals[7]) <= 1e-5);        // R_22
        CHECK(std::abs(vals[8] - 1.0) <= 1e-5);  // ric
    }
    SECTION("heat experiment with constant data: all diagnostic deltas are zero") {
        const std::string dir = tmpdir();
        json cfg{{"experiment", "heat"},
                 {"hamiltonian", {{"name", "euclidean"}, {"params", {{"dim", 1}}}}},
                 {"grid", {{"cells", 32}, {"amp", 0.0}}},
                 {"T", 0.001}};
        auto files = run_experiment(cfg, dir);
        std::ifstream in(files[0]);
        std::string line;
        std::getline(in, line);
        CHECK(line == "t,mass,energy,entropy,slope");
        double m0 = -1;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string tok;
            std::vector<double> v;
            while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
            if (m0 < 0) m0 = v[1];
            CHECK(v[1] == Catch::Approx(m0).margin(1e-14));
            CHECK(std::abs(v[2]) <= 1e-15);  // energy
            CHECK(std::abs(v[4]) <= 1e-13);  // slope
        }
    }
    SECTION("transport experiment: Talagrand slack column is nonnegative") {
        const std::string dir = tmpdir();
        json cfg{{"experiment", "transport"}, {"a", 0.8}, {"samples", 1024}};
        auto files = run_experiment(cfg, dir);
        std::ifstream in(files[0]);
        std::string line;
        std::getline(in, line);
        CHECK(line == "fixture,inequality,lhs,rhs,slack");
        bool saw_talagrand = false;
        while (std::getline(in, line)) {
            if (line.find("talagrand") == std::string::npos) continue;
            saw_talagrand = true;
            const double slack = std::stod(line.substr(line.rfind(',') + 1));
            CHECK(slack >= 0.0);
        }
        CHECK(saw_talagrand);
    }
    SECTION("mms experiment tabulates the refinement gaps") {
        const std::string dir = tmpdir();
        json cfg{{"experiment", "mms"},
                 {"hamiltonian", {{"name", "euclidean"}, {"params", {{"dim", 1}}}}},
                 {"grid", {{"cells", 48}}},
                 {"T", 0.002},
                 {"k_list", {2, 4}},
                 {"output", {{"csv", "mms.csv"}}}};
        auto files = run_experiment(cfg, dir);
        std::ifstream in(files[0]);
        std::string header, r1, r2;
        std::getline(in, header);
        std::getline(in, r1);
        std::getline(in, r2);
        CHECK(header == "k,delta,l2_gap_to_explicit");
        const double g1 = std::stod(r1.substr(r1.rfind(',') + 1));
        const double g2 = std::stod(r2.substr(r2.rfind(',') + 1));
        CHECK(g2 < g1);  // refinement shrinks the gap
    }
    SECTION("field dumps and plot data are emitted when requested") {
        const std::string dir = tmpdir();
        json cfg{{"experiment", "entropyflow"},
                 {"hamiltonian", {{"name", "euclidean"}, {"params", {{"dim", 1}}}}},
                 {"grid", {{"cells", 32}}},
                 {"T", 0.001},
                 {"output", {{"csv", "e.csv"}, {"dump", "rho"}, {"plot", "e.dat"}}}};
        auto files = run_experiment(cfg, dir);
        REQUIRE(files.size() == 4);
        GridField f = read_field_dump((std::filesystem::path(dir) / "rho").string());
        CHECK(f.cells() == 32);
        std::ifstream plot((std::filesystem::path(dir) / "e.dat").string());
        double t, e;
        CHECK(static_cast<bool>(plot >> t >> e));
    }
}

TEST_CASE("determinism: re-running a config reproduces CSV outputs byte-identically") {
    json cfg{{"experiment", "curvature"},
             {"hamiltonian", {{"name", "sphere_chart"}, {"params", json::object()}}},
             {"samples", 3},
             {"seed", 77},
             {"output", {{"csv", "c.csv"}}}};
    const std::string d1 = tmpdir(), d2 = tmpdir();
    auto f1 = run_experiment(cfg, d1);
    auto f2 = run_experiment(cfg, d2);
    const std::string b1 = slurp(f1[0]), b2 = slurp(f2[0]);
    CHECK(b1.size() > 0);
    CHECK(b1 == b2);
}

TEST_CASE("CLI binary") {
    const std::string exe = HAMFLOW_CLI_PATH;
    const std::string dir = tmpdir();
    auto shell = [](const std::string& cmd) { return std::system(cmd.c_str()); };
    SECTION("invalid config exits with code 2 and JSON on stderr") {
        const std::string cfg_path = dir + "/bad.json";
        std::ofstream(cfg_path) << R"({"experiment": "heat", "bogus": 1})";
        const int rc = shell(exe + " run --config " + cfg_path + " --out " + dir + " 2> " + dir +
                             "/err.json > /dev/null");
        CHECK(WEXITSTATUS(rc) == 2);
        json err;
        std::ifstream(dir + "/err.json") >> err;
        CHECK(err.contains("error"));
    }
    SECTION("a good config runs with exit code 0") {
        const std::string cfg_path = dir + "/good.json";
        std::ofstream(cfg_path) << mechanical_curvature_config().dump();
        const int rc = shell(exe + " run --config " + cfg_path + " --out " + dir + " > /dev/null");
        CHECK(WEXITSTATUS(rc) == 0);
        CHECK(std::filesystem::exists(dir + "/curv.csv"));
    }
    SECTION("batch configs run across threads") {
        json batch;
        batch["experiments"] = json::array();
        for (int i = 0; i < 3; ++i) {
            json c = mechanical_curvature_config();
            c["output"]["csv"] = "curv" + std::to_string(i) + ".csv";
            batch["experiments"].push_back(c);
        }
        const std::string cfg_path = dir + "/batch.json";
        std::ofstream(cfg_path) << batch.dump();
        const int rc =
            shell(exe + " run --config " + cfg_path + " --out " + dir + " --threads 3 > /dev/null");
        CHECK(WEXITSTATUS(rc) == 0);
        for (int i = 0; i < 3; ++i) CHECK(std::filesystem::exists(dir + "/curv" + std::to_string(i) + ".csv"));
    }
    SECTION("acceptance filter runs the named criterion") {
        const int rc = shell(exe + " acceptance --filter flat-curvature > " + dir + "/acc.txt");
        CHECK(WEXITSTATUS(rc) == 0);
        const std::string out = slurp(dir + "/acc.txt");
        CHECK(out.find("PASS") != std::string::npos);
        CHECK(out.find("flat-curvature") != std::string::npos);
    }
    SECTION("unknown acceptance filter lists the available criteria") {
        const int rc = shell(exe + " acceptance --filter nonsense 2> " + dir + "/err2.json > /dev/null");
        CHECK(WEXITSTATUS(rc) == 2);
        json err;
        std::ifstream(dir + "/err2.json") >> err;
        CHECK(std::string(err.at("error")).find("available") != std::string::npos);
    }
}
