// End-to-end checks of the command-line surface: exit codes, file formats,
// and the verify/bounds subcommands.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "jlssabs/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = JLSSABS_DATA_DIR;
const std::string kCli = JLSSABS_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = "\"" + kCli + "\" " + args + " > /dev/null 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

struct Workdir {
    fs::path dir;
    explicit Workdir(const std::string& name) : dir(name) { fs::create_directories(dir); }
    std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

void build_pipeline(const Workdir& w) {
    const std::string data = kData + "/sec6";
    for (int i = 1; i <= 4; ++i) {
        std::string cmd = "abstract --system " + data + "/subsystem" +
                          std::to_string(i) + ".json --p " + data +
                          (i <= 2 ? "/p12.csv" : "/p34.csv") + " --kappa-hat " +
                          (i <= 2 ? "3" : "2.5") +
                          " --pi 1 --bhat " + (i <= 2 ? "identity" : "behavior") +
                          " --d 0.5 --verify-trials 500 --out " + (w / "abs") +
                          std::to_string(i) + ".json";
        REQUIRE(run(cmd) == 0);
    }
    std::string cmd = "compose --network " + data + "/network.json --abstractions " +
                      (w / "abs1.json") + "," + (w / "abs2.json") + "," +
                      (w / "abs3.json") + "," + (w / "abs4.json") +
                      " --zero-ext 3,4 --d 0.5 --out " + (w / "cert.json");
    REQUIRE(run(cmd) == 0);
}

}  // namespace

TEST_CASE("malformed JSON exits 1") {
    Workdir w("cli_bad_json");
    std::ofstream(w / "broken.json") << "{ not json";
    CHECK(run("abstract --system " + (w / "broken.json") + " --p " + kData +
              "/sec6/p12.csv --kappa-hat 3 --out " + (w / "x.json")) == 1);
}

TEST_CASE("condition violations exit 2 and name the step") {
    Workdir w("cli_bad_p");
    std::ofstream(w / "p_bad.csv") << "1\n0\n";  // not (A,B)-invariant for the system below
    // autonomous damped rotation: feasible step 1, step 2 must fail
    std::ofstream(w / "sys.json") << R"({"id": 1,
      "A": [[-1, 1], [-1, -1]], "B": [[], []], "C": [[1, 0]],
      "E": [[0.1, 0], [0, 0.1]]})";
    const std::string cmd = "abstract --system " + (w / "sys.json") + " --p " +
                            (w / "p_bad.csv") + " --kappa-hat 0.1 --out " + (w / "x.json");
    CHECK(run(cmd) == 2);
}

TEST_CASE("small-gain failure exits 3") {
    Workdir w("cli_smallgain");
    build_pipeline(w);
    const std::string data = kData + "/sec6";
    // d = 1 pushes the spectral radius above one
    for (int i = 1; i <= 4; ++i) {
        std::string cmd = "abstract --system " + data + "/subsystem" +
                          std::to_string(i) + ".json --p " + data +
                          (i <= 2 ? "/p12.csv" : "/p34.csv") + " --kappa-hat " +
                          (i <= 2 ? "3" : "2.5") +
                          " --pi 1 --bhat " + (i <= 2 ? "identity" : "behavior") +
                          " --d 1 --verify-trials 200 --out " + (w / "d1_abs") +
                          std::to_string(i) + ".json";
        REQUIRE(run(cmd) == 0);
    }
    // certificate gains at d = 1 need not fail; force the failing regime by
    // composing the d=1 abstractions against themselves with inflated coupling.
    // The library-level d=1 rejection is asserted in the acceptance suite; here
    // we check the exit-code path with an explicitly infeasible mu.
    std::string cmd = "compose --network " + data + "/network.json --abstractions " +
                      (w / "d1_abs1.json") + "," + (w / "d1_abs2.json") + "," +
                      (w / "d1_abs3.json") + "," + (w / "d1_abs4.json") +
                      " --mu 1,1,-1,1 --zero-ext 3,4 --d 1 --out " + (w / "cert_d1.json");
    CHECK(run(cmd) == 3);
}

TEST_CASE("bounds subcommand writes the four families") {
    Workdir w("cli_bounds");
    build_pipeline(w);
    const std::string cmd = "bounds --certificate " + (w / "cert.json") +
                            " --ev0 2 --eu-hat 1.5 --epsilon 1 --grid 0:2:0.5 --out " +
                            (w / "bounds.csv");
    REQUIRE(run(cmd) == 0);
    std::ifstream in(w / "bounds.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,moment_bound,pointwise_prob,sup_prob_T,inf_horizon");
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 5);

    // eps = 0 is rejected
    CHECK(run("bounds --certificate " + (w / "cert.json") +
              " --ev0 1 --epsilon 0 --grid 0:1:0.5 --out " + (w / "x.csv")) == 1);
}

TEST_CASE("verify passes on sound artifacts and flags corruption") {
    Workdir w("cli_verify");
    build_pipeline(w);
    const std::string data = kData + "/sec6";
    CHECK(run("verify --network " + data + "/network.json --certificate " +
              (w / "cert.json") + " --trials 5000 --d 0.5") == 0);

    // corrupt Q of subsystem 1 inside the stored certificate
    json cert = jlssabs::io::load_json(w / "cert.json");
    cert["subsystems"][0]["ssf"]["Q"][0][0] = 7.5;
    jlssabs::io::save_json(w / "cert_bad.json", cert);
    CHECK(run("verify --network " + data + "/network.json --certificate " +
              (w / "cert_bad.json") + " --trials 5000 --d 0.5") == 5);
}

TEST_CASE("dominance failure exits 4 on a corrupted certificate") {
    Workdir w("cli_dominance");
    build_pipeline(w);
    const std::string data = kData + "/sec6";

    json cert = jlssabs::io::load_json(w / "cert.json");
    const double eta = cert["slopes"]["literal"]["eta"].get<double>();
    cert["slopes"]["literal"]["eta"] = 100.0 * eta;  // bound now decays far too fast
    jlssabs::io::save_json(w / "cert_bad.json", cert);

    const std::string sim_args =
        " --inputs " + data + "/inputs.csv --trials 60 --dt 1e-3 --horizon 3"
        " --seed 11 --epsilon 1 --T 3 --a 1,-1,-5,1,-1,-5,1,-2,1,-2"
        " --ahat 1.44,-0.69,1.44,-0.69,1,1 --d 0.5";
    CHECK(run("simulate --network " + data + "/network.json --certificate " +
              (w / "cert_bad.json") + sim_args + " --out " + (w / "bad")) == 4);
    CHECK(run("simulate --network " + data + "/network.json --certificate " +
              (w / "cert.json") + sim_args + " --out " + (w / "good")) == 0);
}

TEST_CASE("simulate rejects inputs that drive pinned-to-zero channels") {
    Workdir w("cli_pinned");
    build_pipeline(w);
    const std::string data = kData + "/sec6";
    std::ofstream(w / "bad_inputs.csv") << "t,u_1,u_2,u_3,u_4\n0,0.5,0.5,0.7,0\n";
    CHECK(run("simulate --network " + data + "/network.json --certificate " +
              (w / "cert.json") + " --inputs " + (w / "bad_inputs.csv") +
              " --trials 2 --dt 1e-2 --horizon 1 --a 1,-1,-5,1,-1,-5,1,-2,1,-2"
              " --ahat 1.44,-0.69,1.44,-0.69,1,1 --d 0.5 --out " + (w / "x")) == 1);
}
