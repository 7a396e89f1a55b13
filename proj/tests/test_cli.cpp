// End-to-end tests of the command-line tool: exit codes, manifest layout,
// config replay, CSV outputs, and schema rejection.  The path to the binary
// arrives as the positional argument.
#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

fs::path tmp_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("hypocoerce_cli_" + std::to_string(static_cast<long>(getpid())));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

struct CliRun {
    int code = -1;
    std::string out, err;
    json manifest;  // parsed when stdout looks like JSON
};

CliRun run_cli(const std::string& args) {
    static int counter = 0;
    fs::path so = tmp_dir() / ("stdout_" + std::to_string(counter) + ".txt");
    fs::path se = tmp_dir() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    std::string cmd =
        "\"" + g_cli + "\" " + args + " > \"" + so.string() + "\" 2> \"" + se.string() + "\"";
    int raw = std::system(cmd.c_str());
    CliRun r;
    r.code = (raw != -1 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    if (!r.out.empty() && r.out[0] == '{') {
        try {
            r.manifest = json::parse(r.out);
        } catch (...) {
        }
    }
    return r;
}

std::string qpath(const fs::path& p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("constants subcommand reports the closed-form rates") {
    auto r = run_cli("constants --geometry heisenberg --beta 3 --q 3");
    REQUIRE(r.code == 0);
    REQUIRE(r.manifest.is_object());
    CHECK(r.manifest["version"].get<std::string>() == "0.1.0");
    CHECK(!r.manifest["config_hash"].get<std::string>().empty());
    CHECK(r.manifest["verdicts"].empty());
    const json& k = r.manifest["result"]["kappa"];
    CHECK(k["kappa"].get<double>() == 2.0);
    CHECK(k["beta_threshold"].get<double>() == 2.0);
    CHECK(k["exact"]["slope"].get<std::string>() == "2");
    CHECK(k["exact"]["intercept"].get<std::string>() == "-4");
    CHECK(r.manifest["result"]["lq"]["kappa_q"].get<double>() == doctest::Approx(6.0));

    auto opt = run_cli("constants --geometry martinet --beta 4 --optimal");
    REQUIRE(opt.code == 0);
    CHECK(opt.manifest["result"]["kappa"]["kappa"].get<double>() >=
          run_cli("constants --geometry martinet --beta 4")
              .manifest["result"]["kappa"]["kappa"]
              .get<double>());
}

TEST_CASE("geometry records print, export, and re-import") {
    auto shown = run_cli("geometry show heisenberg");
    REQUIRE(shown.code == 0);
    const json& rec = shown.manifest["result"];
    CHECK(rec["name"].get<std::string>() == "heisenberg");
    CHECK(rec["N"].get<int>() == 3);
    CHECK(rec["c"].size() == 2);  // antisymmetric pair of bracket entries

    fs::path gfile = tmp_dir() / "heis.json";
    std::ofstream(gfile) << rec.dump();
    auto imported = run_cli("geometry import " + qpath(gfile));
    REQUIRE(imported.code == 0);
    CHECK(imported.manifest["result"] == rec);

    json bad = rec;
    bad["c"][0]["num"] = 9;  // bracket no longer matches the frame
    fs::path bfile = tmp_dir() / "heis_bad.json";
    std::ofstream(bfile) << bad.dump();
    CHECK(run_cli("geometry import " + qpath(bfile)).code == 2);
}

TEST_CASE("simulate manifests replay bit-for-bit through run --config") {
    std::string args =
        "simulate --geometry heisenberg --beta 3 --dt 0.015625 --t 0.5 --paths 128 --seed 9";
    auto first = run_cli(args);
    REQUIRE(first.code == 0);
    CHECK(first.manifest["seed"].get<uint64_t>() == 9);
    CHECK(first.manifest["result"]["t"].get<double>() == 0.5);
    REQUIRE(first.manifest["result"]["coordinates"].size() == 3);
    CHECK(first.manifest["result"]["blown_paths"].get<size_t>() == 0);

    fs::path cfile = tmp_dir() / "replay.json";
    std::ofstream(cfile) << first.manifest["config"].dump();
    auto replay = run_cli("run --config " + qpath(cfile));
    REQUIRE(replay.code == 0);
    CHECK(replay.manifest["result"] == first.manifest["result"]);
    CHECK(replay.manifest["config_hash"] == first.manifest["config_hash"]);

    auto reseeded = run_cli(
        "simulate --geometry heisenberg --beta 3 --dt 0.015625 --t 0.5 --paths 128 --seed 10");
    REQUIRE(reseeded.code == 0);
    CHECK(reseeded.manifest["result"]["coordinates"][0]["mean"].get<double>() !=
          first.manifest["result"]["coordinates"][0]["mean"].get<double>());
}

TEST_CASE("trajectory dumps carry provenance headers and respect the stride") {
    fs::path traj = tmp_dir() / "traj.csv";
    fs::path prefix = tmp_dir() / "simrun";
    auto r = run_cli("simulate --geometry heisenberg --beta 3 --dt 0.015625 --t 0.5 --paths 16"
                     " --seed 9 --dump-stride 4 --save-trajectories " +
                     qpath(traj) + " --out " + qpath(prefix));
    REQUIRE(r.code == 0);

    REQUIRE(fs::exists(traj));
    std::ifstream in(traj);
    std::string header, columns;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(header == "# seed=9 config=" + r.manifest["config_hash"].get<std::string>());
    CHECK(columns == "path_id,step,t,x_1,x_2,x_3");
    // 32 steps at stride 4 leave grid points {0,4,...,32}: 9 rows per path
    CHECK(line_count(traj) == 2 + 16 * 9);

    fs::path mfile(prefix.string() + ".manifest.json");
    REQUIRE(fs::exists(mfile));
    json stored = json::parse(slurp(mfile));
    CHECK(stored["config_hash"] == r.manifest["config_hash"]);

    // oversized dumps are rejected before running
    auto big = run_cli("simulate --geometry heisenberg --beta 3 --dt 0.015625 --t 0.5"
                       " --paths 1000000 --save-trajectories " +
                       qpath(traj));
    CHECK(big.code == 2);
}

TEST_CASE("gradient check: verdicts drive the exit code") {
    auto ok = run_cli("check grad --geometry heisenberg --beta 3 --observable \"tanh(x+y)\""
                      " --t 0.25,0.5 --paths 1500 --dt 0.00390625 --seed 3");
    REQUIRE(ok.code == 0);
    REQUIRE(ok.manifest["verdicts"].size() == 2);
    for (const auto& v : ok.manifest["verdicts"]) CHECK(v.get<std::string>() == "holds");
    CHECK(ok.manifest["result"]["checks"].size() == 2);
    CHECK(ok.manifest["result"]["rate"]["kappa"].get<double>() == 2.0);

    // beta dt = 2.5 puts the explicit scheme outside its stability region, so
    // the discrete gradient grows and the certified decay genuinely fails
    auto bad = run_cli("check grad --geometry abelian:1 --beta 25 --observable x"
                       " --t 2 --paths 8 --dt 0.1 --tangent");
    CHECK(bad.code == 1);
    REQUIRE(bad.manifest["verdicts"].size() == 1);
    CHECK(bad.manifest["verdicts"][0].get<std::string>() == "violated");
}

TEST_CASE("poincare and exponential-moment checks pass on anchor models") {
    auto poin = run_cli("check poincare --geometry abelian:2 --beta 1 --observable x"
                        " --t 1 --paths 800 --dt 0.00390625 --seed 4");
    REQUIRE(poin.code == 0);
    for (const auto& v : poin.manifest["verdicts"]) CHECK(v.get<std::string>() == "holds");

    auto em = run_cli("check expmoment --geometry abelian:1 --beta 1 --observable \"tanh(x)\""
                      " --burn-in 2 --window 2 --thin 0.5 --deltas 0.1,0.2 --paths 48"
                      " --dt 0.00390625 --seed 5");
    REQUIRE(em.code == 0);
    CHECK(em.manifest["result"]["gamma_bound"].get<double>() == 4.0);
    CHECK(em.manifest["result"]["verdict"].get<std::string>() == "holds");
}

TEST_CASE("exploding paths abort with the blowup exit code") {
    auto r = run_cli("simulate --geometry abelian:1 --beta 30 --dt 0.1 --t 200 --paths 4");
    CHECK(r.code == 3);
    CHECK(r.err.find("blowup") != std::string::npos);
}

TEST_CASE("schema violations and bad invocations map to exit 2") {
    CHECK(run_cli("definitely-not-a-command").code == 2);
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("run --config " + qpath(tmp_dir() / "missing.json")).code == 2);
    CHECK(run_cli("constants --geometry nope").code == 2);
    CHECK(run_cli("constants --geometry heisenberg --beta -1").code == 2);
    CHECK(run_cli("check lq --geometry heisenberg --beta 3 --observable x --t 1").code == 2);

    fs::path junk = tmp_dir() / "junk.json";
    std::ofstream(junk) << R"({"experiment":"constants","geometry":"heisenberg","zzz":1})";
    auto r = run_cli("run --config " + qpath(junk));
    CHECK(r.code == 2);
    CHECK(r.err.find("zzz") != std::string::npos);

    fs::path noexp = tmp_dir() / "noexp.json";
    std::ofstream(noexp) << R"({"geometry":"heisenberg"})";
    CHECK(run_cli("run --config " + qpath(noexp)).code == 2);
}

TEST_CASE("lattice constants and decay experiments run end to end") {
    auto lc = run_cli("lattice constants --d 1 --box 2 --beta 3 --amplitude 0.1");
    REQUIRE(lc.code == 0);
    CHECK(lc.manifest["result"]["kappa_bar"].get<double>() == doctest::Approx(0.8));
    CHECK(lc.manifest["result"]["varsigma"].get<double>() == doctest::Approx(0.7));
    CHECK(lc.manifest["result"]["site"]["C3"].get<double>() == 4.0);

    fs::path prefix = tmp_dir() / "erg";
    auto erg = run_cli("lattice ergodicity --d 1 --box 1 --site-geometry abelian:1 --beta 1"
                       " --amplitude 0 --t 0.5,1.0 --perturb 2 --paths 16 --dt 0.0078125"
                       " --seed 5 --out " +
                       qpath(prefix));
    REQUIRE(erg.code == 0);
    CHECK(erg.manifest["result"]["rate"].get<double>() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(erg.manifest["result"]["rate_positive_95"].get<bool>());

    fs::path decay(prefix.string() + ".decay.csv");
    REQUIRE(fs::exists(decay));
    std::ifstream in(decay);
    std::string header, columns;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(header.rfind("# seed=5 config=", 0) == 0);
    CHECK(columns == "t,diff,std_err,n_paths");
    CHECK(line_count(decay) == 4);
}

TEST_CASE("invariant sampling writes one row per retained state") {
    fs::path prefix = tmp_dir() / "inv";
    auto r = run_cli("invariant --geometry abelian:2 --beta 1 --burn-in 2 --window 2 --thin 0.5"
                     " --paths 64 --dt 0.00390625 --seed 6 --out " +
                     qpath(prefix));
    REQUIRE(r.code == 0);
    size_t n_states = r.manifest["result"]["n_states"].get<size_t>();
    CHECK(n_states >= 64);
    REQUIRE(r.manifest["result"]["mean"].size() == 2);
    for (const auto& m : r.manifest["result"]["mean"])
        CHECK(std::abs(m.get<double>()) < 0.2);

    fs::path states(prefix.string() + ".states.csv");
    REQUIRE(fs::exists(states));
    CHECK(line_count(states) == 2 + n_states);
}

int main(int argc, char** argv) {
    std::vector<char*> pass;
    pass.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (argv[i][0] == '-')
            pass.push_back(argv[i]);
        else
            g_cli = argv[i];
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: %s <path-to-cli> [doctest options]\n", argv[0]);
        return 4;
    }
    doctest::Context ctx(static_cast<int>(pass.size()), pass.data());
    return ctx.run();
}
