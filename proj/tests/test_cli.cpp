#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "ppcreg/losses.hpp"
#include "ppcreg/phantom.hpp"
#include "ppcreg/simlab.hpp"
#include "ppcreg/volume.hpp"

using namespace ppcreg;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout only
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(PPCREG_BIN) + " " + args + " 2>/dev/null";
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        result.output.append(buf.data(), got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "ppcreg_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string json_field(const std::string& output, const std::string& key) {
    const auto j = nlohmann::json::parse(output.substr(output.find('{')));
    return j.at(key).is_string() ? j.at(key).get<std::string>() : j.at(key).dump();
}

} // namespace

TEST_CASE("cli phantom: preset generates the committed checksum") {
    const fs::path out = work_dir() / "vertebra.raw";
    const RunResult r = run_cli("phantom --preset vertebra-stack --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(json_field(r.output, "checksum") == "a76aa8c0961d38d1");
    const Volume vol = load_volume(out);
    CHECK(vol.dims() == std::array<int, 3>{128, 128, 128});
}

TEST_CASE("cli phantom: malformed spec exits with the usage code") {
    const fs::path bad = work_dir() / "bad_spec.json";
    std::ofstream(bad) << "{ not json";
    const RunResult r =
        run_cli("phantom --spec " + bad.string() + " --out " + (work_dir() / "x.raw").string());
    CHECK(r.exit_code == 2);

    const RunResult unknown =
        run_cli("phantom --preset nope --out " + (work_dir() / "x.raw").string());
    CHECK(unknown.exit_code == 2);
}

TEST_CASE("cli render: determinism, view asymmetry and black bone images") {
    const fs::path vol = work_dir() / "vertebra.raw";
    if (!fs::exists(vol))
        REQUIRE(run_cli("phantom --preset vertebra-stack --out " + vol.string()).exit_code == 0);

    const std::string geom = " --det-width 64 --det-height 64 --det-spacing 6.5";
    const RunResult a = run_cli("render --volume " + vol.string() + geom + " --out " +
                                (work_dir() / "ap1").string());
    const RunResult b = run_cli("render --volume " + vol.string() + geom + " --out " +
                                (work_dir() / "ap2").string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(work_dir() / "ap1.raw") == slurp(work_dir() / "ap2.raw"));
    CHECK(json_field(a.output, "checksum") == json_field(b.output, "checksum"));

    const RunResult lat = run_cli("render --volume " + vol.string() + geom +
                                  " --view LAT --out " + (work_dir() / "lat").string());
    REQUIRE(lat.exit_code == 0);
    CHECK(json_field(lat.output, "checksum") != json_field(a.output, "checksum"));

    const RunResult black =
        run_cli("render --volume " + vol.string() + geom + " --bone-threshold 99 --out " +
                (work_dir() / "black").string());
    REQUIRE(black.exit_code == 0);
    const Image2D img = load_image(work_dir() / "black.raw");
    for (float v : img.data) REQUIRE(v == 0.0f);
}

TEST_CASE("cli gen-dataset: usage errors and seeded determinism") {
    const fs::path vol = work_dir() / "toy.raw";
    {
        PhantomSpec spec;
        spec.dims = {24, 24, 24};
        spec.origin = {-12, -12, -12};
        Primitive ball;
        ball.kind = Primitive::Kind::sphere;
        ball.center = {1, -2, 0};
        ball.radius = 6;
        ball.attenuation = 0.03;
        spec.primitives.push_back(ball);
        Primitive box;
        box.kind = Primitive::Kind::box;
        box.center = {-4, 5, 3};
        box.size = {8, 6, 7};
        box.attenuation = 0.025;
        spec.primitives.push_back(box);
        save_volume(make_phantom(spec), vol);
    }

    CHECK(run_cli("gen-dataset --volume toy=" + vol.string() + " --n 0 --out " +
                  (work_dir() / "ds0").string())
              .exit_code == 2);

    const std::string common = "gen-dataset --volume toy=" + vol.string() +
                               " --n 3 --seed 11 --mtre-range 0 10 --views AP,LAT";
    const fs::path ds1 = work_dir() / "ds1";
    const fs::path ds2 = work_dir() / "ds2";
    fs::remove_all(ds1);
    fs::remove_all(ds2);
    REQUIRE(run_cli(common + " --out " + ds1.string()).exit_code == 0);
    REQUIRE(run_cli(common + " --out " + ds2.string()).exit_code == 0);
    CHECK(slurp(ds1 / "manifest.json") == slurp(ds2 / "manifest.json"));
}

TEST_CASE("cli register: fixed point converges and missing files exit 2") {
    const fs::path vol = work_dir() / "toy.raw"; // written by the gen-dataset case
    if (!fs::exists(vol)) return;                // subcase ordering guard

    const std::string geom = " --det-width 64 --det-height 64 --det-spacing 3.0";
    const fs::path fixed = work_dir() / "fixed";
    REQUIRE(run_cli("render --volume " + vol.string() + geom + " --out " + fixed.string())
                .exit_code == 0);

    const fs::path result = work_dir() / "reg_result.json";
    const RunResult r = run_cli("register --volume " + vol.string() + " --fixed " +
                                fixed.string() + ".raw" + geom +
                                " --canny-sigma 1.0 --canny-low 0.002 --canny-high 0.004" +
                                " --out " + result.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(slurp(result));
    CHECK(j.at("converged").get<bool>());
    CHECK(j.at("iterations").size() <= 2);
    CHECK(j.at("config").at("max_iterations").get<int>() == 10); // published default budget

    CHECK(run_cli("register --volume /nonexistent.raw --fixed " + fixed.string() + ".raw")
              .exit_code == 2);
}

TEST_CASE("cli evaluate: perfect results give SR 1.0 and empty dirs exit 2") {
    const fs::path ds = work_dir() / "ds1"; // written by the gen-dataset case
    if (!fs::exists(ds / "manifest.json")) return;

    const DatasetManifest manifest = DatasetManifest::load(ds / "manifest.json");
    const fs::path results = work_dir() / "perfect_results";
    fs::create_directories(results);
    for (const auto& s : manifest.samples) {
        const RigidTransform perfect = compose(s.t_hat, s.t_j);
        nlohmann::ordered_json j;
        j["final_transform"] = transform_to_json(perfect);
        j["converged"] = true;
        j["runtime_ms"] = 1.0;
        j["iterations"] = nlohmann::ordered_json::array();
        std::ofstream(results / (s.id + ".json")) << j.dump(2);
    }

    const fs::path report = work_dir() / "report";
    const RunResult r = run_cli("evaluate --manifest " + (ds / "manifest.json").string() +
                                " --results " + results.string() + " --out " + report.string());
    REQUIRE(r.exit_code == 0);
    const auto summary = nlohmann::json::parse(slurp(report / "summary.json"));
    CHECK(summary.at("success_ratio").get<double>() == 1.0);
    CHECK(fs::exists(report / "records.csv"));
    CHECK(fs::exists(report / "ecdf.csv"));

    const fs::path empty = work_dir() / "empty_results";
    fs::create_directories(empty);
    CHECK(run_cli("evaluate --manifest " + (ds / "manifest.json").string() + " --results " +
                  empty.string() + " --out " + report.string())
              .exit_code == 2);
}

TEST_CASE("cli loss-selftest prints kernels matching the library") {
    const fs::path fixtures = fs::path(PPCREG_FIXTURES_DIR) / "loss_fixtures.json";
    const RunResult r = run_cli("loss-selftest --fixtures " + fixtures.string());
    REQUIRE(r.exit_code == 0);

    std::map<std::string, double> values;
    std::istringstream ss(r.output);
    std::string line;
    while (std::getline(ss, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        values[line.substr(0, eq)] = std::stod(line.substr(eq + 3));
    }
    REQUIRE(values.count("registration_loss") == 1);
    REQUIRE(values.count("barlow_twins_loss") == 1);

    // Hand-checked values for the committed fixtures.
    CHECK(values.at("motion_reg_loss") == doctest::Approx(6.5014).epsilon(1e-12));
    CHECK(values.at("flow_loss") == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(values.at("dirn_loss") ==
          doctest::Approx(values.at("registration_loss") + 0.5 * values.at("flow_loss") +
                          1e-3 * values.at("motion_reg_loss"))
              .epsilon(1e-9));
    CHECK(values.at("total_loss") ==
          doctest::Approx(values.at("dirn_loss") + 0.2 * values.at("adversarial_feature_loss") +
                          0.05 * values.at("barlow_twins_loss"))
              .epsilon(1e-9));

    // Cross-check two kernels against direct library evaluation.
    const auto fx = nlohmann::json::parse(slurp(fixtures));
    std::vector<double> sim = fx.at("adversarial").at("sim").get<std::vector<double>>();
    std::vector<double> real = fx.at("adversarial").at("real").get<std::vector<double>>();
    const double afe = adversarial_feature_loss(
        DiscriminatorOutput(sim, DiscriminatorOutput::Domain::sim),
        DiscriminatorOutput(real, DiscriminatorOutput::Domain::real));
    CHECK(values.at("adversarial_feature_loss") == doctest::Approx(afe).epsilon(1e-9));
}
