#include "doctest.h"

#include "helpers.hpp"

#include "medsim/error.hpp"
#include "medsim/pipeline.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace medsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kExample = fs::path(MEDSIM_SOURCE_DIR) / "data" / "example";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("medsim-cli-" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json example_config() {
    auto j = json::parse(slurp(kExample / "config.json"));
    j["data"] = (kExample / "synthetic.csv").string();
    j["J"] = 20;
    j["B"] = 0;
    return j;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / ("medsim-cli-" + std::to_string(::getpid()) + ".log");
    const std::string cmd = std::string("\"") + MEDSIM_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

}  // namespace

TEST_CASE("the CLI matches direct library calls") {
    const auto dir = scratch("golden");
    const auto cfg_path = write_config(dir, example_config());
    const auto r = cli("run \"" + cfg_path.string() + "\" --output-dir \"" + (dir / "out").string() + "\"");
    INFO(r.out);
    REQUIRE(r.code == 0);

    const auto schema = pipeline::load_config(cfg_path).schema;
    const auto ds = data::load_csv(kExample / "synthetic.csv", schema);
    const auto specs = testing::linear_specs();
    const RandomStream root(20240601);
    const RowPlan plan{{}, 20};
    const auto nat = estimate_natural_pse(fit_parametric(ds, Mode::natural_pse, specs), ds, 1, 0, plan,
                                          root.derive(tags::simulate, 0));
    const auto inter = estimate_interventional(fit_parametric(ds, Mode::interventional, specs), ds, 1, 0, plan,
                                               root.derive(tags::simulate, 1));
    auto expect = merge_reports(nat, inter);
    expect.engine = "parametric";
    expect.seed = 20240601;
    CHECK(slurp(dir / "out" / "effects.json") == to_json(expect).dump(2) + "\n");

    const auto report = json::parse(slurp(dir / "out" / "effects.json"));
    CHECK(report["effects"].size() == 9);
    CHECK_FALSE(report.contains("bootstrap"));
    for (const auto& [k, v] : report["effects"].items()) {
        CHECK_FALSE(v.contains("lower"));
        CHECK_FALSE(v.contains("upper"));
    }
    for (const char* f : {"effects.txt", "run_report.json", "models/L.json", "models/X.json", "models/X_interventional.json",
                          "models/Y.json", "diagnostics/coefficients.csv"}) {
        CHECK(fs::exists(dir / "out" / f));
    }
    CHECK(slurp(dir / "out" / "effects.txt") == format_table(expect));
}

TEST_CASE("reruns are byte-identical at any thread count, including from the config echo") {
    const auto dir = scratch("rerun");
    const auto cfg_path = write_config(dir, example_config());
    REQUIRE(cli("run \"" + cfg_path.string() + "\" --output-dir \"" + (dir / "a").string() + "\"").code == 0);
    REQUIRE(cli("run \"" + cfg_path.string() + "\" --threads 1 --output-dir \"" + (dir / "b").string() + "\"").code == 0);
    REQUIRE(cli("run \"" + cfg_path.string() + "\" --threads 3 --output-dir \"" + (dir / "c").string() + "\"").code == 0);
    const auto a = slurp(dir / "a" / "effects.json");
    CHECK(a == slurp(dir / "b" / "effects.json"));
    CHECK(a == slurp(dir / "c" / "effects.json"));

    const auto echo = json::parse(slurp(dir / "a" / "run_report.json"))["config"];
    const fs::path echo_dir = dir / "echo";
    fs::create_directories(echo_dir);
    const auto echo_path = write_config(echo_dir, echo);
    REQUIRE(cli("run \"" + echo_path.string() + "\" --output-dir \"" + (dir / "d").string() + "\"").code == 0);
    CHECK(a == slurp(dir / "d" / "effects.json"));

    const auto other = cli("run \"" + cfg_path.string() + "\" --seed 5 --output-dir \"" + (dir / "e").string() + "\"");
    REQUIRE(other.code == 0);
    CHECK(a != slurp(dir / "e" / "effects.json"));
}

TEST_CASE("bootstrap intervals appear when B > 0") {
    auto j = example_config();
    j["B"] = 6;
    j["mode"] = "interventional";
    j["sd_units"] = true;
    const auto dir = scratch("boot");
    const auto r = cli("run \"" + write_config(dir, j).string() + "\" --output-dir \"" + (dir / "out").string() + "\"");
    INFO(r.out);
    REQUIRE(r.code == 0);
    const auto report = json::parse(slurp(dir / "out" / "effects.json"));
    CHECK(report["effects"].size() == 3);
    CHECK(report["scale"] == "sd-units");
    for (const auto& [k, v] : report["effects"].items()) {
        CHECK(v["lower"].get<double>() <= v["estimate"].get<double>());
        CHECK(v["upper"].get<double>() >= v["estimate"].get<double>());
    }
    CHECK(report["bootstrap"]["replicates"] == 6);
    const auto csv = slurp(dir / "out" / "diagnostics" / "bootstrap_replicates.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK_FALSE(fs::exists(dir / "out" / "models" / "X.json"));
}

TEST_CASE("validate lists every problem without running") {
    const auto dir = scratch("validate");
    auto good = example_config();
    auto r = cli("validate \"" + write_config(dir, good).string() + "\"");
    CHECK(r.code == 0);
    CHECK(r.out == "no problems found\n");
    CHECK(pipeline::validate_file(dir / "config.json").empty());
    CHECK_FALSE(fs::exists(dir / "output"));

    auto flow = good;
    flow["engine"] = "flow";
    r = cli("validate \"" + write_config(dir, flow).string() + "\"");
    CHECK(r.code == 0);
    CHECK(r.out.find("warning [models]") != std::string::npos);
    CHECK(r.out.find("ignored") != std::string::npos);

    auto degenerate = good;
    degenerate["schema"]["d_star"] = 1;
    r = cli("validate \"" + write_config(dir, degenerate).string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.out.find("degenerate") != std::string::npos);

    auto many = good;
    many["J"] = 0;
    many["B"] = 1;
    many["models"]["Y"]["family"] = "poisson-log";
    many["models"]["X_interventional"]["terms"] = {"v", "l"};
    many["mode"] = "sideways";
    const auto problems = pipeline::validate_file(write_config(dir, many));
    int errors = 0;
    for (const auto& p : problems) errors += p.severity == pipeline::Problem::Severity::error;
    CHECK(errors == 5);

    auto missing = good;
    missing["data"] = (dir / "nope.csv").string();
    r = cli("validate \"" + write_config(dir, missing).string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.out.find("error [data]") != std::string::npos);

    r = cli("validate \"" + (dir / "absent.json").string() + "\"");
    CHECK(r.code == 2);
}

TEST_CASE("exit codes follow the error category and failed runs leave no outputs") {
    const auto dir = scratch("codes");

    auto bad = example_config();
    bad["J"] = 0;
    auto r = cli("run \"" + write_config(dir, bad).string() + "\" --output-dir \"" + (dir / "o2").string() + "\"");
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(dir / "o2"));

    auto missing = example_config();
    missing["data"] = (dir / "nope.csv").string();
    r = cli("run \"" + write_config(dir, missing).string() + "\" --output-dir \"" + (dir / "o3").string() + "\"");
    CHECK(r.code == 3);
    CHECK_FALSE(fs::exists(dir / "o3"));

    // A binary outcome equal to the treatment is perfectly separated.
    {
        std::ofstream csv(dir / "separated.csv");
        csv << "v,d,l,x,y\n";
        for (int i = 0; i < 40; ++i) csv << 0.1 * (i % 7) << ',' << i % 2 << ',' << 0.3 * (i % 5) << ',' << 0.2 * (i % 3) << ',' << i % 2 << '\n';
    }
    auto sep = example_config();
    sep["data"] = (dir / "separated.csv").string();
    sep["schema"]["outcome"]["kind"] = "binary";
    sep["models"]["Y"] = {{"family", "bernoulli-logit"}, {"terms", {"d"}}};
    r = cli("run \"" + write_config(dir, sep).string() + "\" --output-dir \"" + (dir / "o4").string() + "\"");
    INFO(r.out);
    CHECK(r.code == 4);
    CHECK(r.out.find("'y'") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o4"));

    auto diverge = example_config();
    diverge["engine"] = "flow";
    diverge.erase("models");
    diverge["flow"] = {{"embedding_hidden", {4}}, {"embedding_dim", 2}, {"integrand_hidden", {4}},
                       {"learning_rate", 1e300}, {"max_epochs", 2}, {"restarts", 1}};
    r = cli("run \"" + write_config(dir, diverge).string() + "\" --output-dir \"" + (dir / "o5").string() + "\"");
    CHECK(r.code == 5);
    CHECK(r.out.find("mini-batch") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o5"));

    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("--help").code == 0);
}

TEST_CASE("flow engine pipeline writes models and diagnostics") {
    auto j = example_config();
    j["engine"] = "flow";
    j.erase("models");
    j["b"] = 300;
    j["flow"] = {{"embedding_hidden", {8, 8}}, {"embedding_dim", 3}, {"integrand_hidden", {8, 8}},
                 {"max_epochs", 3}, {"restarts", 2}, {"quadrature_nodes", 16}};
    const auto dir = scratch("flow");
    const auto cfg = pipeline::parse_config(j, dir);
    std::string listed;
    for (const auto& p : cfg.problems) listed += p.to_string() + "\n";
    INFO(listed);
    REQUIRE(cfg.config);
    const auto result = pipeline::run(*cfg.config);
    CHECK(result.report.effects.size() == 9);
    CHECK(result.report.J == 1);
    CHECK(result.report.b == 300);
    for (const char* m : {"L.json", "X.json", "X_interventional.json", "Y.json"}) CHECK(result.models.count(m) == 1);
    CHECK(result.diagnostics.count("training_curve.csv") == 1);
    CHECK(result.diagnostics.count("transform_Y.csv") == 1);
    CHECK(std::find_if(result.warnings.begin(), result.warnings.end(), [](const std::string& w) {
              return w.find("recommended") != std::string::npos;
          }) != result.warnings.end());
    const auto& e = result.report.effects;
    CHECK(std::abs(e.at(Estimand::OE).estimate - e.at(Estimand::IDE).estimate - e.at(Estimand::IIE).estimate) <= 1e-12);

    const auto again = pipeline::run(*cfg.config);
    CHECK(to_json(again.report).dump() == to_json(result.report).dump());
    const auto reloaded = flows::flow_from_json(json::parse(result.models.at("Y.json")));
    CHECK(reloaded.parents == std::vector<std::string>{"v", "d", "l", "x"});
}
