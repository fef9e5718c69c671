#pragma once

#include "medsim/data_model.hpp"
#include "medsim/error.hpp"
#include "medsim/estimate.hpp"
#include "medsim/flows/train.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace medsim::pipeline {

inline constexpr int kConfigVersion = 1;

enum class Engine { parametric, flow };
std::string to_string(Engine e);

struct FlowSettings {
    flows::FlowArchitecture architecture;
    flows::TrainConfig training;
    double dequantization_sigma = 0.1;
};

struct RunConfig {
    explicit RunConfig(data::CausalSchema s) : schema(std::move(s)), specs(default_specs(schema)) {}

    std::filesystem::path data;
    data::CausalSchema schema;
    Engine engine = Engine::parametric;
    std::vector<Mode> modes{Mode::natural_pse, Mode::interventional};
    ParametricSpecs specs;
    FlowSettings flow;
    std::size_t J = 2000;
    std::size_t B = 2000;
    std::size_t b = 100000;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: all hardware threads
    bool sd_units = false;
    std::filesystem::path output_dir = "medsim-output";
    std::vector<std::string> warnings;  // non-fatal config problems

    std::string mode_name() const;
    bool has_mode(Mode m) const;
};

struct Problem {
    enum class Severity { error, warning } severity = Severity::error;
    std::string where;  // JSON path, e.g. "models.Y.terms"
    std::string message;

    std::string to_string() const;
};

struct ParsedConfig {
    std::optional<RunConfig> config;  // set when there are no errors
    std::vector<Problem> problems;
};

// Parses and checks a config document, collecting every problem. Relative
// paths resolve against base_dir.
ParsedConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// Reads, parses and checks a config file, then loads its data; problems of
// all three stages are listed together.
std::vector<Problem> validate_file(const std::filesystem::path& path);

// Loads a config file; throws ConfigError listing every error.
RunConfig load_config(const std::filesystem::path& path);

// Full resolved config as JSON. Running it reproduces the run exactly.
nlohmann::ordered_json echo(const RunConfig& cfg);

struct RunResult {
    EffectReport report;
    std::map<std::string, std::string> models;       // file name under models/ -> JSON text
    std::map<std::string, std::string> diagnostics;  // file name under diagnostics/ -> CSV text
    nlohmann::ordered_json run_report;
    std::vector<std::string> warnings;
};

// Point estimates of one pipeline pass on a dataset, using only the given stream.
// Streams: simulation per mode from stream.derive(tags::simulate, mode),
// row subsample from stream.derive(tags::subsample, 0), flow seeds from
// stream.bits(tags::train, 0).
EffectReport estimate_once(const RunConfig& cfg, const data::CausalDataset& ds, const RandomStream& stream);

// Loads the data, estimates with RandomStream(seed), bootstraps B replicates
// and assembles reports. Throws the underlying module errors.
RunResult run(const RunConfig& cfg);

// Writes effects.json, effects.txt, run_report.json, models/ and diagnostics/.
// Files already written are removed again if any write fails.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

// Process exit code of an error category.
int exit_code(ErrorKind kind);

}  // namespace medsim::pipeline
