#pragma once

#include "diffeolab/bank.hpp"
#include "diffeolab/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace diffeolab {

struct OperatorEntry {
    OperatorSpec op;
    /// Missing means: pointwise kinds and sup are expected consistent,
    /// everything else falsified.
    std::optional<Verdict> expected;
    /// Which field bank the suite uses; defaults to scalar when accepted.
    std::optional<FieldKind> field_kind;

    Verdict expected_verdict() const;
    FieldKind suite_kind() const;
};

struct DecaySettings {
    std::vector<int> dims{1, 2};
    std::vector<double> p_values{1.0, 2.0};
    std::vector<int> n_values{2, 4, 8};
    int resolution = 512;
    /// Contraction ball radius and collar on the unit torus.
    double scale = 0.3;
    double eps = 0.5;
    /// Vector bump centred in the torus; direction (1, 0.5, 0.25) truncated to d.
    double bump_radius = 0.25;
    double slack = 1.05;
};

struct VitaliSettings {
    /// Label of a scalar field in the config's field bank.
    std::string field = "bump";
    BallRegion region{make_vec({0.5, 0.5}), 0.18};
    int resolution = 512;
    double eps_fraction = 0.05;
    int max_balls = 4000;
    double p = 2.0;
};

struct NormBoundSettings {
    int trials = 64;
    double p = 2.0;
    double slack = 1.01;
};

struct OutputPaths {
    std::string reports = "reports.jsonl";
    std::string summary = "summary.csv";
    std::string verdicts = "verdicts.txt";
    std::string decay = "decay.csv";
    std::string norm_bound = "norm_bound.csv";
    std::string vitali = "vitali.csv";
    std::string vitali_summary = "vitali_summary.csv";
    std::string zoo = "zoo.csv";
    std::string suite = "suite.csv";
    std::string scoreboard = "scoreboard.txt";
};

struct ExperimentConfig {
    /// Base chart; its resolution is the one used by single-level runs.
    ChartDomain chart = standard_chart(256);
    /// Per-axis resolutions of the refinement ladder, coarse to fine.
    std::vector<int> levels{128, 256, 512};
    std::vector<double> p_values{2.0};
    std::uint64_t seed = kDefaultSeed;
    std::vector<DiffeoSpec> diffeos = standard_diffeo_specs();
    std::vector<FieldSpec> fields;
    std::vector<OperatorEntry> operators;
    int budget = 1000;
    double baseline_factor = 10.0;
    double noise_floor = 1e-12;
    DecaySettings decay;
    VitaliSettings vitali;
    NormBoundSettings norm_bound;
    OutputPaths outputs;

    ExperimentConfig();
};

/// Throws Error(Config) for anything malformed, including unknown keys.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
    std::filesystem::path out_dir = "out";
    bool verbose = false;
    /// Scoreboards and verdict tables; progress goes to `log` when verbose.
    std::ostream* console = nullptr;
    std::ostream* log = nullptr;
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitUnderResolution = 3 };

int run_defect(const ExperimentConfig& c, const RunOptions& o);
int run_decay(const ExperimentConfig& c, const RunOptions& o);
int run_norm_bound(const ExperimentConfig& c, const RunOptions& o);
int run_vitali(const ExperimentConfig& c, const RunOptions& o);
int run_zoo(const ExperimentConfig& c, const RunOptions& o);
int run_suite(const ExperimentConfig& c, const RunOptions& o);

/// Loads the config (or the defaults when `config_path` is empty), runs the
/// subcommand and maps errors to exit codes. Never throws.
int run_command(const std::string& command, const std::filesystem::path& config_path, const RunOptions& o);

struct ScoreRow {
    std::string key;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;
};

/// The nine suite rows, in scoreboard order.
std::vector<ScoreRow> suite_rows(const ExperimentConfig& c, std::ostream* log = nullptr);
std::string format_scoreboard(const std::vector<ScoreRow>& rows);

}  // namespace diffeolab
