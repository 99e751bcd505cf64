#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cdslab/distill.hpp"
#include "cdslab/mixture.hpp"
#include "cdslab/scene.hpp"

namespace cdslab {

/// Parsed key-value document. Sections are nested objects of `root`;
/// `lines` maps "key", "section.key" and "[section]" to 1-based line numbers.
struct TomlDocument {
    nlohmann::json root = nlohmann::json::object();
    std::map<std::string, int> lines;
    std::vector<std::string> sections; // in file order

    bool has_section(const std::string& name) const;
    int line_of(const std::string& path) const; // 0 when unknown
};

/// Subset of TOML: [section] headers, bare keys, strings, integers, floats,
/// booleans, arrays (may span lines) and inline tables. Throws ConfigError
/// listing every syntax problem with its line.
TomlDocument parse_toml(std::string_view text);

struct SampleSection {
    std::string mode = "ode";         // "ode" | "sde"
    int runs = 16;
    int steps = 64;
    std::string denoiser = "oracle";  // "oracle" or a path to a trained network
    std::optional<int> label;
    std::optional<double> cfg_w;
    int trajectory_runs = 4;          // runs written to the trajectory JSONL
};

struct TrainSection {
    std::vector<int> hidden{64, 64};
    int steps = 2000;
    int batch = 64;
    double lr = 1e-3;
    std::string output = "denoiser.json";
};

struct HarnessSection {
    int equivalence_steps = 64;
    int equivalence_seeds = 5;
    std::vector<double> scan_deltas{0.05, 0.1, 0.2, 0.4};
    int scan_seeds = 5;
    int variance_samples = 256;
    std::optional<int> variance_iter; // default: N / 2
    int ablation_seeds = 5;
};

struct OutputSection {
    bool trajectories = true;
    bool run_log = true;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    double horizon = 10.0;
    DistillRunConfig distill; // schedule, cfg and seed are filled from the top-level sections
    std::optional<GaussianMixture> data;
    std::optional<TaskSpec> scene;
    SampleSection sample;
    TrainSection train;
    HarnessSection harness;
    OutputSection output;
    std::vector<std::string> sections; // sections present in the file, in file order
    std::uint64_t source_hash = 0;     // FNV-1a of the raw file bytes

    bool has_section(std::string_view name) const;
    /// Throws ConfigError naming every missing section.
    void require_sections(std::string_view subcommand, const std::vector<std::string>& names) const;
};

/// Validates the document; unknown keys and sections are errors.
RunConfig config_from_document(const TomlDocument& doc);

RunConfig parse_config_text(std::string_view text);

/// Reads and parses a file. IoError when unreadable.
RunConfig parse_config(const std::filesystem::path& path);

} // namespace cdslab
