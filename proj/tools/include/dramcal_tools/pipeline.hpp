#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dramcal/calibrate.hpp"
#include "dramcal/device_spec.hpp"

namespace dramcal::tools {

namespace fs = std::filesystem;

struct SyntheticConfig {
    double planted_lo = 0.5;  // planted current = U(lo, hi) x datasheet
    double planted_hi = 0.7;
    double intercept_fraction = 0.005;  // of the smallest true training energy
    double run_noise = 0.01;
    double sample_noise_w = 0.02;
    double baseline_w = 0.3984;
    std::size_t runs = 3;
    std::size_t samples_per_window = 1000;
};

struct PipelineConfig {
    fs::path device;
    fs::path mapping;
    std::vector<std::string> kernels;
    std::uint64_t elements = 1'000'000;
    std::uint64_t stride = 64;
    fs::path output_dir = "out";
    // When set, `energies.csv` (and optionally `holdout/energies.csv`) are
    // read from here instead of being synthesized.
    std::optional<fs::path> measurement_dir;
    bool rfo = false;
    bool weighted = false;
    bool no_intercept = false;
    bool gross = false;
    bool strict_timing = true;
    bool holdout = true;
    bool write_streams = true;
    std::uint64_t seed = 1;
    SyntheticConfig synthetic;
    unsigned workers = 0;  // 0 = hardware concurrency
};

// Relative paths in the file resolve against the file's directory, except
// output_dir, which resolves against the working directory. DRAM_CALIB_SEED
// overrides "seed".
PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir,
                                     const std::string& source_name = "<string>");
PipelineConfig load_pipeline_config(const fs::path& path);
void apply_seed_override(PipelineConfig& config);

struct PipelineSummary {
    CalibrationResult calibration;
    std::vector<ValidationRow> training;
    std::vector<ValidationRow> holdout;
    std::optional<CalibratedCurrents> truth;
    double train_pre_error_pct = 0;
    double train_post_error_pct = 0;
    double holdout_pre_error_pct = 0;
    double holdout_post_error_pct = 0;
};

PipelineSummary run_pipeline(const PipelineConfig& config, std::ostream& log);

// Writes fig_breakdown.csv, fig_calibration.csv, fig_validation.csv and
// fig_static.csv into `dir` from a finished pipeline run.
void emit_plots(const fs::path& dir);

}  // namespace dramcal::tools
