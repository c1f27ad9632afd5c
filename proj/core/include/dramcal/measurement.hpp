#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dramcal {

struct PowerSample {
    double t = 0;  // s
    double p = 0;  // W
};

struct MeasurementSeries {
    std::string channel;  // e.g. "AB"
    std::vector<PowerSample> samples;  // strictly increasing t, p >= 0
    unsigned dimms_per_channel = 1;
};

struct TimeWindow {
    double t0 = 0;
    double t1 = 0;
    double length() const { return t1 - t0; }
};

// Throws ValidationError on unsorted timestamps or negative power.
void validate(const MeasurementSeries& series);

// Trapezoidal rule over the samples in [t0, t1]; the endpoints are linearly
// interpolated between neighbouring samples.
double integrate(const MeasurementSeries& series, TimeWindow window);

struct StaticBaseline {
    double power_w = 0;            // mean channel power over the idle window
    double current_per_dimm_a = 0;  // power / (vdd * dimms_per_channel)
    double stddev_w = 0;           // sample noise estimate
    std::size_t samples = 0;
};

StaticBaseline static_baseline(const MeasurementSeries& series, TimeWindow idle_window, double vdd);

struct RunEnergy {
    std::string benchmark;
    double gross_energy = 0;   // J
    double static_energy = 0;  // J
    double net_energy = 0;     // J, gross - static
    double duration = 0;       // s
    std::size_t n_runs = 0;
    double stddev = 0;  // J, sample stddev of per-run net energy
};

// Per-run net = integral - baseline * window length; returns the means across
// runs and the sample standard deviation of the net energy.
RunEnergy run_energy(std::string benchmark, const std::vector<std::pair<MeasurementSeries, TimeWindow>>& runs,
                     double baseline_w);

struct AggregateRow {
    std::string benchmark;
    unsigned threads = 0;
    std::string channel;
    double mean_power_w = 0;
    std::size_t files = 0;
};

// Groups `<bench>_<threads>_<channel>_<run>.csv` files by (bench, threads,
// channel) and averages their time-weighted mean power.
std::vector<AggregateRow> aggregate_runs(const std::filesystem::path& dir);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// `timestamp_s,power_w` with header. With `sort`, out-of-order samples are
// sorted instead of rejected.
MeasurementSeries parse_series_csv(std::string_view text, const std::string& source_name = "<string>", bool sort = false);
MeasurementSeries load_series(const std::filesystem::path& path, bool sort = false);
std::string series_csv(const MeasurementSeries& series);

// Header and rows are newline-terminated lines.
std::string energies_csv_header();
std::string energies_csv_row(const RunEnergy& e);
std::vector<RunEnergy> parse_energies_csv(std::string_view text, const std::string& source_name = "<string>");

}  // namespace dramcal
