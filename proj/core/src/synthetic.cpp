#include "dramcal/synthetic.hpp"

#include <cmath>

#include "dramcal/error.hpp"
#include "dramcal/power_model.hpp"

namespace dramcal::synth {

Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    return Rng(seq);
}

CalibratedCurrents plant_currents(const DeviceSpec& device, double lo_fraction, double hi_fraction, double intercept_j,
                                  Rng& rng) {
    if (!(lo_fraction > 0 && lo_fraction <= hi_fraction))
        throw ValidationError("synthetic", "planted fraction range must satisfy 0 < lo <= hi");
    std::uniform_real_distribution<double> frac(lo_fraction, hi_fraction);
    auto c = datasheet_currents(device);
    for (auto k : kAllCurrents) c[k] *= frac(rng);
    c.intercept_b = intercept_j;
    return c;
}

CalibratedCurrents scale_currents(const DeviceSpec& device, double fraction, double intercept_j) {
    auto c = datasheet_currents(device);
    for (auto k : kAllCurrents) c[k] *= fraction;
    c.intercept_b = intercept_j;
    return c;
}

double true_net_energy(const CommandStats& stats, const DeviceSpec& device, const CalibratedCurrents& truth) {
    return coefficients(stats, device).predict(truth);
}

SyntheticRun synthesize_run(double duration_s, double net_j, const RunPlan& plan, Rng& rng) {
    if (!(duration_s > 0)) throw ValidationError("synthetic", "run duration must be positive");
    if (plan.samples_per_window < 2) throw ValidationError("synthetic", "need at least two samples per window");
    const std::size_t n = plan.samples_per_window;
    const double dt = duration_s / static_cast<double>(n - 1);
    const double run_w = plan.baseline_w + net_j / duration_s;
    std::normal_distribution<double> noise(0.0, plan.sample_noise_w);
    auto sample = [&](double mean) {
        const double p = mean + (plan.sample_noise_w > 0 ? noise(rng) : 0.0);
        return p < 0 ? 0.0 : p;
    };

    SyntheticRun out;
    out.series.channel = "AB";
    // Idle samples 0..n-1, one gap sample at idle power, then the run plateau,
    // then a trailing idle sample.
    std::size_t i = 0;
    for (; i < n; ++i) out.series.samples.push_back({static_cast<double>(i) * dt, sample(plan.baseline_w)});
    out.idle = {0.0, static_cast<double>(n - 1) * dt};
    out.series.samples.push_back({static_cast<double>(i++) * dt, sample(plan.baseline_w)});
    const double t0 = static_cast<double>(i) * dt;
    for (std::size_t k = 0; k < n; ++k, ++i) out.series.samples.push_back({static_cast<double>(i) * dt, sample(run_w)});
    out.run = {t0, static_cast<double>(i - 1) * dt};
    out.series.samples.push_back({static_cast<double>(i) * dt, sample(plan.baseline_w)});
    return out;
}

RunEnergy synthesize_energy(const std::string& id, const CommandStats& stats, const DeviceSpec& device,
                            const CalibratedCurrents& truth, const RunPlan& plan, Rng& rng) {
    if (plan.runs == 0) throw EmptyRuns("synthetic", "no runs requested for '" + id + "'");
    const double duration = static_cast<double>(stats.c_total) * device.tck_s();
    const double net = true_net_energy(stats, device, truth);
    std::normal_distribution<double> rel(0.0, plan.run_noise);

    std::vector<std::pair<MeasurementSeries, TimeWindow>> runs;
    double baseline_sum = 0;
    for (std::size_t r = 0; r < plan.runs; ++r) {
        const double run_net = net * (1.0 + (plan.run_noise > 0 ? rel(rng) : 0.0));
        auto run = synthesize_run(duration, run_net, plan, rng);
        baseline_sum += static_baseline(run.series, run.idle, device.vdd).power_w;
        runs.emplace_back(std::move(run.series), run.run);
    }
    return run_energy(id, runs, baseline_sum / static_cast<double>(plan.runs));
}

std::vector<RunEnergy> noisy_energies(const std::vector<NamedStats>& stats, const DeviceSpec& device,
                                      const CalibratedCurrents& truth, double rel_noise, Rng& rng) {
    std::normal_distribution<double> rel(0.0, rel_noise);
    std::vector<RunEnergy> out;
    for (const auto& s : stats) {
        RunEnergy e;
        e.benchmark = s.id;
        e.duration = static_cast<double>(s.stats.c_total) * device.tck_s();
        e.net_energy = true_net_energy(s.stats, device, truth) * (1.0 + (rel_noise > 0 ? rel(rng) : 0.0));
        e.static_energy = 0;
        e.gross_energy = e.net_energy;
        e.n_runs = 1;
        e.stddev = std::abs(e.net_energy) * rel_noise;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<std::pair<std::string, AccessPattern>> holdout_patterns() {
    using enum RequestType;
    return {
        {"swap", {{0, Read}, {1, Read}, {0, Write}, {1, Write}}},
        {"gather3", {{0, Read}, {1, Read}, {2, Read}, {3, Write}}},
        {"fill2", {{0, Write}, {1, Write}}},
        {"readmost", {{0, Read}, {1, Read}, {2, Read}, {0, Write}}},
    };
}

}  // namespace dramcal::synth
