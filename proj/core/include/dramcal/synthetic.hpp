#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dramcal/device_spec.hpp"
#include "dramcal/measurement.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"

// Ground-truth generators for plant-and-recover experiments. "Measured"
// energies come from the linear model evaluated at planted currents, so the
// planted values may sit below datasheet background currents.
namespace dramcal::synth {

using Rng = std::mt19937_64;

// Independent stream for item `index` of a run seeded with `seed`.
Rng derive_rng(std::uint64_t seed, std::uint64_t index);

// Each fitted current drawn uniformly from [lo, hi] x its datasheet value.
CalibratedCurrents plant_currents(const DeviceSpec& device, double lo_fraction, double hi_fraction, double intercept_j,
                                  Rng& rng);
CalibratedCurrents scale_currents(const DeviceSpec& device, double fraction, double intercept_j = 0);

// Noise-free model energy of one benchmark under the planted currents.
double true_net_energy(const CommandStats& stats, const DeviceSpec& device, const CalibratedCurrents& truth);

struct RunPlan {
    double baseline_w = 0.3984;   // idle channel power
    double sample_noise_w = 0.0;  // per-sample Gaussian noise
    double run_noise = 0.01;      // relative noise on each run's net energy
    std::size_t runs = 3;
    std::size_t samples_per_window = 1000;
};

// One measured run: idle window, then the benchmark window. The returned
// windows are the ones to integrate for baseline and run energy.
struct SyntheticRun {
    MeasurementSeries series;
    TimeWindow idle;
    TimeWindow run;
};

SyntheticRun synthesize_run(double duration_s, double net_j, const RunPlan& plan, Rng& rng);

// Runs synthesized and reduced through the measurement path.
RunEnergy synthesize_energy(const std::string& id, const CommandStats& stats, const DeviceSpec& device,
                            const CalibratedCurrents& truth, const RunPlan& plan, Rng& rng);

// Cheaper variant for large sweeps: net energy perturbed directly.
std::vector<RunEnergy> noisy_energies(const std::vector<NamedStats>& stats, const DeviceSpec& device,
                                      const CalibratedCurrents& truth, double rel_noise, Rng& rng);

// Mixed access patterns absent from the training kernels.
std::vector<std::pair<std::string, AccessPattern>> holdout_patterns();

}  // namespace dramcal::synth
