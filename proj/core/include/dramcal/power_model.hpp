#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "dramcal/device_spec.hpp"
#include "dramcal/trace_stats.hpp"

namespace dramcal {

struct EnergyBreakdown {
    double e_act = 0;
    double e_pre = 0;
    double e_rd = 0;
    double e_wr = 0;
    double e_ref = 0;
    double e_bg_act = 0;
    double e_bg_pre = 0;
    double e_intercept = 0;
    double e_total = 0;   // J, summed in the member order above
    double p_avg = 0;     // W
    double duration = 0;  // s
};

// Background energy from state dwell plus per-command energy above the
// background current:
//
//   e_bg_act = V tck c_act_stdby i_asb      e_bg_pre = V tck c_pre_stdby IDD2N
//   e_act    = V (i_act - i_asb) tRAS n_act e_pre    = V (i_pre - IDD2N) tRP n_pre
//   e_rd     = V (i_rd - i_asb) tBurst n_rd e_wr     = V (i_wr - i_asb) tBurst n_wr
//   e_ref    = V (IDD5B - IDD2N) tRFC n_ref
//
// every term times device.geometry_scale; the intercept is added as is.
// Throws NegativeComponent if a component comes out negative, unless
// `allow_negative` is set.
EnergyBreakdown energy(const CommandStats& stats, const DeviceSpec& device, const CalibratedCurrents& currents,
                       bool allow_negative = false);

// energy(...).e_total == dot(coeff, currents) + e_const + intercept_b.
struct CoefficientRow {
    std::array<double, kNumCurrents> coeff{};  // J/A, ordered as kAllCurrents
    double e_const = 0;                        // J

    double operator[](Current c) const { return coeff[static_cast<std::size_t>(c)]; }
    double predict(const CalibratedCurrents& currents) const;
};

CoefficientRow coefficients(const CommandStats& stats, const DeviceSpec& device);

struct BreakdownRow {
    std::string component;
    double joules = 0;
    double percent = 0;
};

struct BreakdownReport {
    std::vector<BreakdownRow> rows;  // sorted by energy, descending
    bool empty = false;              // total was zero
};

BreakdownReport breakdown_report(const EnergyBreakdown& bd);
std::string breakdown_csv(const BreakdownReport& report);
std::string breakdown_table(const EnergyBreakdown& bd, const BreakdownReport& report);

}  // namespace dramcal
