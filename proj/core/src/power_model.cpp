#include "dramcal/power_model.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {
constexpr const char* kStage = "power-model";

double as_d(std::uint64_t v) { return static_cast<double>(v); }
}  // namespace

EnergyBreakdown energy(const CommandStats& s, const DeviceSpec& d, const CalibratedCurrents& c, bool allow_negative) {
    const double v = d.vdd * d.geometry_scale;
    const double tck = d.tck_s();
    const double t_burst = d.burst_s();
    const auto& tm = d.timings;
    const double idd2n = d.idd.idd2n;

    EnergyBreakdown e;
    e.e_act = v * (c.i_act - c.i_asb) * (as_d(tm.tRAS) * tck) * as_d(s.n_act);
    e.e_pre = v * (c.i_pre - idd2n) * (as_d(tm.tRP) * tck) * as_d(s.n_pre);
    e.e_rd = v * (c.i_rd - c.i_asb) * t_burst * as_d(s.n_rd);
    e.e_wr = v * (c.i_wr - c.i_asb) * t_burst * as_d(s.n_wr);
    e.e_ref = v * (d.idd.idd5b - idd2n) * (as_d(tm.tRFC) * tck) * as_d(s.n_ref);
    e.e_bg_act = v * tck * as_d(s.c_act_stdby) * c.i_asb;
    e.e_bg_pre = v * tck * as_d(s.c_pre_stdby) * idd2n;
    e.e_intercept = c.intercept_b;

    if (!allow_negative) {
        const std::pair<const char*, double> parts[] = {{"act", e.e_act}, {"pre", e.e_pre},       {"rd", e.e_rd},
                                                        {"wr", e.e_wr},   {"ref", e.e_ref},       {"bg_act", e.e_bg_act},
                                                        {"bg_pre", e.e_bg_pre}, {"intercept", e.e_intercept}};
        for (const auto& [name, val] : parts) {
            if (val < 0)
                throw NegativeComponent(kStage, std::string("energy component '") + name +
                                                    "' is negative; currents violate the standby ordering");
        }
    }

    e.e_total = e.e_act;
    e.e_total += e.e_pre;
    e.e_total += e.e_rd;
    e.e_total += e.e_wr;
    e.e_total += e.e_ref;
    e.e_total += e.e_bg_act;
    e.e_total += e.e_bg_pre;
    e.e_total += e.e_intercept;
    e.duration = as_d(s.c_total) * tck;
    e.p_avg = e.duration > 0 ? e.e_total / e.duration : 0.0;
    return e;
}

double CoefficientRow::predict(const CalibratedCurrents& c) const {
    double sum = 0;
    for (auto k : kAllCurrents) sum += (*this)[k] * c[k];
    return sum + e_const + c.intercept_b;
}

CoefficientRow coefficients(const CommandStats& s, const DeviceSpec& d) {
    const double v = d.vdd * d.geometry_scale;
    const double tck = d.tck_s();
    const double t_burst = d.burst_s();
    const auto& tm = d.timings;
    const double t_act = as_d(tm.tRAS) * tck;
    const double t_pre = as_d(tm.tRP) * tck;
    const double idd2n = d.idd.idd2n;

    CoefficientRow row;
    auto set = [&](Current c, double x) { row.coeff[static_cast<std::size_t>(c)] = x; };
    set(Current::Act, v * t_act * as_d(s.n_act));
    set(Current::Pre, v * t_pre * as_d(s.n_pre));
    set(Current::Rd, v * t_burst * as_d(s.n_rd));
    set(Current::Wr, v * t_burst * as_d(s.n_wr));
    set(Current::Asb, v * (tck * as_d(s.c_act_stdby) - t_act * as_d(s.n_act) - t_burst * as_d(s.n_rd + s.n_wr)));
    row.e_const = v * (tck * as_d(s.c_pre_stdby) * idd2n - t_pre * as_d(s.n_pre) * idd2n +
                       (d.idd.idd5b - idd2n) * (as_d(tm.tRFC) * tck) * as_d(s.n_ref));
    return row;
}

BreakdownReport breakdown_report(const EnergyBreakdown& bd) {
    BreakdownReport r;
    r.rows = {{"act", bd.e_act, 0},      {"pre", bd.e_pre, 0},       {"rd", bd.e_rd, 0},
              {"wr", bd.e_wr, 0},        {"ref", bd.e_ref, 0},       {"bg_act", bd.e_bg_act, 0},
              {"bg_pre", bd.e_bg_pre, 0}, {"intercept", bd.e_intercept, 0}};
    double total = 0;
    for (const auto& row : r.rows) total += row.joules;
    r.empty = total == 0;
    if (!r.empty) {
        for (auto& row : r.rows) row.percent = 100.0 * row.joules / total;
    }
    std::stable_sort(r.rows.begin(), r.rows.end(),
                     [](const BreakdownRow& a, const BreakdownRow& b) { return a.joules > b.joules; });
    return r;
}

std::string breakdown_csv(const BreakdownReport& report) {
    std::ostringstream os;
    os << "component,joules,percent\n";
    for (const auto& row : report.rows)
        os << row.component << "," << text::fmt_double(row.joules) << "," << text::fmt_double(row.percent) << "\n";
    return os.str();
}

std::string breakdown_table(const EnergyBreakdown& bd, const BreakdownReport& report) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-10s %16s %9s\n", "component", "energy [J]", "share");
    os << buf;
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %16.6e %8.2f%%\n", row.component.c_str(), row.joules, row.percent);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-10s %16.6e\n", "total", bd.e_total);
    os << buf;
    std::snprintf(buf, sizeof(buf), "duration %.6e s, average power %.6e W%s\n", bd.duration, bd.p_avg,
                  report.empty ? " (empty)" : "");
    os << buf;
    return os.str();
}

}  // namespace dramcal
