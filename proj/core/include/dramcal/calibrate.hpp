#pragma once

#include <string>
#include <vector>

#include "dramcal/bvls.hpp"
#include "dramcal/device_spec.hpp"
#include "dramcal/matrix.hpp"
#include "dramcal/measurement.hpp"
#include "dramcal/power_model.hpp"
#include "dramcal/trace_stats.hpp"

namespace dramcal {

struct CalibrationOptions {
    bool fit_intercept = true;
    bool weighted = false;  // rows scaled by 1/stddev
    bool gross = false;     // fit gross energy with the static energy moved into e_const
    double weak_threshold = 1e-3;       // column norm relative to the largest
    double collinear_threshold = 0.99;  // |cosine| between columns
    double rel_tol = 1e-8;
    std::size_t max_iterations = 0;
};

struct ProblemRow {
    std::string id;
    CoefficientRow coeff;
    double measured = 0;  // J, the energy being explained (net, or gross)
    double e_const = 0;   // J, current-independent model terms
    double weight = 1;
};

struct CalibrationProblem {
    std::vector<ProblemRow> rows;
    std::vector<double> y;  // measured - e_const
    CurrentBounds bounds;
    bool fit_intercept = true;
    bool weighted = false;
    CalibratedCurrents reference;  // values reported for excluded currents
    std::vector<Current> fitted;    // currents with a nonzero column
    std::vector<Current> excluded;  // all-zero columns
    std::vector<std::string> warnings;

    // Columns: fitted currents in order, then the intercept (if fitted).
    Matrix design_matrix() const;
    std::vector<double> weighted_y() const;
    std::vector<Interval> column_bounds() const;
    std::vector<std::string> column_names() const;
};

CalibrationProblem build_problem(const std::vector<NamedStats>& stats, const std::vector<RunEnergy>& energies,
                                 const DeviceSpec& device, const CurrentBounds& bounds,
                                 const CalibrationOptions& options = {});

struct ObservabilityReport {
    std::vector<std::string> names;
    std::vector<double> column_norms;
    std::vector<std::vector<double>> correlation;  // cosine of raw (uncentered) columns
    double condition_number = 1;                   // of the column-normalized matrix; inf if rank deficient
    std::vector<bool> weak;
    std::vector<std::pair<std::size_t, std::size_t>> collinear;
};

ObservabilityReport diagnose(const Matrix& a, std::vector<std::string> names = {}, double weak_threshold = 1e-3,
                             double collinear_threshold = 0.99);

struct RowFit {
    std::string id;
    double measured = 0;   // J
    double model = 0;      // J, calibrated model total
    double residual = 0;   // J, model - measured
    double rel_error_pct = 0;
};

struct CalibrationResult {
    CalibratedCurrents currents;
    std::vector<RowFit> rows;
    double mean_rel_error_pct = 0;
    double objective = 0;  // 1/2 |A theta - y|^2 over the (weighted) fitted columns
    std::vector<std::string> column_names;
    KktReport kkt;
    ObservabilityReport diagnostics;
    std::vector<Current> excluded;
    std::size_t iterations = 0;
    bool converged = true;
};

CalibrationResult calibrate(const CalibrationProblem& problem, const CalibrationOptions& options = {});

struct HoldoutCase {
    std::string id;
    CommandStats stats;
    RunEnergy energy;
};

struct ValidationRow {
    std::string id;
    double measured = 0;  // J
    double pre_model = 0;   // datasheet currents
    double post_model = 0;  // calibrated currents
    double pre_error_pct = 0;
    double post_error_pct = 0;
};

std::vector<ValidationRow> validate(const CalibratedCurrents& currents, const std::vector<HoldoutCase>& holdout,
                                    const DeviceSpec& device, bool gross = false);
std::vector<HoldoutCase> join_holdout(const std::vector<NamedStats>& stats, const std::vector<RunEnergy>& energies);

std::string validation_csv(const std::vector<ValidationRow>& rows);
std::string calibration_summary(const CalibrationResult& result);
std::string calibration_csv(const CalibrationResult& result);

}  // namespace dramcal
