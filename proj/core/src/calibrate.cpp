#include "dramcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "calibrate";

double measured_total(const RunEnergy& e, bool gross) { return gross ? e.gross_energy : e.net_energy; }

double relative_error_pct(double model, double measured) {
    if (measured == 0) return model == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 100.0 * std::abs(model - measured) / std::abs(measured);
}

std::map<std::string, const RunEnergy*> index_energies(const std::vector<RunEnergy>& energies) {
    std::map<std::string, const RunEnergy*> by_id;
    for (const auto& e : energies) {
        if (!by_id.emplace(e.benchmark, &e).second) throw IdMismatch(kStage, "duplicate energy id '" + e.benchmark + "'");
    }
    return by_id;
}

}  // namespace

Matrix CalibrationProblem::design_matrix() const {
    const std::size_t cols = fitted.size() + (fit_intercept ? 1 : 0);
    Matrix a(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double w = weighted ? rows[r].weight : 1.0;
        for (std::size_t k = 0; k < fitted.size(); ++k) a(r, k) = w * rows[r].coeff[fitted[k]];
        if (fit_intercept) a(r, fitted.size()) = w;
    }
    return a;
}

std::vector<double> CalibrationProblem::weighted_y() const {
    std::vector<double> out(y);
    if (weighted) {
        for (std::size_t r = 0; r < rows.size(); ++r) out[r] *= rows[r].weight;
    }
    return out;
}

std::vector<Interval> CalibrationProblem::column_bounds() const {
    std::vector<Interval> out;
    for (auto c : fitted) out.push_back(bounds[c]);
    if (fit_intercept) out.push_back(bounds.intercept);
    return out;
}

std::vector<std::string> CalibrationProblem::column_names() const {
    std::vector<std::string> out;
    for (auto c : fitted) out.emplace_back(current_name(c));
    if (fit_intercept) out.emplace_back("intercept_b");
    return out;
}

CalibrationProblem build_problem(const std::vector<NamedStats>& stats, const std::vector<RunEnergy>& energies,
                                 const DeviceSpec& device, const CurrentBounds& bounds,
                                 const CalibrationOptions& options) {
    if (stats.empty()) throw ValidationError(kStage, "calibration needs at least one benchmark");
    if (stats.size() != energies.size())
        throw IdMismatch(kStage, std::to_string(stats.size()) + " stats rows but " + std::to_string(energies.size()) +
                                     " energy rows");
    const auto by_id = index_energies(energies);
    for (auto c : kAllCurrents) {
        if (!(bounds[c].lower <= bounds[c].upper))
            throw ValidationError(kStage, std::string(current_name(c)) + " bound has lower > upper");
    }
    if (!(bounds.intercept.lower <= bounds.intercept.upper))
        throw ValidationError(kStage, "intercept bound has lower > upper");

    CalibrationProblem p;
    p.bounds = bounds;
    p.fit_intercept = options.fit_intercept;
    p.weighted = options.weighted;
    p.reference = datasheet_currents(device);

    std::map<std::string, int> seen;
    for (const auto& s : stats) {
        if (seen[s.id]++) throw IdMismatch(kStage, "duplicate stats id '" + s.id + "'");
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) throw IdMismatch(kStage, "no measured energy for benchmark '" + s.id + "'");
        const auto& e = *it->second;

        ProblemRow row;
        row.id = s.id;
        row.coeff = coefficients(s.stats, device);
        row.e_const = row.coeff.e_const + (options.gross ? e.static_energy : 0.0);
        row.measured = measured_total(e, options.gross);
        if (!std::isfinite(row.measured)) throw NonFinite(kStage, "measured energy for '" + s.id + "' is not finite");
        if (options.weighted) {
            if (!(e.stddev > 0))
                throw ValidationError(kStage, "weighted fit needs a positive stddev for '" + s.id + "'");
            row.weight = 1.0 / e.stddev;
        }
        p.y.push_back(row.measured - row.e_const);
        p.rows.push_back(std::move(row));
    }

    for (auto c : kAllCurrents) {
        const bool any = std::any_of(p.rows.begin(), p.rows.end(), [&](const ProblemRow& r) { return r.coeff[c] != 0; });
        if (any) {
            p.fitted.push_back(c);
        } else {
            p.excluded.push_back(c);
            p.warnings.push_back(std::string(current_name(c)) + " has an all-zero column; kept at its datasheet value");
        }
    }
    const std::size_t unknowns = p.fitted.size() + (p.fit_intercept ? 1 : 0);
    if (p.rows.size() < kNumCurrents)
        p.warnings.push_back("only " + std::to_string(p.rows.size()) + " benchmark rows for " +
                             std::to_string(unknowns) + " unknowns");
    return p;
}

ObservabilityReport diagnose(const Matrix& a, std::vector<std::string> names, double weak_threshold,
                             double collinear_threshold) {
    if (a.rows() == 0 || a.cols() == 0) throw ValidationError(kStage, "diagnose needs a nonempty matrix");
    const auto n = a.cols();
    ObservabilityReport rep;
    if (names.size() != n) {
        names.clear();
        for (std::size_t j = 0; j < n; ++j) names.push_back("col" + std::to_string(j));
    }
    rep.names = std::move(names);

    std::vector<std::vector<double>> cols(n);
    double max_norm = 0;
    for (std::size_t j = 0; j < n; ++j) {
        cols[j] = a.column(j);
        double s = 0;
        for (double v : cols[j]) s += v * v;
        rep.column_norms.push_back(std::sqrt(s));
        max_norm = std::max(max_norm, rep.column_norms.back());
    }
    for (std::size_t j = 0; j < n; ++j)
        rep.weak.push_back(max_norm == 0 || rep.column_norms[j] < weak_threshold * max_norm);

    rep.correlation.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (rep.column_norms[i] == 0 || rep.column_norms[j] == 0) continue;
            if (i == j) {
                rep.correlation[i][j] = 1.0;
                continue;
            }
            double dot = 0;
            for (std::size_t r = 0; r < a.rows(); ++r) dot += cols[i][r] * cols[j][r];
            rep.correlation[i][j] = std::clamp(dot / (rep.column_norms[i] * rep.column_norms[j]), -1.0, 1.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(rep.correlation[i][j]) > collinear_threshold) rep.collinear.emplace_back(i, j);

    Eigen::MatrixXd normalized(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < a.rows(); ++r)
            normalized(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                rep.column_norms[j] > 0 ? cols[j][r] / rep.column_norms[j] : 0.0;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(normalized);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
    // Fewer rows than columns leaves a nontrivial null space.
    const bool deficient = a.rows() < n || smin <= smax * 1e-13;
    rep.condition_number = deficient ? std::numeric_limits<double>::infinity() : smax / smin;
    return rep;
}

CalibrationResult calibrate(const CalibrationProblem& problem, const CalibrationOptions& options) {
    if (problem.rows.empty()) throw ValidationError(kStage, "calibration problem has no rows");
    CalibrationResult res;
    res.currents = problem.reference;
    res.currents.intercept_b = 0;
    res.excluded = problem.excluded;
    res.column_names = problem.column_names();

    const auto a = problem.design_matrix();
    const auto y = problem.weighted_y();
    if (a.cols() > 0) {
        res.diagnostics = diagnose(a, res.column_names, options.weak_threshold, options.collinear_threshold);
        if (problem.fit_intercept) {
            // The intercept column is in different units; judge excitation
            // among the current columns only.
            auto& d = res.diagnostics;
            const auto k = problem.fitted.size();
            const double max_norm =
                k ? *std::max_element(d.column_norms.begin(), d.column_norms.begin() + static_cast<std::ptrdiff_t>(k)) : 0.0;
            for (std::size_t j = 0; j < k; ++j) d.weak[j] = d.column_norms[j] < options.weak_threshold * max_norm;
            d.weak[k] = false;
        }
        const auto sol = solve_bvls(a, y, problem.column_bounds(), {options.rel_tol, options.max_iterations});
        for (std::size_t k = 0; k < problem.fitted.size(); ++k) res.currents[problem.fitted[k]] = sol.x[k];
        if (problem.fit_intercept) res.currents.intercept_b = sol.x.back();
        res.objective = sol.objective;
        res.kkt = sol.kkt;
        res.iterations = sol.iterations;
        res.converged = sol.converged;
    }

    double sum = 0;
    for (const auto& row : problem.rows) {
        RowFit fit;
        fit.id = row.id;
        fit.measured = row.measured;
        double model = row.e_const + res.currents.intercept_b;
        for (auto c : kAllCurrents) model += row.coeff[c] * res.currents[c];
        fit.model = model;
        fit.residual = model - row.measured;
        fit.rel_error_pct = relative_error_pct(model, row.measured);
        sum += fit.rel_error_pct;
        res.rows.push_back(std::move(fit));
    }
    res.mean_rel_error_pct = sum / static_cast<double>(problem.rows.size());
    return res;
}

std::vector<HoldoutCase> join_holdout(const std::vector<NamedStats>& stats, const std::vector<RunEnergy>& energies) {
    if (stats.size() != energies.size()) throw IdMismatch(kStage, "holdout stats and energies differ in length");
    const auto by_id = index_energies(energies);
    std::vector<HoldoutCase> out;
    for (const auto& s : stats) {
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) throw IdMismatch(kStage, "no measured energy for holdout '" + s.id + "'");
        out.push_back({s.id, s.stats, *it->second});
    }
    return out;
}

std::vector<ValidationRow> validate(const CalibratedCurrents& currents, const std::vector<HoldoutCase>& holdout,
                                    const DeviceSpec& device, bool gross) {
    if (holdout.empty()) throw ValidationError(kStage, "holdout set is empty");
    const auto ds = datasheet_currents(device);
    std::vector<ValidationRow> out;
    for (const auto& h : holdout) {
        const auto row = coefficients(h.stats, device);
        const double extra = gross ? h.energy.static_energy : 0.0;
        ValidationRow v;
        v.id = h.id;
        v.measured = measured_total(h.energy, gross);
        v.pre_model = row.predict(ds) + extra;
        v.post_model = row.predict(currents) + extra;
        v.pre_error_pct = relative_error_pct(v.pre_model, v.measured);
        v.post_error_pct = relative_error_pct(v.post_model, v.measured);
        out.push_back(std::move(v));
    }
    return out;
}

std::string validation_csv(const std::vector<ValidationRow>& rows) {
    std::ostringstream os;
    os << "benchmark,measured_j,precal_model_j,postcal_model_j,precal_error_pct,postcal_error_pct\n";
    for (const auto& r : rows)
        os << r.id << "," << text::fmt_double(r.measured) << "," << text::fmt_double(r.pre_model) << ","
           << text::fmt_double(r.post_model) << "," << text::fmt_double(r.pre_error_pct) << ","
           << text::fmt_double(r.post_error_pct) << "\n";
    return os.str();
}

std::string calibration_csv(const CalibrationResult& res) {
    std::ostringstream os;
    os << "benchmark,measured_j,model_j,residual_j,rel_error_pct\n";
    for (const auto& r : res.rows)
        os << r.id << "," << text::fmt_double(r.measured) << "," << text::fmt_double(r.model) << ","
           << text::fmt_double(r.residual) << "," << text::fmt_double(r.rel_error_pct) << "\n";
    return os.str();
}

std::string calibration_summary(const CalibrationResult& res) {
    std::ostringstream os;
    char buf[160];
    os << "calibrated currents:\n";
    for (auto c : kAllCurrents) {
        const bool excl = std::find(res.excluded.begin(), res.excluded.end(), c) != res.excluded.end();
        std::snprintf(buf, sizeof(buf), "  %-6s %.6e A%s\n", std::string(current_name(c)).c_str(), res.currents[c],
                      excl ? "  (not excited, datasheet value)" : "");
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %-6s %.6e J\n", "b", res.currents.intercept_b);
    os << buf;
    std::snprintf(buf, sizeof(buf), "objective %.6e J^2, %zu iterations%s, KKT %s (max excess %.3e, tol %.3e)\n",
                  res.objective, res.iterations, res.converged ? "" : " (iteration limit)",
                  res.kkt.satisfied ? "ok" : "VIOLATED", res.kkt.max_violation, res.kkt.tol);
    os << buf;
    for (std::size_t k = 0; k < res.kkt.entries.size() && k < res.column_names.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "  %-12s %-9s grad %.3e\n", res.column_names[k].c_str(),
                      std::string(bound_status_name(res.kkt.entries[k].status)).c_str(), res.kkt.entries[k].gradient);
        os << buf;
    }
    const auto& d = res.diagnostics;
    std::snprintf(buf, sizeof(buf), "condition number (normalized columns): %.3e\n", d.condition_number);
    os << buf;
    for (std::size_t j = 0; j < d.weak.size(); ++j)
        if (d.weak[j]) os << "  weak excitation: " << d.names[j] << "\n";
    for (const auto& [i, j] : d.collinear) {
        std::snprintf(buf, sizeof(buf), "  collinear: %s ~ %s (cos %.6f)\n", d.names[i].c_str(), d.names[j].c_str(),
                      d.correlation[i][j]);
        os << buf;
    }
    os << "per-benchmark fit:\n";
    for (const auto& r : res.rows) {
        std::snprintf(buf, sizeof(buf), "  %-12s measured %.6e J  model %.6e J  error %.3f%%\n", r.id.c_str(),
                      r.measured, r.model, r.rel_error_pct);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean relative error: %.3f%%\n", res.mean_rel_error_pct);
    os << buf;
    return os.str();
}

}  // namespace dramcal
