#include <sstream>
#include <string>
#include <vector>

#include "dramcal/device_spec.hpp"
#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"
#include "dramcal_tools/pipeline.hpp"

namespace dramcal::tools {

namespace {

constexpr const char* kStage = "cli";

using Table = std::vector<std::vector<std::string>>;

std::string require(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw MissingArtifacts(kStage, "missing pipeline artifact " + path.string());
    return text::read_file(path, kStage);
}

// Rows after the header, split on commas. Fields never contain commas.
Table body(const std::string& csv, std::size_t min_fields, const fs::path& path) {
    Table out;
    text::LineReader reader(csv);
    std::string_view line;
    bool header = true;
    while (reader.next(line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> fields;
        for (auto f : text::split(line, ',')) fields.emplace_back(text::trim(f));
        if (fields.size() < min_fields)
            throw ParseError(kStage, path.string(), reader.line_number(), "expected " + std::to_string(min_fields) + " fields");
        out.push_back(std::move(fields));
    }
    return out;
}

}  // namespace

void emit_plots(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingArtifacts(kStage, "no pipeline output directory " + dir.string());

    const auto stats_path = dir / "stats.csv";
    const auto fit_path = dir / "fit.csv";
    const auto val_path = dir / "validation.csv";
    const auto static_path = dir / "static.csv";
    const auto stats = body(require(stats_path), 1, stats_path);
    const auto fit = body(require(fit_path), 4, fit_path);
    const auto currents = parse_currents(require(dir / "currents.txt"), (dir / "currents.txt").string());
    const auto validation_text = require(val_path);
    const auto statics = body(require(static_path), 4, static_path);

    std::vector<std::string> ids;
    for (const auto& r : stats) ids.push_back(r[0]);
    if (fs::is_regular_file(dir / "holdout" / "stats.csv"))
        for (const auto& r : body(require(dir / "holdout" / "stats.csv"), 1, dir / "holdout" / "stats.csv"))
            ids.push_back("holdout/" + r[0]);

    std::ostringstream bd;
    bd << "benchmark,component,joules,percent\n";
    for (const auto& id : ids) {
        const bool is_hold = id.rfind("holdout/", 0) == 0;
        const auto name = is_hold ? id.substr(8) : id;
        const auto file = (is_hold ? dir / "holdout" : dir) / "breakdown" / (name + ".csv");
        for (const auto& r : body(require(file), 3, file)) bd << name << "," << r[0] << "," << r[1] << "," << r[2] << "\n";
    }

    std::ostringstream cal;
    cal << "benchmark,measured_j,uncalibrated_j,calibrated_j";
    for (auto c : kAllCurrents) cal << "," << current_name(c) << "_a";
    cal << ",intercept_b_j\n";
    for (const auto& r : fit) {
        cal << r[0] << "," << r[1] << "," << r[2] << "," << r[3];
        for (auto c : kAllCurrents) cal << "," << text::fmt_double(currents[c]);
        cal << "," << text::fmt_double(currents.intercept_b) << "\n";
    }

    std::ostringstream st;
    st << "run,channel,static_power_w,current_per_dimm_a\n";
    for (const auto& r : statics) st << r[0] << "," << r[1] << "," << r[2] << "," << r[3] << "\n";

    text::write_file(dir / "fig_breakdown.csv", bd.str(), kStage);
    text::write_file(dir / "fig_calibration.csv", cal.str(), kStage);
    text::write_file(dir / "fig_validation.csv", validation_text, kStage);
    text::write_file(dir / "fig_static.csv", st.str(), kStage);
}

}  // namespace dramcal::tools
