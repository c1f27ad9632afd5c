#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dramcal/address_map.hpp"
#include "dramcal/calibrate.hpp"
#include "dramcal/device_spec.hpp"
#include "dramcal/error.hpp"
#include "dramcal/measurement.hpp"
#include "dramcal/memctrl.hpp"
#include "dramcal/power_model.hpp"
#include "dramcal/text_io.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"
#include "dramcal_tools/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dramcal;

namespace {

constexpr const char* kStage = "cli";

void emit(const std::string& out_path, const std::string& contents, const char* stage) {
    if (out_path.empty() || out_path == "-")
        std::cout << contents;
    else
        text::write_file(out_path, contents, stage);
}

TimeWindow parse_window(const std::string& s, const char* what) {
    const auto colon = s.find(':');
    TimeWindow w;
    if (colon == std::string::npos || !text::parse_double(std::string_view(s).substr(0, colon), w.t0) ||
        !text::parse_double(std::string_view(s).substr(colon + 1), w.t1))
        throw ValidationError(kStage, std::string(what) + " must look like <t0>:<t1>, got '" + s + "'");
    return w;
}

AccessPattern parse_pattern(const std::string& s) {
    AccessPattern p;
    for (auto tok : text::split(s, ',')) {
        tok = text::trim(tok);
        const auto colon = tok.find(':');
        if (colon != 1 || tok.size() != 3 || tok[0] < 'a' || tok[0] > 'z' || (tok[2] != 'R' && tok[2] != 'W'))
            throw ValidationError("workload-gen", "pattern entries look like a:R or b:W, got '" + std::string(tok) + "'");
        p.push_back({static_cast<unsigned>(tok[0] - 'a'), tok[2] == 'R' ? RequestType::Read : RequestType::Write});
    }
    if (p.empty()) throw ValidationError("workload-gen", "empty access pattern");
    return p;
}

CoordWidths parse_widths(const std::string& s) {
    CoordWidths w{};
    for (auto tok : text::split(s, ',')) {
        tok = text::trim(tok);
        const auto eq = tok.find('=');
        bool ok = false;
        std::uint64_t v = 0;
        if (eq != std::string_view::npos && text::parse_u64(tok.substr(eq + 1), v)) {
            for (auto c : kAllCoords) {
                if (coord_name(c) == text::trim(tok.substr(0, eq))) {
                    w[static_cast<std::size_t>(c)] = static_cast<unsigned>(v);
                    ok = true;
                }
            }
        }
        if (!ok) throw ValidationError("address-map", "bad width entry '" + std::string(tok) + "'");
    }
    return w;
}

std::string stats_rows(const std::vector<NamedStats>& rows) {
    std::string s = stats_csv_header();
    for (const auto& r : rows) s += stats_csv_row(r.id, r.stats);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRAM energy modeling and IDD current calibration toolkit", "dram-calib"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dram-calib 0.1.0");

    // gen-stream
    std::string gs_kernel, gs_pattern, gs_out;
    std::uint64_t gs_elements = 1'000'000, gs_stride = kLineBytes, gs_start = 0;
    std::vector<std::uint64_t> gs_bases;
    bool gs_rfo = false;
    auto* gen = app.add_subcommand("gen-stream", "Generate a STREAM-style request sequence");
    auto* kopt = gen->add_option("--kernel", gs_kernel, "read|assign|scale|addition|triad|copy|selfscale");
    gen->add_option("--pattern", gs_pattern, "Custom pattern such as a:R,b:R,a:W")->excludes(kopt);
    gen->add_option("--elements", gs_elements, "8-byte elements per array")->capture_default_str();
    gen->add_option("--stride", gs_stride, "Bytes between consecutive requests (multiple of 64)")->capture_default_str();
    gen->add_option("--base", gs_bases, "Base address per array (default: back to back)");
    gen->add_option("--start", gs_start, "Start address for back-to-back placement")->capture_default_str();
    gen->add_flag("--rfo", gs_rfo, "Insert read-for-ownership before unread writes");
    gen->add_option("-o,--out", gs_out, "Output CSV (default stdout)");

    // simulate
    std::string sim_stream, sim_device, sim_mapping, sim_out, sim_stats;
    bool sim_check = false;
    auto* sim = app.add_subcommand("simulate", "Schedule requests into a DDR4 command trace");
    sim->add_option("--stream", sim_stream, "Request CSV from gen-stream")->required();
    sim->add_option("--device", sim_device, "Device JSON")->required();
    sim->add_option("--mapping", sim_mapping, "Address mapping file")->required();
    sim->add_option("-o,--out", sim_out, "Trace file (default stdout)");
    sim->add_option("--stats-out", sim_stats, "Also write the stats CSV row here");
    sim->add_flag("--check", sim_check, "Fail if the trace violates any timing rule");

    // stats
    std::vector<std::string> st_traces;
    std::string st_device, st_out;
    bool st_strict = false, st_kv = false;
    auto* stc = app.add_subcommand("stats", "Reduce command traces to counts and state dwell");
    stc->add_option("--trace", st_traces, "Trace file(s); the benchmark id is the file stem")->required();
    stc->add_option("--device", st_device, "Device JSON")->required();
    stc->add_flag("--strict", st_strict, "Reject traces with timing violations");
    stc->add_flag("--key-values", st_kv, "Print key=value lines instead of CSV");
    stc->add_option("-o,--out", st_out, "Stats CSV (default stdout)");

    // energy
    std::string en_stats, en_device, en_currents, en_out;
    bool en_allow_neg = false;
    auto* en = app.add_subcommand("energy", "Per-benchmark energy breakdown");
    en->add_option("--stats", en_stats, "Stats CSV")->required();
    en->add_option("--device", en_device, "Device JSON")->required();
    en->add_option("--currents", en_currents, "Calibrated currents file (default: datasheet)");
    en->add_flag("--allow-negative", en_allow_neg, "Report negative components instead of failing");
    en->add_option("-o,--out", en_out, "Breakdown CSV (benchmark,component,joules,percent)");

    // measure
    std::vector<std::string> me_series;
    std::string me_idle, me_window, me_id, me_device, me_out, me_aggregate;
    bool me_sort = false, me_append = false;
    auto* me = app.add_subcommand("measure", "Integrate power series into static and net energy");
    auto* series_opt = me->add_option("--series", me_series, "One power CSV per run");
    me->add_option("--idle", me_idle, "Idle window t0:t1 (s) for the static baseline");
    me->add_option("--window", me_window, "Benchmark window t0:t1 (s)");
    me->add_option("--id", me_id, "Benchmark id");
    me->add_option("--device", me_device, "Device JSON (vdd and DIMMs per channel)");
    me->add_flag("--sort", me_sort, "Sort out-of-order samples instead of rejecting them");
    me->add_flag("--append", me_append, "Append the row to an existing energies CSV");
    me->add_option("--aggregate", me_aggregate, "Average <bench>_<threads>_<channel>_<run>.csv files in a directory")
        ->excludes(series_opt);
    me->add_option("-o,--out", me_out, "Output CSV (default stdout)");

    // infer-map
    std::string im_samples, im_widths, im_out;
    unsigned im_bits = 0;
    auto* im = app.add_subcommand("infer-map", "Recover XOR address functions from probe samples");
    im->add_option("--samples", im_samples, "CSV address,channel,rank,bank_group,bank,row,column")->required();
    im->add_option("--address-bits", im_bits, "Physical address width")->required();
    im->add_option("--widths", im_widths, "e.g. rank=1,bank_group=2,bank=2,row=16,column=7")->required();
    im->add_option("-o,--out", im_out, "Mapping file (default stdout)");

    // calibrate
    std::string ca_stats, ca_energies, ca_device, ca_out, ca_report;
    bool ca_weighted = false, ca_no_intercept = false, ca_gross = false;
    auto* ca = app.add_subcommand("calibrate", "Fit IDD currents to measured energy by bounded least squares");
    ca->add_option("--stats", ca_stats, "Stats CSV")->required();
    ca->add_option("--energies", ca_energies, "Energies CSV from measure")->required();
    ca->add_option("--device", ca_device, "Device JSON")->required();
    ca->add_flag("--weighted", ca_weighted, "Weight rows by 1/stddev");
    ca->add_flag("--no-intercept", ca_no_intercept, "Do not fit the constant offset b");
    ca->add_flag("--gross", ca_gross, "Fit gross energy with static energy as a known term");
    ca->add_option("--out", ca_out, "Currents file")->required();
    ca->add_option("--report", ca_report, "Write the fit report here as well as to stderr");

    // validate
    std::string va_currents, va_holdout, va_device, va_out;
    bool va_gross = false;
    auto* va = app.add_subcommand("validate", "Compare datasheet and calibrated models on held-out runs");
    va->add_option("--currents", va_currents, "Currents file")->required();
    va->add_option("--holdout", va_holdout, "Directory with stats.csv and energies.csv")->required();
    va->add_option("--device", va_device, "Device JSON")->required();
    va->add_flag("--gross", va_gross, "Compare gross instead of net energy");
    va->add_option("-o,--out", va_out, "Validation CSV (default stdout)");

    // pipeline
    std::string pl_config, pl_out;
    auto* pl = app.add_subcommand("pipeline", "Run generate, simulate, model, measure, calibrate and validate");
    pl->add_option("--config", pl_config, "Pipeline JSON")->required();
    pl->add_option("--out", pl_out, "Override output_dir");

    // emit-plots
    std::string ep_dir;
    auto* ep = app.add_subcommand("emit-plots", "Write plot-ready CSVs from pipeline artifacts");
    ep->add_option("--dir", ep_dir, "Pipeline output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            AccessPattern pattern;
            std::string label;
            if (!gs_pattern.empty()) {
                pattern = parse_pattern(gs_pattern);
                label = "pattern " + gs_pattern;
            } else {
                if (gs_kernel.empty()) throw ValidationError("workload-gen", "give --kernel or --pattern");
                const auto k = kernel_from_name(gs_kernel);
                if (!k) throw ValidationError("workload-gen", "unknown kernel '" + gs_kernel + "'");
                pattern = access_pattern(*k);
                label = "kernel " + gs_kernel;
            }
            if (gs_rfo) pattern = with_rfo(pattern);
            StreamParams p{pattern, gs_elements, gs_stride,
                           gs_bases.empty() ? contiguous_bases(array_count(pattern), gs_elements, gs_start) : gs_bases};
            const RequestStream stream(std::move(p));
            if (gs_out.empty() || gs_out == "-") {
                write_stream_csv(std::cout, stream, label);
            } else {
                if (fs::path(gs_out).has_parent_path()) fs::create_directories(fs::path(gs_out).parent_path());
                std::ofstream os(gs_out, std::ios::binary | std::ios::trunc);
                if (!os) throw Error("workload-gen", "cannot write " + gs_out);
                write_stream_csv(os, stream, label);
            }
            std::cerr << "[workload-gen] " << stream.size() << " requests\n";
        } else if (sim->parsed()) {
            const auto device = load_device_spec(sim_device);
            const auto mapping = load_mapping(sim_mapping);
            validate(mapping, device);
            const auto requests = parse_stream_csv(text::read_file(sim_stream, "workload-gen"), sim_stream);
            const auto trace = schedule(std::span<const Request>(requests), mapping, device);
            if (sim_check) {
                const auto v = check_timing(trace);
                if (!v.empty())
                    throw IllegalTrace("memctrl-sim", std::to_string(v.size()) + " violation(s); first: " + v.front().describe());
            }
            std::ostringstream os;
            write_trace(os, trace);
            emit(sim_out, os.str(), "memctrl-sim");
            if (!sim_stats.empty())
                text::write_file(sim_stats, stats_rows({{fs::path(sim_stream).stem().string(), reduce(trace)}}),
                                 "trace-stats");
            std::cerr << "[memctrl-sim] " << requests.size() << " requests -> " << trace.commands.size()
                      << " commands, end_cycle " << trace.end_cycle << "\n";
        } else if (stc->parsed()) {
            const auto device = load_device_spec(st_device);
            std::vector<NamedStats> rows;
            std::string kv;
            for (const auto& t : st_traces) {
                const auto trace = load_trace(t, device);
                rows.push_back({fs::path(t).stem().string(), reduce(trace, st_strict)});
                kv += "# " + rows.back().id + "\n" + stats_key_values(rows.back().stats);
            }
            emit(st_out, st_kv ? kv : stats_rows(rows), "trace-stats");
        } else if (en->parsed()) {
            const auto device = load_device_spec(en_device);
            const auto currents = en_currents.empty() ? datasheet_currents(device) : load_currents(en_currents);
            const auto rows = parse_stats_csv(text::read_file(en_stats, "trace-stats"), en_stats);
            std::ostringstream csv;
            csv << "benchmark,component,joules,percent\n";
            for (const auto& r : rows) {
                const auto bd = energy(r.stats, device, currents, en_allow_neg);
                const auto rep = breakdown_report(bd);
                std::cout << "== " << r.id << "\n" << breakdown_table(bd, rep);
                for (const auto& row : rep.rows)
                    csv << r.id << "," << row.component << "," << text::fmt_double(row.joules) << ","
                        << text::fmt_double(row.percent) << "\n";
            }
            if (!en_out.empty()) text::write_file(en_out, csv.str(), "power-model");
        } else if (me->parsed()) {
            if (!me_aggregate.empty()) {
                emit(me_out, aggregate_csv(aggregate_runs(me_aggregate)), "measurement");
            } else {
                if (me_series.empty()) throw EmptyRuns("measurement", "no --series files given");
                if (me_idle.empty() || me_window.empty() || me_id.empty() || me_device.empty())
                    throw ValidationError(kStage, "measure needs --idle, --window, --id and --device with --series");
                const auto device = load_device_spec(me_device);
                const auto idle = parse_window(me_idle, "--idle");
                const auto window = parse_window(me_window, "--window");
                std::vector<std::pair<MeasurementSeries, TimeWindow>> runs;
                double baseline = 0;
                for (const auto& f : me_series) {
                    auto s = load_series(f, me_sort);
                    s.dimms_per_channel = device.dimms_per_channel;
                    const auto b = static_baseline(s, idle, device.vdd);
                    std::fprintf(stderr, "[measurement] %s: static %.6f W, %.6f A per DIMM\n", f.c_str(), b.power_w,
                                 b.current_per_dimm_a);
                    baseline += b.power_w;
                    runs.emplace_back(std::move(s), window);
                }
                baseline /= static_cast<double>(me_series.size());
                const auto e = run_energy(me_id, runs, baseline);
                if (me_append && !me_out.empty() && fs::exists(me_out)) {
                    std::ofstream os(me_out, std::ios::app | std::ios::binary);
                    os << energies_csv_row(e);
                } else {
                    emit(me_out, energies_csv_header() + energies_csv_row(e), "measurement");
                }
            }
        } else if (im->parsed()) {
            const auto samples = parse_samples_csv(text::read_file(im_samples, "address-map"), im_samples);
            const auto res = infer_mapping(samples, parse_widths(im_widths), im_bits);
            std::cerr << "[address-map] sample rank " << res.rank << " of " << (im_bits + 1) << "\n";
            for (const auto& u : res.underdetermined)
                std::cerr << "[address-map] warning: " << coord_name(u.coord) << "." << u.bit << " has "
                          << u.free_variables << " free variable(s); set to 0\n";
            emit(im_out, serialize_mapping(res.mapping), "address-map");
        } else if (ca->parsed()) {
            const auto device = load_device_spec(ca_device);
            const auto stats = parse_stats_csv(text::read_file(ca_stats, "trace-stats"), ca_stats);
            const auto energies = parse_energies_csv(text::read_file(ca_energies, "measurement"), ca_energies);
            CalibrationOptions opts;
            opts.weighted = ca_weighted;
            opts.fit_intercept = !ca_no_intercept;
            opts.gross = ca_gross;
            const auto problem = build_problem(stats, energies, device, default_bounds(device), opts);
            for (const auto& w : problem.warnings) std::cerr << "[calibrate] warning: " << w << "\n";
            const auto res = calibrate(problem, opts);
            save_currents(ca_out, res.currents);
            const auto report = calibration_summary(res);
            std::cerr << report;
            if (!ca_report.empty()) text::write_file(ca_report, report, "calibrate");
        } else if (va->parsed()) {
            const auto device = load_device_spec(va_device);
            const auto currents = load_currents(va_currents);
            const fs::path dir = va_holdout;
            const auto stats = parse_stats_csv(text::read_file(dir / "stats.csv", "trace-stats"), (dir / "stats.csv").string());
            const auto energies =
                parse_energies_csv(text::read_file(dir / "energies.csv", "measurement"), (dir / "energies.csv").string());
            const auto rows = validate(currents, join_holdout(stats, energies), device, va_gross);
            emit(va_out, validation_csv(rows), "calibrate");
            for (const auto& r : rows)
                std::fprintf(stderr, "[calibrate] %-12s pre %.2f%%  post %.2f%%\n", r.id.c_str(), r.pre_error_pct,
                             r.post_error_pct);
        } else if (pl->parsed()) {
            auto cfg = tools::load_pipeline_config(pl_config);
            if (!pl_out.empty()) cfg.output_dir = pl_out;
            tools::run_pipeline(cfg, std::cerr);
        } else if (ep->parsed()) {
            tools::emit_plots(ep_dir);
            std::cerr << "[cli] wrote fig_breakdown.csv, fig_calibration.csv, fig_validation.csv, fig_static.csv\n";
        }
    } catch (const Error& e) {
        std::cerr << "dram-calib: error in stage '" << e.stage() << "': " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "dram-calib: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
