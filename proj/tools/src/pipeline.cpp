#include "dramcal_tools/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dramcal/address_map.hpp"
#include "dramcal/error.hpp"
#include "dramcal/measurement.hpp"
#include "dramcal/memctrl.hpp"
#include "dramcal/power_model.hpp"
#include "dramcal/synthetic.hpp"
#include "dramcal/text_io.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"

namespace dramcal::tools {

namespace {

using json = nlohmann::json;

constexpr const char* kStage = "cli";

void require_known(const json& obj, std::initializer_list<const char*> keys, const std::string& where,
                   const std::string& source) {
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
            throw ParseError(kStage, source, 0, "unknown key '" + k + "' in " + where);
    }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, const std::string& source) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(kStage, source, 0, std::string("bad value for '") + key + "'");
    }
}

struct Workload {
    std::string id;
    AccessPattern pattern;
    std::uint64_t stride = kLineBytes;
};

struct Simulated {
    CommandStats stats;
    std::uint64_t requests = 0;
};

// Runs fn(i) for i in [0, n) on a small thread pool. Each index writes only
// its own output slot, so the result does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, unsigned workers, F fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(kStage, "cannot write " + path.string());
    return os;
}

Simulated simulate(const Workload& w, const PipelineConfig& cfg, const DeviceSpec& device,
                   const AddressMapping& mapping, const fs::path& dir) {
    StreamParams params;
    params.pattern = cfg.rfo ? with_rfo(w.pattern) : w.pattern;
    params.array_len = cfg.elements;
    params.stride = w.stride;
    params.bases = contiguous_bases(array_count(params.pattern), cfg.elements);
    const RequestStream stream(std::move(params));

    if (cfg.write_streams) {
        auto os = open_out(dir / "streams" / (w.id + ".csv"));
        write_stream_csv(os, stream, w.id);
    }

    auto trace_os = open_out(dir / "traces" / (w.id + ".trace"));
    TraceWriter writer(trace_os);
    StatsAccumulator acc(device);
    TraceCollector collector;
    std::vector<CommandSink*> sinks{&writer, &acc};
    if (cfg.strict_timing) sinks.push_back(&collector);
    FanoutSink fanout(sinks);
    Scheduler scheduler(mapping, device, fanout);
    for (const auto& r : stream) scheduler.submit(r);
    const Cycle end = scheduler.finish();
    trace_os << "# end_cycle=" << end << "\n";
    if (!trace_os) throw Error(kStage, "failed writing trace for " + w.id);

    if (cfg.strict_timing) {
        const CommandTrace trace{device, std::move(collector.commands), end};
        const auto violations = check_timing(trace);
        if (!violations.empty())
            throw IllegalTrace("memctrl-sim", w.id + ": " + std::to_string(violations.size()) +
                                                  " timing violation(s); first: " + violations.front().describe());
    }

    Simulated out;
    out.stats = acc.finish(end);
    out.requests = stream.size();
    text::write_file(dir / "stats" / (w.id + ".csv"), stats_csv_header() + stats_csv_row(w.id, out.stats), kStage);
    const auto bd = energy(out.stats, device, datasheet_currents(device), true);
    text::write_file(dir / "breakdown" / (w.id + ".csv"), breakdown_csv(breakdown_report(bd)), kStage);
    return out;
}

struct StaticRow {
    std::string run;
    StaticBaseline baseline;
};

// Synthesizes the runs of one benchmark as power series files, then reads
// them back through the measurement path.
RunEnergy measure_synthetic(const std::string& id, const CommandStats& stats, const DeviceSpec& device,
                            const CalibratedCurrents& truth, const SyntheticConfig& sc, synth::Rng& rng,
                            const fs::path& dir, std::vector<StaticRow>& static_rows) {
    synth::RunPlan plan;
    plan.baseline_w = sc.baseline_w;
    plan.sample_noise_w = sc.sample_noise_w;
    plan.run_noise = sc.run_noise;
    plan.runs = sc.runs;
    plan.samples_per_window = sc.samples_per_window;
    if (plan.runs == 0) throw EmptyRuns("measurement", "synthetic.runs must be positive");

    const double duration = static_cast<double>(stats.c_total) * device.tck_s();
    const double net = synth::true_net_energy(stats, device, truth);
    std::normal_distribution<double> rel(0.0, sc.run_noise);

    std::vector<std::pair<MeasurementSeries, TimeWindow>> runs;
    double baseline_sum = 0;
    for (std::size_t r = 0; r < plan.runs; ++r) {
        const double run_net = net * (1.0 + (sc.run_noise > 0 ? rel(rng) : 0.0));
        const auto run = synth::synthesize_run(duration, run_net, plan, rng);
        const auto name = id + "_1_AB_" + std::to_string(r + 1);
        const auto path = dir / (name + ".csv");
        text::write_file(path, series_csv(run.series), kStage);

        auto series = load_series(path);
        series.dimms_per_channel = device.dimms_per_channel;
        const auto base = static_baseline(series, run.idle, device.vdd);
        baseline_sum += base.power_w;
        static_rows.push_back({name, base});
        runs.emplace_back(std::move(series), run.run);
    }
    return run_energy(id, runs, baseline_sum / static_cast<double>(plan.runs));
}

std::string stats_table(const std::vector<NamedStats>& rows) {
    std::string out = stats_csv_header();
    for (const auto& r : rows) out += stats_csv_row(r.id, r.stats);
    return out;
}

std::string energies_table(const std::vector<RunEnergy>& rows) {
    std::string out = energies_csv_header();
    for (const auto& r : rows) out += energies_csv_row(r);
    return out;
}

double mean_of(const std::vector<ValidationRow>& rows, bool post) {
    if (rows.empty()) return 0;
    double s = 0;
    for (const auto& r : rows) s += post ? r.post_error_pct : r.pre_error_pct;
    return s / static_cast<double>(rows.size());
}

std::string summary_csv(const PipelineSummary& s) {
    std::ostringstream os;
    os << "set,benchmark,measured_j,precal_model_j,postcal_model_j,precal_error_pct,postcal_error_pct\n";
    auto emit = [&](const char* set, const std::vector<ValidationRow>& rows) {
        for (const auto& r : rows)
            os << set << "," << r.id << "," << text::fmt_double(r.measured) << "," << text::fmt_double(r.pre_model)
               << "," << text::fmt_double(r.post_model) << "," << text::fmt_double(r.pre_error_pct) << ","
               << text::fmt_double(r.post_error_pct) << "\n";
    };
    emit("training", s.training);
    emit("holdout", s.holdout);
    os << "training,mean,,,," << text::fmt_double(s.train_pre_error_pct) << ","
       << text::fmt_double(s.train_post_error_pct) << "\n";
    if (!s.holdout.empty())
        os << "holdout,mean,,,," << text::fmt_double(s.holdout_pre_error_pct) << ","
           << text::fmt_double(s.holdout_post_error_pct) << "\n";
    return os.str();
}

std::string summary_text(const PipelineSummary& s, const DeviceSpec& device) {
    std::ostringstream os;
    char buf[200];
    os << "device: " << device.name << "\n\n";
    os << calibration_summary(s.calibration) << "\n";
    const auto ds = datasheet_currents(device);
    os << "current      datasheet      calibrated" << (s.truth ? "     planted" : "") << "\n";
    for (auto c : kAllCurrents) {
        std::snprintf(buf, sizeof(buf), "%-10s %12.6e %14.6e", std::string(current_name(c)).c_str(), ds[c],
                      s.calibration.currents[c]);
        os << buf;
        if (s.truth) {
            std::snprintf(buf, sizeof(buf), " %12.6e", (*s.truth)[c]);
            os << buf;
        }
        os << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%-10s %12s %14.6e", "b (J)", "-", s.calibration.currents.intercept_b);
    os << buf;
    if (s.truth) {
        std::snprintf(buf, sizeof(buf), " %12.6e", s.truth->intercept_b);
        os << buf;
    }
    os << "\n\n";
    std::snprintf(buf, sizeof(buf), "training: mean error %.3f%% before calibration, %.3f%% after\n",
                  s.train_pre_error_pct, s.train_post_error_pct);
    os << buf;
    if (!s.holdout.empty()) {
        std::snprintf(buf, sizeof(buf), "holdout:  mean error %.3f%% before calibration, %.3f%% after\n",
                      s.holdout_pre_error_pct, s.holdout_post_error_pct);
        os << buf;
    }
    return os.str();
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir,
                                     const std::string& source) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(kStage, source, 0, e.what());
    }
    if (!root.is_object()) throw ParseError(kStage, source, 0, "pipeline config must be a JSON object");
    require_known(root,
                  {"device", "mapping", "kernels", "elements", "stride", "output_dir", "measurement_dir", "flags",
                   "seed", "synthetic", "workers"},
                  "config", source);

    PipelineConfig cfg;
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    if (!root.contains("device") || !root.contains("mapping"))
        throw ParseError(kStage, source, 0, "config needs 'device' and 'mapping'");
    std::string s;
    read_opt(root, "device", s, source);
    cfg.device = resolve(s);
    read_opt(root, "mapping", s, source);
    cfg.mapping = resolve(s);
    if (root.contains("measurement_dir")) {
        read_opt(root, "measurement_dir", s, source);
        cfg.measurement_dir = resolve(s);
    }
    if (root.contains("output_dir")) {
        read_opt(root, "output_dir", s, source);
        cfg.output_dir = s;
    }

    std::vector<std::string> kernels;
    read_opt(root, "kernels", kernels, source);
    if (kernels.empty() || (kernels.size() == 1 && kernels[0] == "all")) {
        kernels.clear();
        for (auto k : kAllKernels) kernels.emplace_back(kernel_name(k));
    }
    for (const auto& k : kernels)
        if (!kernel_from_name(k)) throw ParseError(kStage, source, 0, "unknown kernel '" + k + "'");
    cfg.kernels = kernels;

    read_opt(root, "elements", cfg.elements, source);
    read_opt(root, "stride", cfg.stride, source);
    read_opt(root, "seed", cfg.seed, source);
    read_opt(root, "workers", cfg.workers, source);
    if (cfg.elements == 0) throw ParseError(kStage, source, 0, "'elements' must be positive");

    if (root.contains("flags")) {
        const auto& f = root.at("flags");
        require_known(f, {"rfo", "weighted", "no_intercept", "gross", "strict_timing", "holdout", "write_streams"},
                      "flags", source);
        read_opt(f, "rfo", cfg.rfo, source);
        read_opt(f, "weighted", cfg.weighted, source);
        read_opt(f, "no_intercept", cfg.no_intercept, source);
        read_opt(f, "gross", cfg.gross, source);
        read_opt(f, "strict_timing", cfg.strict_timing, source);
        read_opt(f, "holdout", cfg.holdout, source);
        read_opt(f, "write_streams", cfg.write_streams, source);
    }
    if (root.contains("synthetic")) {
        const auto& sy = root.at("synthetic");
        require_known(sy,
                      {"planted_lo", "planted_hi", "intercept_fraction", "run_noise", "sample_noise_w", "baseline_w",
                       "runs", "samples_per_window"},
                      "synthetic", source);
        auto& sc = cfg.synthetic;
        read_opt(sy, "planted_lo", sc.planted_lo, source);
        read_opt(sy, "planted_hi", sc.planted_hi, source);
        read_opt(sy, "intercept_fraction", sc.intercept_fraction, source);
        read_opt(sy, "run_noise", sc.run_noise, source);
        read_opt(sy, "sample_noise_w", sc.sample_noise_w, source);
        read_opt(sy, "baseline_w", sc.baseline_w, source);
        read_opt(sy, "runs", sc.runs, source);
        read_opt(sy, "samples_per_window", sc.samples_per_window, source);
    }
    return cfg;
}

void apply_seed_override(PipelineConfig& cfg) {
    const char* env = std::getenv("DRAM_CALIB_SEED");
    if (!env || !*env) return;
    std::uint64_t v = 0;
    if (!text::parse_u64(env, v)) throw ValidationError(kStage, std::string("DRAM_CALIB_SEED is not an integer: ") + env);
    cfg.seed = v;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    auto cfg = parse_pipeline_config(text::read_file(path, kStage), path.parent_path(), path.string());
    apply_seed_override(cfg);
    return cfg;
}

PipelineSummary run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t_start).count(); };

    const auto device = load_device_spec(cfg.device);
    const auto mapping = load_mapping(cfg.mapping);
    validate(mapping, device);
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);

    std::vector<Workload> train;
    for (const auto& k : cfg.kernels) train.push_back({k, access_pattern(*kernel_from_name(k)), cfg.stride});
    std::vector<Workload> hold;
    if (cfg.holdout) {
        const auto bytes = cfg.elements * kElementBytes;
        const auto stride = bytes % (2 * cfg.stride) == 0 ? 2 * cfg.stride : cfg.stride;
        for (auto& [name, pattern] : synth::holdout_patterns()) hold.push_back({name, pattern, stride});
    }

    std::vector<const Workload*> all;
    std::vector<fs::path> dirs;
    for (const auto& w : train) all.push_back(&w), dirs.push_back(out);
    for (const auto& w : hold) all.push_back(&w), dirs.push_back(out / "holdout");

    std::vector<Simulated> sims(all.size());
    parallel_for(all.size(), cfg.workers,
                 [&](std::size_t i) { sims[i] = simulate(*all[i], cfg, device, mapping, dirs[i]); });
    char buf[160];
    for (std::size_t i = 0; i < all.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "[memctrl-sim] %-10s %9llu requests, %10llu cycles\n", all[i]->id.c_str(),
                      static_cast<unsigned long long>(sims[i].requests),
                      static_cast<unsigned long long>(sims[i].stats.c_total));
        log << buf;
    }

    std::vector<NamedStats> train_stats, hold_stats;
    for (std::size_t i = 0; i < all.size(); ++i)
        (i < train.size() ? train_stats : hold_stats).push_back({all[i]->id, sims[i].stats});
    text::write_file(out / "stats.csv", stats_table(train_stats), kStage);
    if (!hold_stats.empty()) text::write_file(out / "holdout" / "stats.csv", stats_table(hold_stats), kStage);

    PipelineSummary summary;
    std::vector<RunEnergy> train_energy, hold_energy;
    std::vector<StaticRow> static_rows;
    if (cfg.measurement_dir) {
        const auto& md = *cfg.measurement_dir;
        train_energy = parse_energies_csv(text::read_file(md / "energies.csv", "measurement"),
                                          (md / "energies.csv").string());
        if (!hold_stats.empty()) {
            const auto hp = md / "holdout" / "energies.csv";
            if (fs::exists(hp)) {
                hold_energy = parse_energies_csv(text::read_file(hp, "measurement"), hp.string());
            } else {
                log << "[measurement] no holdout energies in " << md.string() << "; skipping holdout\n";
                hold_stats.clear();
            }
        }
        log << "[measurement] read energies from " << md.string() << "\n";
    } else {
        auto truth_rng = synth::derive_rng(cfg.seed, 0);
        auto truth = synth::plant_currents(device, cfg.synthetic.planted_lo, cfg.synthetic.planted_hi, 0.0, truth_rng);
        double smallest = std::numeric_limits<double>::infinity();
        for (const auto& s : train_stats)
            smallest = std::min(smallest, synth::true_net_energy(s.stats, device, truth));
        truth.intercept_b = cfg.synthetic.intercept_fraction * smallest;
        summary.truth = truth;

        std::vector<RunEnergy> energies(all.size());
        std::vector<std::vector<StaticRow>> statics(all.size());
        const auto mdir = out / "measurements";
        parallel_for(all.size(), cfg.workers, [&](std::size_t i) {
            auto rng = synth::derive_rng(cfg.seed, i + 1);
            energies[i] = measure_synthetic(all[i]->id, sims[i].stats, device, truth, cfg.synthetic, rng, mdir,
                                            statics[i]);
        });
        for (std::size_t i = 0; i < all.size(); ++i) {
            (i < train.size() ? train_energy : hold_energy).push_back(energies[i]);
            for (auto& r : statics[i]) static_rows.push_back(std::move(r));
        }
        save_currents(out / "truth.txt", truth);
        log << "[measurement] synthesized " << static_rows.size() << " power series (seed " << cfg.seed << ")\n";
    }
    text::write_file(out / "energies.csv", energies_table(train_energy), kStage);
    if (!hold_energy.empty())
        text::write_file(out / "holdout" / "energies.csv", energies_table(hold_energy), kStage);
    {
        std::ostringstream os;
        os << "run,channel,static_power_w,current_per_dimm_a,stddev_w,samples\n";
        for (const auto& r : static_rows)
            os << r.run << ",AB," << text::fmt_double(r.baseline.power_w) << ","
               << text::fmt_double(r.baseline.current_per_dimm_a) << "," << text::fmt_double(r.baseline.stddev_w)
               << "," << r.baseline.samples << "\n";
        text::write_file(out / "static.csv", os.str(), kStage);
    }

    CalibrationOptions opts;
    opts.fit_intercept = !cfg.no_intercept;
    opts.weighted = cfg.weighted;
    opts.gross = cfg.gross;
    const auto problem = build_problem(train_stats, train_energy, device, default_bounds(device), opts);
    for (const auto& w : problem.warnings) log << "[calibrate] warning: " << w << "\n";
    summary.calibration = calibrate(problem, opts);
    save_currents(out / "currents.txt", summary.calibration.currents);
    text::write_file(out / "calibration.txt", calibration_summary(summary.calibration), kStage);
    text::write_file(out / "calibration.csv", calibration_csv(summary.calibration), kStage);

    summary.training = validate(summary.calibration.currents, join_holdout(train_stats, train_energy), device, cfg.gross);
    text::write_file(out / "fit.csv", validation_csv(summary.training), kStage);
    if (!hold_stats.empty())
        summary.holdout = validate(summary.calibration.currents, join_holdout(hold_stats, hold_energy), device, cfg.gross);
    text::write_file(out / "validation.csv",
                     validation_csv(summary.holdout.empty() ? summary.training : summary.holdout), kStage);

    summary.train_pre_error_pct = mean_of(summary.training, false);
    summary.train_post_error_pct = mean_of(summary.training, true);
    summary.holdout_pre_error_pct = mean_of(summary.holdout, false);
    summary.holdout_post_error_pct = mean_of(summary.holdout, true);
    text::write_file(out / "summary.csv", summary_csv(summary), kStage);
    text::write_file(out / "summary.txt", summary_text(summary, device), kStage);

    std::snprintf(buf, sizeof(buf), "[calibrate] mean error %.3f%% -> %.3f%% (training)", summary.train_pre_error_pct,
                  summary.train_post_error_pct);
    log << buf;
    if (!summary.holdout.empty()) {
        std::snprintf(buf, sizeof(buf), ", %.3f%% -> %.3f%% (holdout)", summary.holdout_pre_error_pct,
                      summary.holdout_post_error_pct);
        log << buf;
    }
    std::snprintf(buf, sizeof(buf), "\n[pipeline] done in %.2f s, artifacts in %s\n", elapsed(), out.string().c_str());
    log << buf;
    return summary;
}

}  // namespace dramcal::tools
