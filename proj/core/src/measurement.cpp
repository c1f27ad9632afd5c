#include "dramcal/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "measurement";

void check_window(const MeasurementSeries& s, TimeWindow w) {
    if (s.samples.empty()) throw TooFewSamples(kStage, "series '" + s.channel + "' has no samples");
    if (!(w.t0 < w.t1) || w.t0 < s.samples.front().t || w.t1 > s.samples.back().t)
        throw WindowOutOfRange(kStage, "window [" + text::fmt_double(w.t0) + ", " + text::fmt_double(w.t1) +
                                           "] not inside series time range [" + text::fmt_double(s.samples.front().t) +
                                           ", " + text::fmt_double(s.samples.back().t) + "]");
}

// Index range of samples with t in [t0, t1].
std::pair<std::size_t, std::size_t> inside(const MeasurementSeries& s, TimeWindow w) {
    auto lo = std::lower_bound(s.samples.begin(), s.samples.end(), w.t0,
                               [](const PowerSample& p, double t) { return p.t < t; });
    auto hi = std::upper_bound(s.samples.begin(), s.samples.end(), w.t1,
                               [](double t, const PowerSample& p) { return t < p.t; });
    return {static_cast<std::size_t>(lo - s.samples.begin()), static_cast<std::size_t>(hi - s.samples.begin())};
}

double interpolate(const std::vector<PowerSample>& v, double t) {
    auto hi = std::lower_bound(v.begin(), v.end(), t, [](const PowerSample& p, double x) { return p.t < x; });
    if (hi == v.end()) return v.back().p;
    if (hi->t == t || hi == v.begin()) return hi->p;
    const auto lo = hi - 1;
    const double f = (t - lo->t) / (hi->t - lo->t);
    return lo->p + f * (hi->p - lo->p);
}

}  // namespace

void validate(const MeasurementSeries& s) {
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        if (!std::isfinite(s.samples[i].t) || !std::isfinite(s.samples[i].p))
            throw ValidationError(kStage, "non-finite sample in series '" + s.channel + "'");
        if (s.samples[i].p < 0) throw ValidationError(kStage, "negative power sample in series '" + s.channel + "'");
        if (i > 0 && !(s.samples[i].t > s.samples[i - 1].t))
            throw ValidationError(kStage, "timestamps not strictly increasing in series '" + s.channel + "'");
    }
}

double integrate(const MeasurementSeries& s, TimeWindow w) {
    check_window(s, w);
    const auto [lo, hi] = inside(s, w);
    if (hi - lo < 2) throw TooFewSamples(kStage, "fewer than 2 samples inside the integration window");

    double prev_t = w.t0;
    double prev_p = interpolate(s.samples, w.t0);
    double sum = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& sample = s.samples[i];
        if (sample.t <= prev_t) continue;
        if (sample.t >= w.t1) break;
        sum += 0.5 * (prev_p + sample.p) * (sample.t - prev_t);
        prev_t = sample.t;
        prev_p = sample.p;
    }
    sum += 0.5 * (prev_p + interpolate(s.samples, w.t1)) * (w.t1 - prev_t);
    return sum;
}

StaticBaseline static_baseline(const MeasurementSeries& s, TimeWindow w, double vdd) {
    check_window(s, w);
    if (!(vdd > 0)) throw ValidationError(kStage, "vdd must be > 0");
    if (s.dimms_per_channel == 0) throw ValidationError(kStage, "dimms_per_channel must be >= 1");
    const auto [lo, hi] = inside(s, w);
    const auto n = hi - lo;
    if (n < 2) throw TooFewSamples(kStage, "fewer than 2 samples inside the idle window");

    double mean = 0;
    for (std::size_t i = lo; i < hi; ++i) mean += s.samples[i].p;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (std::size_t i = lo; i < hi; ++i) ss += (s.samples[i].p - mean) * (s.samples[i].p - mean);

    StaticBaseline b;
    b.power_w = mean;
    b.current_per_dimm_a = mean / (vdd * s.dimms_per_channel);
    b.stddev_w = std::sqrt(ss / static_cast<double>(n - 1));
    b.samples = n;
    return b;
}

RunEnergy run_energy(std::string benchmark, const std::vector<std::pair<MeasurementSeries, TimeWindow>>& runs,
                     double baseline_w) {
    if (runs.empty()) throw EmptyRuns(kStage, "no runs for benchmark '" + benchmark + "'");
    RunEnergy e;
    e.benchmark = std::move(benchmark);
    e.n_runs = runs.size();
    std::vector<double> nets;
    for (const auto& [series, window] : runs) {
        const double gross = integrate(series, window);
        const double stat = baseline_w * window.length();
        e.gross_energy += gross;
        e.static_energy += stat;
        e.duration += window.length();
        nets.push_back(gross - stat);
    }
    const auto n = static_cast<double>(runs.size());
    e.gross_energy /= n;
    e.static_energy /= n;
    e.duration /= n;
    e.net_energy = e.gross_energy - e.static_energy;
    if (runs.size() > 1) {
        // Deviations are taken from the first run so identical runs give
        // exactly zero.
        double sum = 0, sum_sq = 0;
        for (double x : nets) {
            const double d = x - nets.front();
            sum += d;
            sum_sq += d * d;
        }
        e.stddev = std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)));
    }
    return e;
}

std::vector<AggregateRow> aggregate_runs(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NoFiles(kStage, dir.string() + " is not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    if (files.empty()) throw NoFiles(kStage, "no series files in " + dir.string());
    std::sort(files.begin(), files.end());

    std::map<std::tuple<std::string, unsigned, std::string>, std::pair<double, std::size_t>> groups;
    for (const auto& f : files) {
        const auto stem = f.stem().string();
        const auto parts = text::split(stem, '_');
        std::uint64_t threads = 0, run = 0;
        if (parts.size() < 4 || !text::parse_u64(parts[parts.size() - 3], threads) ||
            !text::parse_u64(parts[parts.size() - 1], run) || parts[parts.size() - 2].empty())
            throw NameConventionError(kStage, f.filename().string() + " does not match <bench>_<threads>_<channel>_<run>.csv");
        std::string bench;
        for (std::size_t i = 0; i + 3 < parts.size(); ++i) {
            if (i) bench += '_';
            bench += parts[i];
        }
        const auto series = load_series(f);
        if (series.samples.size() < 2) throw TooFewSamples(kStage, f.string() + " has fewer than 2 samples");
        const TimeWindow all{series.samples.front().t, series.samples.back().t};
        const double mean_power = integrate(series, all) / all.length();
        auto& g = groups[{bench, static_cast<unsigned>(threads), std::string(parts[parts.size() - 2])}];
        g.first += mean_power;
        ++g.second;
    }

    std::vector<AggregateRow> rows;
    for (const auto& [key, acc] : groups) {
        rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key),
                        acc.first / static_cast<double>(acc.second), acc.second});
    }
    return rows;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::ostringstream os;
    os << "benchmark,threads,channel,mean_power_w,files\n";
    for (const auto& r : rows)
        os << r.benchmark << "," << r.threads << "," << r.channel << "," << text::fmt_double(r.mean_power_w) << ","
           << r.files << "\n";
    return os.str();
}

MeasurementSeries parse_series_csv(std::string_view text_in, const std::string& source, bool sort) {
    MeasurementSeries s;
    text::LineReader reader(text_in);
    std::string_view line;
    bool header = false;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != "timestamp_s,power_w") throw ParseError(kStage, source, ln, "expected header 'timestamp_s,power_w'");
            header = true;
            continue;
        }
        const auto f = text::split(line, ',');
        PowerSample p;
        if (f.size() != 2 || !text::parse_double(f[0], p.t) || !text::parse_double(f[1], p.p) || !std::isfinite(p.t) ||
            !std::isfinite(p.p))
            throw ParseError(kStage, source, ln, "expected <timestamp_s>,<power_w>");
        if (p.p < 0) throw ParseError(kStage, source, ln, "negative power");
        if (!sort && !s.samples.empty() && !(p.t > s.samples.back().t))
            throw ParseError(kStage, source, ln, "timestamps must be strictly increasing");
        s.samples.push_back(p);
    }
    if (!header) throw ParseError(kStage, source, 0, "missing header");
    if (sort) {
        std::stable_sort(s.samples.begin(), s.samples.end(),
                         [](const PowerSample& a, const PowerSample& b) { return a.t < b.t; });
        for (std::size_t i = 1; i < s.samples.size(); ++i) {
            if (s.samples[i].t == s.samples[i - 1].t) throw ParseError(kStage, source, 0, "duplicate timestamp");
        }
    }
    return s;
}

MeasurementSeries load_series(const std::filesystem::path& path, bool sort) {
    return parse_series_csv(text::read_file(path, kStage), path.string(), sort);
}

std::string series_csv(const MeasurementSeries& s) {
    std::ostringstream os;
    os << "timestamp_s,power_w\n";
    for (const auto& p : s.samples) os << text::fmt_double(p.t) << "," << text::fmt_double(p.p) << "\n";
    return os.str();
}

std::string energies_csv_header() {
    return "benchmark,gross_energy_j,static_energy_j,net_energy_j,duration_s,n_runs,stddev_j\n";
}

std::string energies_csv_row(const RunEnergy& e) {
    std::ostringstream os;
    os << e.benchmark << "," << text::fmt_double(e.gross_energy) << "," << text::fmt_double(e.static_energy) << ","
       << text::fmt_double(e.net_energy) << "," << text::fmt_double(e.duration) << "," << e.n_runs << ","
       << text::fmt_double(e.stddev) << "\n";
    return os.str();
}

std::vector<RunEnergy> parse_energies_csv(std::string_view text_in, const std::string& source) {
    std::vector<RunEnergy> out;
    text::LineReader reader(text_in);
    std::string_view line;
    bool header = false;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != text::trim(energies_csv_header()))
                throw ParseError(kStage, source, ln,
                                 "expected header '" + std::string(text::trim(energies_csv_header())) + "'");
            header = true;
            continue;
        }
        const auto f = text::split(line, ',');
        if (f.size() != 7) throw ParseError(kStage, source, ln, "expected 7 columns");
        RunEnergy e;
        e.benchmark = std::string(text::trim(f[0]));
        std::uint64_t runs = 0;
        if (!text::parse_double(f[1], e.gross_energy) || !text::parse_double(f[2], e.static_energy) ||
            !text::parse_double(f[3], e.net_energy) || !text::parse_double(f[4], e.duration) ||
            !text::parse_u64(f[5], runs) || !text::parse_double(f[6], e.stddev))
            throw ParseError(kStage, source, ln, "bad numeric field");
        if (!std::isfinite(e.net_energy) || !std::isfinite(e.gross_energy) || !std::isfinite(e.static_energy))
            throw ParseError(kStage, source, ln, "energy values must be finite");
        if (e.stddev < 0) throw ParseError(kStage, source, ln, "stddev must be >= 0");
        e.n_runs = runs;
        out.push_back(std::move(e));
    }
    if (!header) throw ParseError(kStage, source, 0, "missing header");
    return out;
}

}  // namespace dramcal
