// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bvls_oracles.hpp"
#include "dramcal/address_map.hpp"
#include "dramcal/bvls.hpp"
#include "dramcal/calibrate.hpp"
#include "dramcal/error.hpp"
#include "dramcal/measurement.hpp"
#include "dramcal/memctrl.hpp"
#include "dramcal/power_model.hpp"
#include "dramcal/synthetic.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"
#include "support.hpp"

using namespace dramcal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

const DeviceSpec& shipped_device() {
    static const auto d = load_device_spec(testing::configs_dir() / "m393a1g43db0_cpb.json");
    return d;
}

const AddressMapping& shipped_mapping() {
    static const auto m = load_mapping(testing::configs_dir() / "ddr4_2rank.map");
    return m;
}

NamedStats simulate(const std::string& id, const AccessPattern& pattern, std::uint64_t elements, std::uint64_t stride) {
    StreamParams p{pattern, elements, stride, contiguous_bases(array_count(pattern), elements)};
    const RequestStream stream(std::move(p));
    StatsAccumulator acc(shipped_device());
    Scheduler s(shipped_mapping(), shipped_device(), acc);
    for (const auto& r : stream) s.submit(r);
    return {id, acc.finish(s.finish())};
}

std::vector<NamedStats> table1_kernels(std::uint64_t elements) {
    std::vector<NamedStats> out;
    for (auto k : kAllKernels) out.push_back(simulate(std::string(kernel_name(k)), access_pattern(k), elements, 64));
    return out;
}

double mean_error(const std::vector<ValidationRow>& rows, bool post) {
    double s = 0;
    for (const auto& r : rows) s += post ? r.post_error_pct : r.pre_error_pct;
    return s / static_cast<double>(rows.size());
}

// 1. Plant currents at 50-70% of datasheet with a small intercept and 1% noise.
// Every seed must calibrate to under 5% mean error.
Outcome synthetic_round_trip() {
    const auto t0 = Clock::now();
    const auto& d = shipped_device();
    const auto stats = table1_kernels(1'000'000);
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto rng = synth::derive_rng(seed, 0);
        auto truth = synth::plant_currents(d, 0.5, 0.7, 0.0, rng);
        double smallest = std::numeric_limits<double>::infinity();
        for (const auto& s : stats) smallest = std::min(smallest, synth::true_net_energy(s.stats, d, truth));
        truth.intercept_b = 0.005 * smallest;
        const auto energies = synth::noisy_energies(stats, d, truth, 0.01, rng);
        const auto r = calibrate(build_problem(stats, energies, d, default_bounds(d)));
        worst = std::max(worst, r.mean_rel_error_pct);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst < 5.0 && secs < 60.0;
    o.detail = "worst mean error over 20 seeds " + fmt("%.3f%%", worst) + ", " + fmt("%.2f s", secs);
    return o;
}

// 2. Planted at exactly half the datasheet values; held-out mixed workloads.
Outcome bias_correction() {
    const auto& d = shipped_device();
    const auto train = table1_kernels(1'000'000);
    std::vector<NamedStats> hold;
    for (const auto& [name, pattern] : synth::holdout_patterns()) hold.push_back(simulate(name, pattern, 1'000'000, 128));

    auto truth = synth::scale_currents(d, 0.5);
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& s : train) smallest = std::min(smallest, synth::true_net_energy(s.stats, d, truth));
    truth.intercept_b = 0.005 * smallest;
    synth::Rng rng(2024);
    const auto train_e = synth::noisy_energies(train, d, truth, 0.01, rng);
    const auto hold_e = synth::noisy_energies(hold, d, truth, 0.01, rng);
    const auto r = calibrate(build_problem(train, train_e, d, default_bounds(d)));
    const auto rows = validate(r.currents, join_holdout(hold, hold_e), d);

    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    bool pass = true;
    for (const auto& v : rows) {
        const double ratio = v.pre_model / v.measured;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        pass = pass && v.pre_error_pct > 30.0 && v.post_error_pct < 5.0;
    }
    Outcome o;
    o.pass = pass;
    o.detail = "pre/measured " + fmt("%.2f", lo) + ".." + fmt("%.2fx", hi) + ", mean error " +
               fmt("%.1f%%", mean_error(rows, false)) + " -> " + fmt("%.2f%%", mean_error(rows, true));
    return o;
}

// 3. KKT contract on random instances; 2-variable optimum against a grid scan.
Outcome bvls_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(314159);
    std::size_t kkt_fail = 0, grid_fail = 0, total = 0;
    double worst_gap = 0;
    for (auto [m, n] : {std::pair{3, 2}, {7, 5}, {20, 6}}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto p = testing::random_instance(m, n, rng, n != 2);
            const auto r = solve_bvls(p.a, p.y, p.bounds);
            ++total;
            if (!r.kkt.satisfied || !r.converged) ++kkt_fail;
            if (n == 2) {
                const double coarse = testing::grid_min_2d(p, 2000);
                const double exact = testing::exact_min_2d(p);
                double yy = 0;
                for (double v : p.y) yy += v * v;
                const double gap = (r.objective - exact) / std::max(exact, 1e-12 * yy);
                worst_gap = std::max(worst_gap, std::abs(gap));
                if (r.objective > coarse * (1 + 1e-6) + 1e-15 || std::abs(gap) > 1e-6) ++grid_fail;
            }
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = kkt_fail == 0 && grid_fail == 0 && secs < 10.0;
    o.detail = std::to_string(total - kkt_fail) + "/" + std::to_string(total) + " KKT ok, " +
               std::to_string(100 - grid_fail) + "/100 grid matches (worst rel gap " + fmt("%.1e", worst_gap) + "), " +
               fmt("%.2f s", secs);
    return o;
}

// 4. Linearity identity and a hand-computed single-row trace.
Outcome energy_linearity() {
    const auto& d = shipped_device();
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> cnt(0, 2'000'000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
        CommandStats s;
        s.ranks = d.ranks;
        s.n_act = cnt(rng) / 8;
        s.n_pre = s.n_act;
        s.n_rd = cnt(rng);
        s.n_wr = cnt(rng);
        s.n_ref = cnt(rng) / 4000;
        s.c_total = 10'000'000 + cnt(rng);
        s.c_act_stdby = std::uniform_int_distribution<std::uint64_t>(0, s.c_total * s.ranks)(rng);
        s.c_pre_stdby = s.c_total * s.ranks - s.c_act_stdby;
        const auto row = coefficients(s, d);
        for (int j = 0; j < 100; ++j) {
            CalibratedCurrents c{u(rng) * 0.1, u(rng) * 0.1, u(rng) * 0.05, u(rng) * 0.3, u(rng) * 0.3, u(rng) * 1e-4};
            worst = std::max(worst, testing::rel_diff(energy(s, d, c, true).e_total, row.predict(c)));
        }
    }

    // One ACT, one RD, one PREA on a single rank, closed at tRAS.
    auto d1 = d;
    d1.ranks = 1;
    const auto& tm = d1.timings;
    const Cycle prea = tm.tRAS, end = prea + tm.tRP;
    const std::string text = "0,ACT,0,0,0\n" + std::to_string(tm.tRCD) + ",RD,0,0,0\n" + std::to_string(prea) +
                             ",PREA,0,0,0\n# end_cycle=" + std::to_string(end) + "\n";
    const auto e = energy(reduce(parse_trace(text, d1), true), d1, datasheet_currents(d1));
    const double V = d1.vdd, tck = d1.tck_s();
    const auto& I = d1.idd;
    const double expect = V * tck * static_cast<double>(prea) * I.idd3n            // active standby
                          + V * tck * static_cast<double>(tm.tRP) * I.idd2n         // precharge standby
                          + V * (I.idd0 - I.idd3n) * static_cast<double>(tm.tRAS) * tck  // ACT
                          + V * (I.idd0 - I.idd2n) * static_cast<double>(tm.tRP) * tck   // PRE
                          + V * (I.idd4r - I.idd3n) * (d1.burst_length / 2.0) * tck;    // RD
    const double hand = testing::rel_diff(e.e_total, expect);

    Outcome o;
    o.pass = worst <= 1e-12 && hand <= 1e-12;
    o.detail = "2000 identity checks worst rel " + fmt("%.1e", worst) + ", hand trace rel " + fmt("%.1e", hand);
    return o;
}

// 5. Fuzzed request streams on random devices: legal, conserved, refreshed.
Outcome timing_legality() {
    std::mt19937_64 rng(55);
    std::size_t violations = 0, conservation = 0, ref_count = 0, refreshed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto d = testing::random_device(rng);
        const auto w = testing::widths_for(d, 5 + static_cast<unsigned>(rng() % 6), 3 + static_cast<unsigned>(rng() % 5));
        AddressMapping m = sequential_mapping(w);
        // Fold some row bits into bank bits to vary the conflict pattern.
        if (rng() & 1)
            for (auto& f : m[Coord::Bank]) f.mask |= m[Coord::Row][rng() % m[Coord::Row].size()].mask;
        const std::uint64_t span = 1ULL << m.address_bits;

        const auto n = std::uniform_int_distribution<int>(1, 3000)(rng);
        std::vector<Request> reqs;
        std::uint64_t cursor = (rng() % span) & ~63ULL;
        for (int i = 0; i < n; ++i) {
            const auto mode = rng() % 4;
            if (mode == 0) cursor = (rng() % span) & ~63ULL;                 // random jump
            else cursor = (cursor + 64 * (1 + rng() % 3)) % span;            // near-sequential
            reqs.push_back({(rng() % 3 == 0) ? RequestType::Write : RequestType::Read, cursor});
        }
        const auto t = schedule(std::span<const Request>(reqs), m, d);
        if (!check_timing(t).empty()) ++violations;
        const auto s = reduce(t);
        if (s.c_act_stdby + s.c_pre_stdby != s.c_total * s.ranks) ++conservation;
        const auto expected = static_cast<std::int64_t>(t.end_cycle / d.timings.tREFI);
        const auto per_rank = static_cast<std::int64_t>(s.n_ref / s.ranks);
        if (s.n_ref % s.ranks != 0 || std::abs(per_rank - expected) > 1) ++ref_count;
        refreshed += s.n_ref > 0;
    }
    Outcome o;
    o.pass = violations == 0 && conservation == 0 && ref_count == 0;
    o.detail = "1000 streams: " + std::to_string(violations) + " with violations, " + std::to_string(conservation) +
               " conservation failures, " + std::to_string(ref_count) + " refresh-count misses (" +
               std::to_string(refreshed) + " traces refreshed)";
    return o;
}

// 6. Plant-and-recover GF(2) mappings: 30 address bits, 1 rank + 4 bank bits.
Outcome mapping_inference() {
    std::mt19937_64 rng(66);
    CoordWidths w{};
    w[static_cast<std::size_t>(Coord::Rank)] = 1;
    w[static_cast<std::size_t>(Coord::Bank)] = 4;
    const std::uint64_t all = (1ULL << 30) - 1;
    std::size_t full_rank = 0, recovered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        AddressMapping planted;
        planted.address_bits = 30;
        for (auto c : {Coord::Rank, Coord::Bank})
            for (unsigned k = 0; k < w[static_cast<std::size_t>(c)]; ++k) planted[c].push_back({rng() & all, (rng() & 1) != 0});
        std::vector<Sample> samples;
        for (int i = 0; i < 256; ++i) {
            const auto a = rng() & all;
            samples.push_back({a, decompose(planted, a)});
        }
        if (sample_rank(samples, 30) != 31) continue;
        ++full_rank;
        const auto r = infer_mapping(samples, w, 30);
        recovered += r.mapping == planted && r.underdetermined.empty();
    }
    Outcome o;
    o.pass = full_rank == recovered && full_rank >= 49;
    o.detail = std::to_string(recovered) + "/" + std::to_string(full_rank) + " full-rank instances recovered exactly (" +
               std::to_string(50 - full_rank) + " rank deficient)";
    return o;
}

// 7. Integration accuracy and static baseline extraction.
Outcome measurement_integration() {
    MeasurementSeries flat;
    for (int i = 0; i <= 2000; ++i) flat.samples.push_back({i / 1000.0, 10.0});
    const double e_flat = integrate(flat, {0, 2});
    const bool flat_ok = std::abs(e_flat - 20.0) / 20.0 < 1e-3;

    MeasurementSeries ramp;
    for (int i = 0; i <= 1000; ++i) ramp.samples.push_back({i / 1000.0, 10.0 * i / 1000.0});
    const bool ramp_ok = testing::rel_diff(integrate(ramp, {0, 1}), 5.0) < 1e-12;

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 5);
    MeasurementSeries wiggle;
    for (int i = 0; i <= 500; ++i) wiggle.samples.push_back({i * 0.004, u(rng)});
    const double whole = integrate(wiggle, {0.0, 2.0});
    const double parts = integrate(wiggle, {0.0, 0.8}) + integrate(wiggle, {0.8, 2.0});
    const bool additive = testing::rel_diff(whole, parts) < 1e-12;

    std::normal_distribution<double> idle(0.3984, 0.02);
    MeasurementSeries quiet;
    quiet.dimms_per_channel = 2;
    const int n = 10000;
    for (int i = 0; i < n; ++i) quiet.samples.push_back({i * 1e-3, idle(rng)});
    const auto b = static_baseline(quiet, {0, (n - 1) * 1e-3}, 1.2);
    const double tol_a = 3 * 0.02 / std::sqrt(n) / (1.2 * 2);
    const bool baseline_ok = std::abs(b.current_per_dimm_a - 0.166) <= tol_a;

    Outcome o;
    o.pass = flat_ok && ramp_ok && additive && baseline_ok;
    o.detail = "10 W x 2 s = " + fmt("%.6f J", e_flat) + ", ramp " + (ramp_ok ? "exact" : "inexact") +
               ", additivity " + (additive ? "exact" : "broken") + ", baseline " +
               fmt("%.5f A/DIMM", b.current_per_dimm_a) + fmt(" (tol %.1e)", tol_a);
    return o;
}

// 8. Collinearity flag and exclusion of unexcited currents.
Outcome observability() {
    const Matrix dup{{1, 1, 0.5}, {2, 2, 0.1}, {3, 3, 0.9}, {4, 4, 0.3}};
    const auto diag = diagnose(dup);
    const bool flagged = std::any_of(diag.collinear.begin(), diag.collinear.end(), [&](auto pr) {
        return pr.first == 0 && pr.second == 1 && std::abs(diag.correlation[0][1]) > 0.99;
    });

    const auto& d = shipped_device();
    std::vector<NamedStats> reads;
    for (auto k : {KernelKind::Read}) reads.push_back(simulate(std::string(kernel_name(k)), access_pattern(k), 1 << 18, 64));
    reads.push_back(simulate("read2", {{0, RequestType::Read}, {1, RequestType::Read}}, 1 << 18, 64));
    reads.push_back(simulate("read3s", {{0, RequestType::Read}, {1, RequestType::Read}, {2, RequestType::Read}}, 1 << 18, 128));
    const auto truth = synth::scale_currents(d, 0.6);
    synth::Rng rng(8);
    const auto p = build_problem(reads, synth::noisy_energies(reads, d, truth, 0.0, rng), d, default_bounds(d));
    const auto r = calibrate(p);
    const bool excluded = p.excluded.size() == 1 && p.excluded[0] == Current::Wr && r.currents.i_wr == d.idd.idd4w;

    Outcome o;
    o.pass = flagged && excluded;
    o.detail = std::string("duplicate columns ") + (flagged ? "flagged" : "missed") + fmt(" (|corr| %.6f)", diag.correlation[0][1]) +
               ", write current " + (excluded ? "excluded at datasheet " : "not excluded, ") + fmt("%.3f A", r.currents.i_wr);
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"1 synthetic calibration round trip", synthetic_round_trip},
        {"2 bias correction on held-out workloads", bias_correction},
        {"3 BVLS solver correctness", bvls_correctness},
        {"4 energy model linearity", energy_linearity},
        {"5 timing legality and conservation", timing_legality},
        {"6 mapping inference", mapping_inference},
        {"7 measurement integration", measurement_integration},
        {"8 observability diagnostics", observability},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const Error& e) {
            o = {false, "error in stage '" + e.stage() + "': " + e.what()};
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
