#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "dramcal/address_map.hpp"
#include "dramcal/device_spec.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return DRAMCAL_SOURCE_DIR; }
inline std::filesystem::path configs_dir() { return source_dir() / "configs"; }

// Same values as configs/m393a1g43db0_cpb.json, built in code so unit tests
// do not depend on the file.
inline dramcal::DeviceSpec ddr4_device() {
    dramcal::DeviceSpec d;
    d.name = "test-ddr4-2133";
    d.ranks = 2;
    d.banks_per_rank = 16;
    d.bank_groups = 4;
    d.capacity_per_dimm = 8ULL << 30;
    d.dimms_per_channel = 2;
    d.vdd = 1.2;
    d.tck_ns = 0.9375;
    d.burst_length = 8;
    d.timings = {15, 15, 36, 51, 278, 8320, 4, 8, 16, 11, 15};
    d.idd = {0.060, 0.036, 0.048, 0.190, 0.170, 0.250};
    return d;
}

// Small random but valid device: timings drawn in plausible ranges, tRC
// forced to tRAS + tRP and tREFI long enough for the scheduler.
inline dramcal::DeviceSpec random_device(std::mt19937_64& rng) {
    auto pick = [&](unsigned lo, unsigned hi) { return std::uniform_int_distribution<unsigned>(lo, hi)(rng); };
    dramcal::DeviceSpec d = ddr4_device();
    d.name = "random";
    d.ranks = 1u << pick(0, 2);
    d.bank_groups = 1u << pick(0, 2);
    d.banks_per_rank = d.bank_groups << pick(0, 2);
    d.burst_length = pick(0, 1) ? 8 : 4;
    auto& t = d.timings;
    t.tRCD = pick(2, 20);
    t.tRP = pick(2, 20);
    t.tRAS = pick(t.tRCD + 1, 45);
    t.tRC = t.tRAS + t.tRP;
    t.tCCD = pick(d.burst_length / 2, 8);
    t.tRTP = pick(2, 10);
    t.tWR = pick(2, 20);
    t.tWL = pick(2, 14);
    t.tRL = pick(t.tWL, 20);
    t.tRFC = pick(20, 300);
    t.tREFI = t.tRFC + pick(900, 3000);
    return d;
}

inline dramcal::CoordWidths widths_for(const dramcal::DeviceSpec& d, unsigned row_bits, unsigned column_bits) {
    auto lg = [](unsigned v) {
        unsigned b = 0;
        while ((1u << b) < v) ++b;
        return b;
    };
    dramcal::CoordWidths w{};
    w[static_cast<std::size_t>(dramcal::Coord::Rank)] = lg(d.ranks);
    w[static_cast<std::size_t>(dramcal::Coord::BankGroup)] = lg(d.bank_groups);
    w[static_cast<std::size_t>(dramcal::Coord::Bank)] = lg(d.banks_per_rank / d.bank_groups);
    w[static_cast<std::size_t>(dramcal::Coord::Row)] = row_bits;
    w[static_cast<std::size_t>(dramcal::Coord::Column)] = column_bits;
    return w;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dramcal_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
