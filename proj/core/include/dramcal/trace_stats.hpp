#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dramcal/memctrl.hpp"

namespace dramcal {

struct BankStats {
    std::uint64_t n_act = 0;
    std::uint64_t n_pre = 0;
    std::uint64_t n_rd = 0;
    std::uint64_t n_wr = 0;
    Cycle open_cycles = 0;

    bool operator==(const BankStats&) const = default;
};

struct CommandStats {
    unsigned ranks = 1;
    std::uint64_t n_act = 0;
    std::uint64_t n_pre = 0;  // PREA counted once per bank it closes
    std::uint64_t n_rd = 0;
    std::uint64_t n_wr = 0;
    std::uint64_t n_ref = 0;
    Cycle c_total = 0;
    Cycle c_act_stdby = 0;  // rank-cycles with at least one open bank
    Cycle c_pre_stdby = 0;  // rank-cycles with every bank closed
    std::vector<BankStats> per_bank;  // diagnostics only, rank-major

    bool operator==(const CommandStats&) const = default;
};

// Streaming reducer; feed it commands in cycle order, then call finish().
//
// A bank counts as open from its ACT cycle (inclusive) to its PRE/PREA cycle
// (exclusive). REF blackout cycles count as precharge standby.
class StatsAccumulator : public CommandSink {
public:
    explicit StatsAccumulator(const DeviceSpec& device);

    void on_command(const Command& cmd) override;
    CommandStats finish(Cycle end_cycle);

private:
    void set_open(std::size_t bank_index, unsigned rank, bool open, Cycle at);

    DeviceSpec device_;
    CommandStats stats_;
    std::vector<bool> open_;
    std::vector<Cycle> open_since_;
    std::vector<unsigned> open_count_;  // per rank
    std::vector<Cycle> last_change_;    // per rank
    Cycle last_cycle_ = 0;
};

// Trace file: `<cycle>,<CMD>,<rank>,<bank_group>,<bank>` lines; `#` starts a
// comment. A `# end_cycle=N` comment sets the total simulated cycles;
// otherwise the end is where the last command's timing window closes.
CommandTrace parse_trace(std::string_view text, const DeviceSpec& device, const std::string& source_name = "<string>");
CommandTrace load_trace(const std::filesystem::path& path, const DeviceSpec& device);
void write_trace(std::ostream& os, const CommandTrace& trace);

// Throws IllegalTrace in strict mode when check_timing reports violations.
CommandStats reduce(const CommandTrace& trace, bool strict = false);

std::string stats_key_values(const CommandStats& stats);
// Header and rows are newline-terminated lines.
std::string stats_csv_header();
std::string stats_csv_row(std::string_view id, const CommandStats& stats);

struct NamedStats {
    std::string id;
    CommandStats stats;
};
std::vector<NamedStats> parse_stats_csv(std::string_view text, const std::string& source_name = "<string>");

}  // namespace dramcal
