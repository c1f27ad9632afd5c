#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dramcal/address_map.hpp"
#include "dramcal/device_spec.hpp"
#include "dramcal/workload.hpp"

namespace dramcal {

enum class CommandKind : std::uint8_t { ACT, PRE, PREA, RD, WR, REF };

std::string_view command_name(CommandKind k);
std::optional<CommandKind> command_from_name(std::string_view name);

struct Command {
    Cycle cycle = 0;
    CommandKind kind = CommandKind::ACT;
    unsigned rank = 0;
    unsigned bank_group = 0;
    unsigned bank = 0;         // index within the bank group
    std::uint64_t row = 0;     // ACT only
    std::uint64_t column = 0;  // RD/WR only

    bool operator==(const Command&) const = default;
};

struct CommandTrace {
    DeviceSpec device;
    std::vector<Command> commands;
    Cycle end_cycle = 0;  // total simulated cycles
};

// Cycle at which a command's own timing window closes (PRE/PREA: +tRP,
// RD: +tRL+BL/2, WR: +tWL+BL/2+tWR, REF: +tRFC, ACT: +tRCD).
Cycle completion_cycle(const Command& cmd, const DeviceSpec& device);
// Max completion over all commands (0 for an empty list).
Cycle natural_end_cycle(std::span<const Command> commands, const DeviceSpec& device);

class CommandSink {
public:
    virtual ~CommandSink() = default;
    virtual void on_command(const Command& cmd) = 0;
};

// In-order, open-page DDR4 command scheduler with all-bank refresh.
//
// Requests are serviced one at a time. A row stays open until a conflicting
// request or refresh closes it. Rank r is refreshed at cycles
// k*tREFI - (ranks-1-r), k >= 1, preceded by a PREA when banks are open;
// before each request the scheduler checks that servicing it still leaves
// time to close the rank before the next refresh slot.
class Scheduler {
public:
    Scheduler(const AddressMapping& mapping, const DeviceSpec& device, CommandSink& sink);

    // Throws MappingError if the address does not decompose or targets a
    // different channel than the first request.
    void submit(const Request& request);
    // Closes all banks and returns end_cycle.
    Cycle finish();

    std::uint64_t requests() const { return requests_; }

private:
    struct Bank {
        std::optional<std::uint64_t> open_row;
        std::int64_t last_act;
        std::int64_t last_pre;
        std::int64_t last_rd;
        std::int64_t last_wr;
    };
    struct RankState {
        std::int64_t last_col;
        std::int64_t blackout_end;
    };
    struct Snapshot {
        Bank bank;
        RankState rank;
        std::int64_t cursor;
        std::size_t pending;
    };

    std::int64_t act_ready(const Bank& b, unsigned rank, std::int64_t t) const;
    std::int64_t pre_ready(const Bank& b, std::int64_t t) const;
    std::int64_t col_ready(const Bank& b, unsigned rank, std::int64_t t) const;
    std::int64_t refresh_due(unsigned rank) const;
    bool refresh_feasible() const;
    void refresh();
    void stage(const Command& cmd);
    void flush();
    void close_rank(unsigned rank, std::int64_t at);

    const AddressMapping& mapping_;
    DeviceSpec device_;
    CommandSink& sink_;
    std::vector<Bank> banks_;
    std::vector<RankState> ranks_;
    std::vector<Command> pending_;
    std::int64_t cursor_ = 0;  // next free command-bus cycle
    std::uint64_t refresh_index_ = 1;
    std::optional<std::uint64_t> channel_;
    std::uint64_t requests_ = 0;
    Cycle end_ = 0;
    bool finished_ = false;
};

class TraceCollector : public CommandSink {
public:
    void on_command(const Command& cmd) override { commands.push_back(cmd); }
    std::vector<Command> commands;
};

// Writes `<cycle>,<CMD>,<rank>,<bank_group>,<bank>` lines.
class TraceWriter : public CommandSink {
public:
    explicit TraceWriter(std::ostream& os) : os_(os) {}
    void on_command(const Command& cmd) override;

private:
    std::ostream& os_;
};

class FanoutSink : public CommandSink {
public:
    explicit FanoutSink(std::vector<CommandSink*> sinks) : sinks_(std::move(sinks)) {}
    void on_command(const Command& cmd) override {
        for (auto* s : sinks_) s->on_command(cmd);
    }

private:
    std::vector<CommandSink*> sinks_;
};

CommandTrace schedule(const RequestStream& stream, const AddressMapping& mapping, const DeviceSpec& device);
CommandTrace schedule(std::span<const Request> requests, const AddressMapping& mapping, const DeviceSpec& device);

struct TimingViolation {
    std::string rule;
    std::size_t first_index = 0;  // earlier command (index into trace)
    std::size_t second_index = 0;
    Command first;
    Command second;
    std::int64_t deficit = 0;  // cycles missing

    std::string describe() const;
};

std::vector<TimingViolation> check_timing(const CommandTrace& trace);

}  // namespace dramcal
