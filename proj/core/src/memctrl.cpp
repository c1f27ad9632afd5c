#include "dramcal/memctrl.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dramcal/error.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "memctrl-sim";
constexpr std::int64_t kNever = -(std::int64_t{1} << 40);

std::int64_t as_i64(Cycle c) { return static_cast<std::int64_t>(c); }

}  // namespace

std::string_view command_name(CommandKind k) {
    switch (k) {
        case CommandKind::ACT: return "ACT";
        case CommandKind::PRE: return "PRE";
        case CommandKind::PREA: return "PREA";
        case CommandKind::RD: return "RD";
        case CommandKind::WR: return "WR";
        case CommandKind::REF: return "REF";
    }
    return "?";
}

std::optional<CommandKind> command_from_name(std::string_view name) {
    for (auto k : {CommandKind::ACT, CommandKind::PRE, CommandKind::PREA, CommandKind::RD, CommandKind::WR,
                   CommandKind::REF}) {
        if (command_name(k) == name) return k;
    }
    return std::nullopt;
}

Cycle completion_cycle(const Command& cmd, const DeviceSpec& d) {
    const auto& t = d.timings;
    switch (cmd.kind) {
        case CommandKind::ACT: return cmd.cycle + t.tRCD;
        case CommandKind::PRE:
        case CommandKind::PREA: return cmd.cycle + t.tRP;
        case CommandKind::RD: return cmd.cycle + t.tRL + d.burst_cycles();
        case CommandKind::WR: return cmd.cycle + d.write_to_precharge();
        case CommandKind::REF: return cmd.cycle + t.tRFC;
    }
    return cmd.cycle + 1;
}

Cycle natural_end_cycle(std::span<const Command> commands, const DeviceSpec& device) {
    Cycle end = 0;
    for (const auto& c : commands) end = std::max(end, completion_cycle(c, device));
    return end;
}

Scheduler::Scheduler(const AddressMapping& mapping, const DeviceSpec& device, CommandSink& sink)
    : mapping_(mapping), device_(device), sink_(sink) {
    validate(device_);
    validate(mapping_);
    banks_.assign(static_cast<std::size_t>(device_.ranks) * device_.banks_per_rank,
                  Bank{std::nullopt, kNever, kNever, kNever, kNever});
    ranks_.assign(device_.ranks, RankState{kNever, kNever});
}

std::int64_t Scheduler::act_ready(const Bank& b, unsigned rank, std::int64_t t) const {
    const auto& tm = device_.timings;
    return std::max({t, b.last_pre + as_i64(tm.tRP), b.last_act + as_i64(tm.tRC), ranks_[rank].blackout_end});
}

std::int64_t Scheduler::pre_ready(const Bank& b, std::int64_t t) const {
    const auto& tm = device_.timings;
    return std::max({t, b.last_act + as_i64(tm.tRAS), b.last_rd + as_i64(tm.tRTP),
                     b.last_wr + as_i64(device_.write_to_precharge())});
}

std::int64_t Scheduler::col_ready(const Bank& b, unsigned rank, std::int64_t t) const {
    const auto& tm = device_.timings;
    return std::max({t, b.last_act + as_i64(tm.tRCD), ranks_[rank].last_col + as_i64(tm.tCCD),
                     ranks_[rank].blackout_end});
}

std::int64_t Scheduler::refresh_due(unsigned rank) const {
    return as_i64(refresh_index_ * device_.timings.tREFI) - as_i64(device_.ranks - 1 - rank);
}

bool Scheduler::refresh_feasible() const {
    const auto tRP = as_i64(device_.timings.tRP);
    std::int64_t t = cursor_;
    for (unsigned r = 0; r < device_.ranks; ++r) {
        const auto first = static_cast<std::size_t>(r) * device_.banks_per_rank;
        std::int64_t prea = kNever;
        std::int64_t ready = ranks_[r].blackout_end;
        for (std::size_t i = first; i < first + device_.banks_per_rank; ++i) {
            const auto& b = banks_[i];
            if (b.open_row) prea = std::max(prea, pre_ready(b, t));
            else ready = std::max(ready, b.last_pre + tRP);
        }
        if (prea != kNever) {
            t = prea + 1;
            ready = std::max(ready, prea + tRP);
        }
        if (ready > refresh_due(r)) return false;
    }
    return t <= refresh_due(0);
}

void Scheduler::close_rank(unsigned rank, std::int64_t at) {
    const auto first = static_cast<std::size_t>(rank) * device_.banks_per_rank;
    for (std::size_t i = first; i < first + device_.banks_per_rank; ++i) {
        if (banks_[i].open_row) {
            banks_[i].open_row.reset();
            banks_[i].last_pre = at;
        }
    }
}

void Scheduler::refresh() {
    const auto tRP = as_i64(device_.timings.tRP);
    std::vector<std::int64_t> ready(device_.ranks);
    for (unsigned r = 0; r < device_.ranks; ++r) {
        const auto first = static_cast<std::size_t>(r) * device_.banks_per_rank;
        std::int64_t prea = kNever;
        ready[r] = ranks_[r].blackout_end;
        for (std::size_t i = first; i < first + device_.banks_per_rank; ++i) {
            const auto& b = banks_[i];
            if (b.open_row) prea = std::max(prea, pre_ready(b, cursor_));
            else ready[r] = std::max(ready[r], b.last_pre + tRP);
        }
        if (prea != kNever) {
            stage(Command{static_cast<Cycle>(prea), CommandKind::PREA, r, 0, 0, 0, 0});
            close_rank(r, prea);
            ready[r] = std::max(ready[r], prea + tRP);
        }
    }
    for (unsigned r = 0; r < device_.ranks; ++r) {
        const auto at = std::max({refresh_due(r), ready[r], cursor_});
        stage(Command{static_cast<Cycle>(at), CommandKind::REF, r, 0, 0, 0, 0});
        ranks_[r].blackout_end = at + as_i64(device_.timings.tRFC);
    }
    ++refresh_index_;
    flush();
}

void Scheduler::stage(const Command& cmd) {
    pending_.push_back(cmd);
    cursor_ = as_i64(cmd.cycle) + 1;
}

void Scheduler::flush() {
    for (const auto& c : pending_) {
        end_ = std::max(end_, completion_cycle(c, device_));
        sink_.on_command(c);
    }
    pending_.clear();
}

void Scheduler::submit(const Request& request) {
    if (finished_) throw Error(kStage, "submit after finish");
    DramCoord coord;
    try {
        coord = decompose(mapping_, request.address);
    } catch (const AddressOutOfRange& e) {
        throw MappingError(kStage, e.what());
    }
    if (!channel_) channel_ = coord.channel;
    if (coord.channel != *channel_)
        throw MappingError(kStage, "request to channel " + std::to_string(coord.channel) + " in a trace for channel " +
                                       std::to_string(*channel_));
    if (coord.rank >= device_.ranks || coord.bank_group >= device_.bank_groups ||
        coord.bank >= device_.banks_per_group())
        throw MappingError(kStage, "decomposed coordinate outside device geometry");

    const auto rank = static_cast<unsigned>(coord.rank);
    const auto bg = static_cast<unsigned>(coord.bank_group);
    const auto bk = static_cast<unsigned>(coord.bank);
    const auto idx = static_cast<std::size_t>(rank) * device_.banks_per_rank +
                     static_cast<std::size_t>(bg) * device_.banks_per_group() + bk;

    // Refresh deadlines are honored by first planning the request, then
    // checking that the rank can still be closed in time; if not, the plan is
    // rolled back and the refresh goes first.
    for (int attempt = 0; attempt < 2; ++attempt) {
        const Snapshot snap{banks_[idx], ranks_[rank], cursor_, pending_.size()};
        auto& b = banks_[idx];
        std::int64_t t = cursor_;
        if (b.open_row && *b.open_row != coord.row) {
            const auto p = pre_ready(b, t);
            stage(Command{static_cast<Cycle>(p), CommandKind::PRE, rank, bg, bk, 0, 0});
            b.last_pre = p;
            b.open_row.reset();
            t = p + 1;
        }
        if (!b.open_row) {
            const auto a = act_ready(b, rank, t);
            stage(Command{static_cast<Cycle>(a), CommandKind::ACT, rank, bg, bk, coord.row, 0});
            b.last_act = a;
            b.open_row = coord.row;
            t = a + 1;
        }
        const auto c = col_ready(b, rank, t);
        const bool is_read = request.type == RequestType::Read;
        stage(Command{static_cast<Cycle>(c), is_read ? CommandKind::RD : CommandKind::WR, rank, bg, bk, 0,
                      coord.column});
        (is_read ? b.last_rd : b.last_wr) = c;
        ranks_[rank].last_col = c;

        if (attempt == 1 || refresh_feasible()) {
            flush();
            ++requests_;
            return;
        }
        banks_[idx] = snap.bank;
        ranks_[rank] = snap.rank;
        cursor_ = snap.cursor;
        pending_.resize(snap.pending);
        refresh();
    }
}

Cycle Scheduler::finish() {
    if (finished_) return end_;
    for (unsigned r = 0; r < device_.ranks; ++r) {
        const auto first = static_cast<std::size_t>(r) * device_.banks_per_rank;
        std::int64_t prea = kNever;
        for (std::size_t i = first; i < first + device_.banks_per_rank; ++i) {
            if (banks_[i].open_row) prea = std::max(prea, pre_ready(banks_[i], cursor_));
        }
        if (prea != kNever) {
            stage(Command{static_cast<Cycle>(prea), CommandKind::PREA, r, 0, 0, 0, 0});
            close_rank(r, prea);
        }
    }
    flush();
    finished_ = true;
    return end_;
}

void TraceWriter::on_command(const Command& cmd) {
    char buf[96];
    const int n = std::snprintf(buf, sizeof(buf), "%llu,%s,%u,%u,%u\n", static_cast<unsigned long long>(cmd.cycle),
                                command_name(cmd.kind).data(), cmd.rank, cmd.bank_group, cmd.bank);
    os_.write(buf, n);
}

namespace {

template <typename Range>
CommandTrace schedule_range(const Range& requests, const AddressMapping& mapping, const DeviceSpec& device) {
    TraceCollector collector;
    Scheduler sched(mapping, device, collector);
    for (const auto& r : requests) sched.submit(r);
    CommandTrace trace;
    trace.device = device;
    trace.end_cycle = sched.finish();
    trace.commands = std::move(collector.commands);
    return trace;
}

}  // namespace

CommandTrace schedule(const RequestStream& stream, const AddressMapping& mapping, const DeviceSpec& device) {
    return schedule_range(stream, mapping, device);
}

CommandTrace schedule(std::span<const Request> requests, const AddressMapping& mapping, const DeviceSpec& device) {
    return schedule_range(requests, mapping, device);
}

std::string TimingViolation::describe() const {
    std::ostringstream os;
    os << rule << ": " << command_name(first.kind) << "@" << first.cycle << " -> " << command_name(second.kind) << "@"
       << second.cycle << " (rank " << second.rank << ", bg " << second.bank_group << ", bank " << second.bank
       << "), short by " << deficit << " cycles";
    return os.str();
}

std::vector<TimingViolation> check_timing(const CommandTrace& trace) {
    const auto& d = trace.device;
    const auto& tm = d.timings;
    const auto& cmds = trace.commands;
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    struct BankTrack {
        bool open = false;
        std::size_t act = kNone, pre = kNone, rd = kNone, wr = kNone;
    };
    struct RankTrack {
        std::size_t col = kNone, ref = kNone;
        bool gap_reported = false;
    };
    std::vector<BankTrack> banks(static_cast<std::size_t>(d.ranks) * d.banks_per_rank);
    std::vector<RankTrack> ranks(d.ranks);
    std::vector<TimingViolation> out;

    auto report = [&](const char* rule, std::size_t j, std::size_t i, std::int64_t deficit) {
        out.push_back({rule, j, i, cmds[j], cmds[i], deficit});
    };
    // Requires cmds[i] to come at least `gap` cycles after cmds[j].
    auto need = [&](const char* rule, std::size_t j, std::size_t i, Cycle gap) {
        if (j == kNone) return;
        const auto earliest = as_i64(cmds[j].cycle) + as_i64(gap);
        if (as_i64(cmds[i].cycle) < earliest) report(rule, j, i, earliest - as_i64(cmds[i].cycle));
    };
    auto check_precharge = [&](BankTrack& b, std::size_t i) {
        need("tRAS", b.act, i, tm.tRAS);
        if (b.rd != kNone && (b.act == kNone || b.rd > b.act)) need("tRTP", b.rd, i, tm.tRTP);
        if (b.wr != kNone && (b.act == kNone || b.wr > b.act)) need("tWR", b.wr, i, d.write_to_precharge());
        b.open = false;
        b.pre = i;
    };

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        const auto& c = cmds[i];
        if (i > 0 && c.cycle < cmds[i - 1].cycle) report("order", i - 1, i, as_i64(cmds[i - 1].cycle - c.cycle));
        if (c.rank >= d.ranks || c.bank_group >= d.bank_groups || c.bank >= d.banks_per_group()) {
            report("geometry", i, i, 0);
            continue;
        }
        auto& rk = ranks[c.rank];
        const auto first_bank = static_cast<std::size_t>(c.rank) * d.banks_per_rank;
        auto& b = banks[first_bank + static_cast<std::size_t>(c.bank_group) * d.banks_per_group() + c.bank];

        const Cycle since = rk.ref == kNone ? 0 : cmds[rk.ref].cycle;
        if (c.cycle > since + tm.tREFI && !rk.gap_reported) {
            report("tREFI", rk.ref == kNone ? i : rk.ref, i, as_i64(c.cycle - since - tm.tREFI));
            rk.gap_reported = true;
        }
        if (c.kind != CommandKind::REF) need("tRFC", rk.ref, i, tm.tRFC);

        switch (c.kind) {
            case CommandKind::ACT:
                if (b.open) report("ACT to open bank", b.act == kNone ? i : b.act, i, 0);
                need("tRP", b.pre, i, tm.tRP);
                need("tRC", b.act, i, tm.tRC);
                b.open = true;
                b.act = i;
                break;
            case CommandKind::RD:
            case CommandKind::WR:
                if (!b.open) report("column command to closed bank", b.pre == kNone ? i : b.pre, i, 0);
                need("tRCD", b.act, i, tm.tRCD);
                need("tCCD", rk.col, i, tm.tCCD);
                (c.kind == CommandKind::RD ? b.rd : b.wr) = i;
                rk.col = i;
                break;
            case CommandKind::PRE:
                if (b.open) check_precharge(b, i);
                break;
            case CommandKind::PREA:
                for (std::size_t k = first_bank; k < first_bank + d.banks_per_rank; ++k) {
                    if (banks[k].open) check_precharge(banks[k], i);
                }
                break;
            case CommandKind::REF:
                for (std::size_t k = first_bank; k < first_bank + d.banks_per_rank; ++k) {
                    if (banks[k].open) report("REF with open bank", banks[k].act, i, 0);
                    need("tRP", banks[k].pre, i, tm.tRP);
                }
                rk.ref = i;
                rk.gap_reported = false;
                break;
        }
    }
    return out;
}

}  // namespace dramcal
