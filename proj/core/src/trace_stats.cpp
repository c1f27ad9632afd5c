#include "dramcal/trace_stats.hpp"

#include <ostream>
#include <sstream>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {
constexpr const char* kStage = "trace-stats";
}

StatsAccumulator::StatsAccumulator(const DeviceSpec& device) : device_(device) {
    const auto banks = static_cast<std::size_t>(device.ranks) * device.banks_per_rank;
    stats_.ranks = device.ranks;
    stats_.per_bank.assign(banks, {});
    open_.assign(banks, false);
    open_since_.assign(banks, 0);
    open_count_.assign(device.ranks, 0);
    last_change_.assign(device.ranks, 0);
}

void StatsAccumulator::set_open(std::size_t bank_index, unsigned rank, bool open, Cycle at) {
    if (open_[bank_index] == open) return;
    const bool rank_was_active = open_count_[rank] > 0;
    open_[bank_index] = open;
    if (open) {
        ++open_count_[rank];
        open_since_[bank_index] = at;
    } else {
        --open_count_[rank];
        stats_.per_bank[bank_index].open_cycles += at - open_since_[bank_index];
    }
    const bool rank_is_active = open_count_[rank] > 0;
    if (rank_was_active != rank_is_active) {
        (rank_was_active ? stats_.c_act_stdby : stats_.c_pre_stdby) += at - last_change_[rank];
        last_change_[rank] = at;
    }
}

void StatsAccumulator::on_command(const Command& cmd) {
    if (cmd.cycle < last_cycle_) throw Error(kStage, "commands must be fed in cycle order");
    last_cycle_ = cmd.cycle;
    if (cmd.rank >= device_.ranks || cmd.bank_group >= device_.bank_groups || cmd.bank >= device_.banks_per_group())
        throw Error(kStage, "command outside device geometry at cycle " + std::to_string(cmd.cycle));

    const auto first = static_cast<std::size_t>(cmd.rank) * device_.banks_per_rank;
    const auto idx = first + static_cast<std::size_t>(cmd.bank_group) * device_.banks_per_group() + cmd.bank;
    auto& bank = stats_.per_bank[idx];
    switch (cmd.kind) {
        case CommandKind::ACT:
            ++stats_.n_act;
            ++bank.n_act;
            set_open(idx, cmd.rank, true, cmd.cycle);
            break;
        case CommandKind::PRE:
            if (open_[idx]) {
                ++stats_.n_pre;
                ++bank.n_pre;
                set_open(idx, cmd.rank, false, cmd.cycle);
            }
            break;
        case CommandKind::PREA:
            for (std::size_t i = first; i < first + device_.banks_per_rank; ++i) {
                if (!open_[i]) continue;
                ++stats_.n_pre;
                ++stats_.per_bank[i].n_pre;
                set_open(i, cmd.rank, false, cmd.cycle);
            }
            break;
        case CommandKind::RD:
            ++stats_.n_rd;
            ++bank.n_rd;
            break;
        case CommandKind::WR:
            ++stats_.n_wr;
            ++bank.n_wr;
            break;
        case CommandKind::REF: ++stats_.n_ref; break;
    }
}

CommandStats StatsAccumulator::finish(Cycle end_cycle) {
    if (end_cycle < last_cycle_) throw Error(kStage, "end_cycle precedes the last command");
    for (unsigned r = 0; r < device_.ranks; ++r) {
        (open_count_[r] > 0 ? stats_.c_act_stdby : stats_.c_pre_stdby) += end_cycle - last_change_[r];
        last_change_[r] = end_cycle;
    }
    for (std::size_t i = 0; i < open_.size(); ++i) {
        if (open_[i]) stats_.per_bank[i].open_cycles += end_cycle - open_since_[i];
        open_since_[i] = end_cycle;
    }
    stats_.c_total = end_cycle;
    return stats_;
}

CommandTrace parse_trace(std::string_view text_in, const DeviceSpec& device, const std::string& source) {
    CommandTrace trace;
    trace.device = device;
    bool have_end = false;
    Cycle declared_end = 0;

    text::LineReader reader(text_in);
    std::string_view line;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = text::trim(line.substr(1));
            if (body.substr(0, 9) == "end_cycle") {
                body = text::trim(body.substr(9));
                if (!body.empty() && (body.front() == '=' || body.front() == ':')) body.remove_prefix(1);
                std::uint64_t v = 0;
                if (!text::parse_u64(body, v)) throw ParseError(kStage, source, ln, "bad end_cycle directive");
                declared_end = v;
                have_end = true;
            }
            continue;
        }
        const auto f = text::split(line, ',');
        if (f.size() != 5) throw ParseError(kStage, source, ln, "expected <cycle>,<CMD>,<rank>,<bank_group>,<bank>");
        Command c;
        std::uint64_t v[4];
        if (!text::parse_u64(f[0], v[0])) throw ParseError(kStage, source, ln, "bad cycle");
        const auto kind = command_from_name(text::trim(f[1]));
        if (!kind) throw ParseError(kStage, source, ln, "unknown command '" + std::string(text::trim(f[1])) + "'");
        for (int k = 1; k < 4; ++k) {
            if (!text::parse_u64(f[static_cast<std::size_t>(k) + 1], v[k]) || v[k] > 0xffffffffULL)
                throw ParseError(kStage, source, ln, "bad rank/bank field");
        }
        c.cycle = v[0];
        c.kind = *kind;
        c.rank = static_cast<unsigned>(v[1]);
        c.bank_group = static_cast<unsigned>(v[2]);
        c.bank = static_cast<unsigned>(v[3]);
        if (c.rank >= device.ranks || c.bank_group >= device.bank_groups || c.bank >= device.banks_per_group())
            throw ParseError(kStage, source, ln, "rank/bank outside device geometry");
        if (!trace.commands.empty() && c.cycle < trace.commands.back().cycle)
            throw NonMonotonicCycle(kStage, source, ln,
                                    "cycle " + std::to_string(c.cycle) + " precedes " +
                                        std::to_string(trace.commands.back().cycle));
        trace.commands.push_back(c);
    }
    if (have_end) {
        if (!trace.commands.empty() && declared_end <= trace.commands.back().cycle)
            throw ParseError(kStage, source, 0, "end_cycle does not follow the last command");
        trace.end_cycle = declared_end;
    } else {
        trace.end_cycle = natural_end_cycle(trace.commands, device);
    }
    return trace;
}

CommandTrace load_trace(const std::filesystem::path& path, const DeviceSpec& device) {
    return parse_trace(text::read_file(path, kStage), device, path.string());
}

void write_trace(std::ostream& os, const CommandTrace& trace) {
    TraceWriter w(os);
    for (const auto& c : trace.commands) w.on_command(c);
    os << "# end_cycle=" << trace.end_cycle << "\n";
}

CommandStats reduce(const CommandTrace& trace, bool strict) {
    if (strict) {
        const auto v = check_timing(trace);
        if (!v.empty())
            throw IllegalTrace(kStage, std::to_string(v.size()) + " timing violation(s); first: " + v.front().describe());
    }
    StatsAccumulator acc(trace.device);
    for (const auto& c : trace.commands) acc.on_command(c);
    return acc.finish(trace.end_cycle);
}

std::string stats_key_values(const CommandStats& s) {
    std::ostringstream os;
    os << "ranks = " << s.ranks << "\n"
       << "n_act = " << s.n_act << "\n"
       << "n_pre = " << s.n_pre << "\n"
       << "n_rd = " << s.n_rd << "\n"
       << "n_wr = " << s.n_wr << "\n"
       << "n_ref = " << s.n_ref << "\n"
       << "c_total = " << s.c_total << "\n"
       << "c_act_stdby = " << s.c_act_stdby << "\n"
       << "c_pre_stdby = " << s.c_pre_stdby << "\n";
    return os.str();
}

std::string stats_csv_header() { return "benchmark,ranks,n_act,n_pre,n_rd,n_wr,n_ref,c_total,c_act_stdby,c_pre_stdby\n"; }

std::string stats_csv_row(std::string_view id, const CommandStats& s) {
    std::ostringstream os;
    os << id << "," << s.ranks << "," << s.n_act << "," << s.n_pre << "," << s.n_rd << "," << s.n_wr << "," << s.n_ref
       << "," << s.c_total << "," << s.c_act_stdby << "," << s.c_pre_stdby << "\n";
    return os.str();
}

std::vector<NamedStats> parse_stats_csv(std::string_view text_in, const std::string& source) {
    std::vector<NamedStats> out;
    text::LineReader reader(text_in);
    std::string_view line;
    bool header = false;
    while (reader.next(line)) {
        const auto ln = reader.line_number();
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != text::trim(stats_csv_header()))
                throw ParseError(kStage, source, ln, "expected header '" + std::string(text::trim(stats_csv_header())) + "'");
            header = true;
            continue;
        }
        const auto f = text::split(line, ',');
        if (f.size() != 10) throw ParseError(kStage, source, ln, "expected 10 columns");
        std::uint64_t v[9];
        for (std::size_t k = 0; k < 9; ++k) {
            if (!text::parse_u64(f[k + 1], v[k])) throw ParseError(kStage, source, ln, "bad integer field");
        }
        NamedStats ns;
        ns.id = std::string(text::trim(f[0]));
        ns.stats.ranks = static_cast<unsigned>(v[0]);
        ns.stats.n_act = v[1];
        ns.stats.n_pre = v[2];
        ns.stats.n_rd = v[3];
        ns.stats.n_wr = v[4];
        ns.stats.n_ref = v[5];
        ns.stats.c_total = v[6];
        ns.stats.c_act_stdby = v[7];
        ns.stats.c_pre_stdby = v[8];
        if (ns.stats.c_act_stdby + ns.stats.c_pre_stdby != ns.stats.c_total * ns.stats.ranks)
            throw ParseError(kStage, source, ln, "dwell cycles do not sum to c_total * ranks");
        out.push_back(std::move(ns));
    }
    if (!header) throw ParseError(kStage, source, 0, "missing header");
    return out;
}

}  // namespace dramcal
