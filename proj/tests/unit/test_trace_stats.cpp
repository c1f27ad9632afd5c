#include <doctest.h>

#include <sstream>

#include "dramcal/error.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"
#include "support.hpp"

using namespace dramcal;

namespace {

DeviceSpec one_rank() {
    auto d = testing::ddr4_device();
    d.ranks = 1;
    return d;
}

}  // namespace

TEST_CASE("single-line trace parses") {
    const auto t = parse_trace("0,ACT,0,0,3\n", one_rank());
    REQUIRE(t.commands.size() == 1);
    CHECK(t.commands[0].kind == CommandKind::ACT);
    CHECK(t.commands[0].bank == 3);
    CHECK(t.end_cycle == one_rank().timings.tRCD);
}

TEST_CASE("unknown mnemonic is a parse error at its line") {
    try {
        parse_trace("5,XYZ,0,0,0\n", one_rank());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}

TEST_CASE("decreasing cycles are rejected") {
    CHECK_THROWS_AS(parse_trace("10,ACT,0,0,0\n5,RD,0,0,0\n", one_rank()), NonMonotonicCycle);
}

TEST_CASE("write then parse reproduces the scheduled trace") {
    const auto d = testing::ddr4_device();
    const auto m = sequential_mapping(testing::widths_for(d, 14, 7));
    const auto t = schedule(generate(KernelKind::Addition, 1ULL << 14), m, d);
    std::ostringstream os;
    write_trace(os, t);
    const auto back = parse_trace(os.str(), d);
    CHECK(back.end_cycle == t.end_cycle);
    REQUIRE(back.commands.size() == t.commands.size());
    for (std::size_t i = 0; i < t.commands.size(); ++i) {
        const auto& a = t.commands[i];
        const auto& b = back.commands[i];
        REQUIRE(a.cycle == b.cycle);
        REQUIRE(a.kind == b.kind);
        REQUIRE(a.rank == b.rank);
        REQUIRE(a.bank_group == b.bank_group);
        REQUIRE(a.bank == b.bank);
    }
    CHECK(reduce(back) == reduce(t));
}

TEST_CASE("dwell sweep on ACT, RD, PREA") {
    const auto t = parse_trace("0,ACT,0,0,0\n14,RD,0,0,0\n50,PREA,0,0,0\n# end_cycle=61\n", one_rank());
    const auto s = reduce(t);
    CHECK(s.n_act == 1);
    CHECK(s.n_rd == 1);
    CHECK(s.n_pre == 1);
    CHECK(s.c_act_stdby == 50);
    CHECK(s.c_pre_stdby == 11);
    CHECK(s.c_total == 61);
}

TEST_CASE("idle trace is all precharge standby") {
    const auto d = testing::ddr4_device();
    const auto s = reduce(parse_trace("# end_cycle=100\n", d));
    CHECK(s.c_pre_stdby == 100 * d.ranks);
    CHECK(s.c_act_stdby == 0);
    CHECK(s.n_act + s.n_pre + s.n_rd + s.n_wr + s.n_ref == 0);
}

TEST_CASE("PREA counts one precharge per open bank; PRE to a closed bank counts nothing") {
    const auto t = parse_trace("0,ACT,0,0,0\n1,ACT,0,1,0\n2,ACT,0,2,1\n60,PREA,0,0,0\n80,PRE,0,0,0\n# end_cycle=100\n",
                               one_rank());
    const auto s = reduce(t);
    CHECK(s.n_act == 3);
    CHECK(s.n_pre == 3);
    CHECK(s.c_act_stdby == 60);
    CHECK(s.c_pre_stdby == 40);
}

TEST_CASE("Addition trace reads twice as often as it writes, and dwell is conserved") {
    const auto d = testing::ddr4_device();
    const auto m = sequential_mapping(testing::widths_for(d, 14, 7));
    const auto s = reduce(schedule(generate(KernelKind::Addition, 1ULL << 16), m, d), true);
    CHECK(s.n_rd == 2 * s.n_wr);
    CHECK(s.c_act_stdby + s.c_pre_stdby == s.c_total * s.ranks);
    CHECK(s.n_act == s.n_pre);
}

TEST_CASE("strict reduce rejects illegal traces") {
    const auto t = parse_trace("0,ACT,0,0,0\n1,RD,0,0,0\n# end_cycle=100\n", one_rank());
    CHECK_THROWS_AS(reduce(t, true), IllegalTrace);
    CHECK_NOTHROW(reduce(t, false));
}

TEST_CASE("stats CSV round-trips and checks conservation") {
    CommandStats s;
    s.ranks = 2;
    s.n_act = 3;
    s.n_pre = 3;
    s.n_rd = 10;
    s.n_wr = 4;
    s.n_ref = 1;
    s.c_total = 100;
    s.c_act_stdby = 120;
    s.c_pre_stdby = 80;
    const auto rows = parse_stats_csv(stats_csv_header() + stats_csv_row("k", s));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].id == "k");
    CHECK(rows[0].stats.c_act_stdby == 120);
    CHECK(rows[0].stats.n_wr == 4);
    s.c_pre_stdby = 81;
    CHECK_THROWS_AS(parse_stats_csv(stats_csv_header() + stats_csv_row("k", s)), ParseError);
    CHECK_THROWS_AS(parse_stats_csv("id,foo\n"), ParseError);
}

TEST_CASE("key-value dump names every counter") {
    CommandStats s;
    s.c_total = 7;
    s.c_pre_stdby = 7;
    const auto kv = stats_key_values(s);
    for (const char* key : {"n_act", "n_pre", "n_rd", "n_wr", "n_ref", "c_total", "c_act_stdby", "c_pre_stdby"})
        CHECK(kv.find(key) != std::string::npos);
}
