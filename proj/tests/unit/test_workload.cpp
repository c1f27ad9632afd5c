#include <doctest.h>

#include <sstream>

#include "dramcal/error.hpp"
#include "dramcal/workload.hpp"

using namespace dramcal;

TEST_CASE("Read kernel over 80 elements issues 10 line reads") {
    const auto s = generate(KernelKind::Read, 80, {0x1000});
    REQUIRE(s.size() == 10);
    for (std::uint64_t i = 0; i < 10; ++i) {
        CHECK(s[i].type == RequestType::Read);
        CHECK(s[i].address == 0x1000 + 64 * i);
    }
}

TEST_CASE("Addition kernel interleaves R a, R b, W c") {
    const auto s = generate(KernelKind::Addition, 80);
    REQUIRE(s.size() == 30);
    const auto bases = contiguous_bases(3, 80);
    for (std::uint64_t it = 0; it < 10; ++it) {
        CHECK(s[3 * it] == Request{RequestType::Read, bases[0] + 64 * it});
        CHECK(s[3 * it + 1] == Request{RequestType::Read, bases[1] + 64 * it});
        CHECK(s[3 * it + 2] == Request{RequestType::Write, bases[2] + 64 * it});
    }
}

TEST_CASE("kernel table") {
    using enum RequestType;
    CHECK(access_pattern(KernelKind::Read) == AccessPattern{{0, Read}});
    CHECK(access_pattern(KernelKind::Assign) == AccessPattern{{0, Write}});
    CHECK(access_pattern(KernelKind::Copy) == AccessPattern{{0, Read}, {1, Write}});
    CHECK(access_pattern(KernelKind::SelfScale) == AccessPattern{{0, Read}, {0, Write}});
    for (auto k : kAllKernels) CHECK(kernel_from_name(kernel_name(k)) == k);
    CHECK_FALSE(kernel_from_name("nope").has_value());
}

TEST_CASE("read-for-ownership only precedes writes to unread arrays") {
    using enum RequestType;
    CHECK(with_rfo({{0, Write}}) == AccessPattern{{0, Read}, {0, Write}});
    CHECK(with_rfo({{0, Read}, {0, Write}}) == AccessPattern{{0, Read}, {0, Write}});
    CHECK(with_rfo({{0, Read}, {1, Write}}) == AccessPattern{{0, Read}, {1, Read}, {1, Write}});
}

TEST_CASE("million-element arrays stream without materialization") {
    const auto s = generate(KernelKind::Triad, 100'000'000);
    CHECK(s.size() == 3 * 100'000'000ULL / 8);
    const auto last = s[s.size() - 1];
    CHECK(last.type == RequestType::Write);
    std::uint64_t n = 0;
    for (auto it = s.begin(); it != s.end() && n < 1000; ++it) ++n;
    CHECK(n == 1000);
}

TEST_CASE("stride changes the request count") {
    CHECK(generate(KernelKind::Read, 1024, {}, 128).size() == 64);
    CHECK_THROWS_AS(generate(KernelKind::Read, 1024, {}, 96), AlignmentError);
    CHECK_THROWS_AS(generate(KernelKind::Read, 1000, {}, 128), AlignmentError);
}

TEST_CASE("array placement errors") {
    CHECK_THROWS_AS(generate(KernelKind::Copy, 80, {0, 64}), OverlapError);
    CHECK_THROWS_AS(generate(KernelKind::Copy, 80, {0, 700}), AlignmentError);
    CHECK_THROWS(generate(KernelKind::Copy, 80, {0}));
    CHECK_THROWS(generate(KernelKind::Read, 0));
}

TEST_CASE("contiguous bases are 64-byte aligned and disjoint") {
    const auto b = contiguous_bases(3, 10, 0x40);
    CHECK(b[0] == 0x40);
    CHECK(b[1] == 0x40 + 128);  // 80 bytes rounded up
    CHECK(b[2] == 0x40 + 256);
}

TEST_CASE("stream CSV round-trips") {
    const auto s = generate(KernelKind::Triad, 64, {}, 64, true);
    std::ostringstream os;
    write_stream_csv(os, s, "triad");
    const auto back = parse_stream_csv(os.str());
    REQUIRE(back.size() == s.size());
    for (std::uint64_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);
    CHECK_THROWS_AS(parse_stream_csv("type,address\nFETCH,0x0\n"), ParseError);
    CHECK_THROWS_AS(parse_stream_csv("type,address\nREAD,zz\n"), ParseError);
}
