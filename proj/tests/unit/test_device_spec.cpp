#include <doctest.h>

#include <limits>

#include "dramcal/device_spec.hpp"
#include "dramcal/error.hpp"
#include "support.hpp"

using namespace dramcal;

TEST_CASE("two ranks with sixteen banks is a valid geometry") {
    auto d = testing::ddr4_device();
    CHECK(d.ranks == 2);
    CHECK(d.banks_per_rank == 16);
    CHECK_NOTHROW(validate(d));
}

TEST_CASE("tRC must equal tRAS + tRP") {
    auto d = testing::ddr4_device();
    d.timings.tRAS = 32;
    d.timings.tRP = 11;
    d.timings.tRC = 43;
    CHECK_NOTHROW(validate(d));
    d.timings.tRC = 40;
    CHECK_THROWS_AS(validate(d), ValidationError);
}

TEST_CASE("current ordering is enforced") {
    auto d = testing::ddr4_device();
    d.idd.idd4r = d.idd.idd3n * 0.5;
    CHECK_THROWS_AS(validate(d), ValidationError);
    d = testing::ddr4_device();
    d.idd.idd5b = d.idd.idd2n;
    CHECK_THROWS_AS(validate(d), ValidationError);
}

TEST_CASE("bank counts must be powers of two and burst length 4 or 8") {
    auto d = testing::ddr4_device();
    d.banks_per_rank = 12;
    CHECK_THROWS_AS(validate(d), ValidationError);
    d = testing::ddr4_device();
    d.burst_length = 16;
    CHECK_THROWS_AS(validate(d), ValidationError);
    d = testing::ddr4_device();
    d.timings.tCCD = 0;
    CHECK_THROWS_AS(validate(d), ValidationError);
}

TEST_CASE("default bounds copy datasheet currents with zero lower bounds") {
    const auto d = testing::ddr4_device();
    const auto b = default_bounds(d);
    CHECK(b[Current::Rd].upper == doctest::Approx(0.190));
    CHECK(b[Current::Wr].upper == doctest::Approx(0.170));
    CHECK(b[Current::Act].upper == doctest::Approx(0.060));
    CHECK(b[Current::Pre].upper == doctest::Approx(0.060));
    CHECK(b[Current::Asb].upper == doctest::Approx(0.048));
    for (auto c : kAllCurrents) CHECK(b[c].lower == 0.0);
    CHECK(b.intercept.lower == 0.0);
    CHECK(b.intercept.upper == std::numeric_limits<double>::infinity());
}

TEST_CASE("shipped device config loads and round-trips") {
    const auto d = load_device_spec(testing::configs_dir() / "m393a1g43db0_cpb.json");
    CHECK(d.timings.tRFC == 278);  // 260 ns at 0.9375 ns rounded up
    CHECK(d.timings.tREFI == 8320);
    CHECK(d.timings == testing::ddr4_device().timings);
    CHECK(d.idd == testing::ddr4_device().idd);
    const auto again = parse_device_spec(serialize_device_spec(d));
    CHECK(again == d);
}

TEST_CASE("device JSON errors") {
    CHECK_THROWS_AS(parse_device_spec(""), ParseError);
    CHECK_THROWS_AS(parse_device_spec("{}"), ParseError);
    auto text = serialize_device_spec(testing::ddr4_device());
    auto bad = text;
    bad.insert(1, "\"bogus\": 1,");
    CHECK_THROWS_AS(parse_device_spec(bad), ParseError);
    try {
        load_device_spec("/nonexistent/device.json");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.stage() == "device-spec");
    }
}

TEST_CASE("currents file round-trips exactly") {
    CalibratedCurrents c{0.0123456789, 0.02, 0.03, 0.1, 0.2, 1.5e-7};
    const auto back = parse_currents(serialize_currents(c));
    CHECK(back == c);
    CHECK_THROWS_AS(parse_currents("i_act_a = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_currents("i_act_a = x\ni_pre_a=1\ni_asb_a=1\ni_rd_a=1\ni_wr_a=1\nintercept_b_j=0\n"),
                    ParseError);
}

TEST_CASE("datasheet currents map to the expected IDD values") {
    const auto d = testing::ddr4_device();
    const auto c = datasheet_currents(d);
    CHECK(c.i_act == d.idd.idd0);
    CHECK(c.i_pre == d.idd.idd0);
    CHECK(c.i_asb == d.idd.idd3n);
    CHECK(c.i_rd == d.idd.idd4r);
    CHECK(c.i_wr == d.idd.idd4w);
    CHECK(c.intercept_b == 0.0);
}
