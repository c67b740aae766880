#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "twophoton/config.hpp"
#include "twophoton/scenario.hpp"

using namespace twophoton;

namespace {

RunConfig apply_text(const std::string& text, RunConfig base = {})
{
    apply_overrides(base, parse_config_text(text));
    return base;
}

std::string error_of(const std::string& text)
{
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(ParseConfig, SplitRatioEntry)
{
    const auto c = apply_text("pump_mz.split.short_power_fraction = 0.6\n");
    EXPECT_DOUBLE_EQ(c.app.pump_mz.split.short_power_fraction(), 0.6);
}

TEST(ParseConfig, LengthWithUnitSuffix)
{
    EXPECT_DOUBLE_EQ(apply_text("pdc_mz.imbalance_path = 60 cm").app.pdc_mz.imbalance_path, 0.60);
    EXPECT_DOUBLE_EQ(apply_text("pdc_mz.imbalance_path = 600mm").app.pdc_mz.imbalance_path, 0.60);
    EXPECT_NEAR(apply_text("pump.coherence_length = 1656 um\npump.model = phase_diffusion").pump.diffusion
                    .coherence_length,
                1.656e-3, 1e-15);
    EXPECT_NEAR(apply_text("filter.fwhm_wavelength = 10 nm").app.filter.fwhm_wavelength, 10e-9, 1e-20);
    EXPECT_DOUBLE_EQ(apply_text("pdc_mz.imbalance_path = 0.6").app.pdc_mz.imbalance_path, 0.6);
}

TEST(ParseConfig, TimeAngleBooleanAndWordValues)
{
    const auto c = apply_text("hom_delay = 120 fs\n"
                              "pdc_mz.phase = 90 deg\n"
                              "pump_mz.phase = 0.5 pi\n"
                              "pump_mz.enabled = off\n"
                              "filter.shape = rectangular\n"
                              "pump.model = pulsed\n"
                              "pump.pulse_fwhm = 2 ps\n"
                              "scan.points = 60\n"
                              "drift.relax_time = 0\n"
                              "drift.span_periods = 3\n");
    EXPECT_NEAR(c.app.hom_delay, 120e-15, 1e-27);
    EXPECT_NEAR(c.app.pdc_mz.phase, kPi / 2.0, 1e-15);
    EXPECT_NEAR(c.app.pump_mz.phase, kPi / 2.0, 1e-15);
    EXPECT_FALSE(c.app.pump_mz.enabled);
    EXPECT_EQ(c.app.filter.shape, SpectralShape::rectangular);
    EXPECT_EQ(c.pump.kind, PumpKind::pulsed);
    EXPECT_NEAR(c.pump.pulsed.pulse_fwhm, 2e-12, 1e-24);
    EXPECT_EQ(c.scan.points, 60u);
    EXPECT_EQ(c.drift.relax_time, 0.0);
    EXPECT_NEAR(c.drift.span_phase, 6.0 * kPi, 1e-12);
}

TEST(ParseConfig, CommentsAndBlankLinesIgnored)
{
    const auto o = parse_config_text("# header\n\n   baseline_visibility = 0.93  # V0\n");
    ASSERT_EQ(o.size(), 1u);
    EXPECT_EQ(o[0].line, 3);
}

TEST(ParseConfig, SplitOutOfRangeNamesLine)
{
    const auto msg = error_of("# c\npump_mz.split.short_power_fraction = 1.3\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(ParseConfig, UnknownKeyNamesLine)
{
    const auto msg = error_of("baseline_visibility = 0.9\npump_mz.colour = red\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("pump_mz.colour"), std::string::npos) << msg;
}

TEST(ParseConfig, DuplicateKeyNamesBothLines)
{
    const auto msg = error_of("hom_delay = 0\n\nhom_delay = 1 ps\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(ParseConfig, UnitMismatchRejected)
{
    EXPECT_NE(error_of("pdc_mz.imbalance_path = 3 ps").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("hom_delay = 3 mm").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("baseline_visibility = 0.9 nm").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("pdc_mz.imbalance_path = 60 furlongs").find("line 1"), std::string::npos);
}

TEST(ParseConfig, MalformedValuesRejected)
{
    EXPECT_FALSE(error_of("pdc_mz.imbalance_path = sixty").empty());
    EXPECT_FALSE(error_of("scan.points = 12.5").empty());
    EXPECT_FALSE(error_of("pump_mz.enabled = maybe").empty());
    EXPECT_FALSE(error_of("pump.model = laser").empty());
    EXPECT_FALSE(error_of("baseline_visibility").empty());
    EXPECT_FALSE(error_of("scan.points = 3").empty());
    EXPECT_FALSE(error_of("pump.coherence_length = -1 mm").empty());
}

TEST(ParseConfig, OverridesRevalidatedAgainstInvariants)
{
    EXPECT_THROW(apply_text("pump.model = pulsed\npump.pulse_fwhm = 20 ns\n"), ConfigError);
    EXPECT_THROW(apply_text("baseline_visibility = 1.5\n"), ConfigError);
}

TEST(ParseConfig, DumpRoundTrips)
{
    RunConfig c = preset_config(Scenario::timebin);
    c.app.pump_mz.split = SplitRatio(0.6);
    c.app.baseline_visibility = 0.93;
    const std::string dumped = dump_config(c);
    const RunConfig back = apply_text(dumped, RunConfig{});
    EXPECT_EQ(dump_config(back), dumped);
}

TEST(ParseConfig, EveryKeyDocumented)
{
    EXPECT_GE(config_keys().size(), 30u);
}

TEST(Scenario, NamesRoundTrip)
{
    for (const auto& [s, name] : scenario_names())
        EXPECT_EQ(parse_scenario(name), s);
    EXPECT_THROW(parse_scenario("nope"), ConfigError);
}

TEST(Scenario, PresetsEncodeExperiments)
{
    EXPECT_FALSE(preset_config(Scenario::unbalanced).app.pump_mz.enabled);
    EXPECT_DOUBLE_EQ(preset_config(Scenario::balanced).app.pdc_mz.imbalance_path, 0.0);
    EXPECT_EQ(preset_config(Scenario::franson).pump.kind, PumpKind::coherent);
    EXPECT_TRUE(preset_config(Scenario::timebin).app.gate.enabled);
    const auto pm = preset_config(Scenario::pump_mz);
    EXPECT_TRUE(pm.app.pump_mz.enabled && pm.app.pdc_mz.enabled);
    EXPECT_NEAR(pm.pump.diffusion.coherence_length, 1.656e-3, 1e-6);
    EXPECT_DOUBLE_EQ(pm.app.baseline_visibility, 1.0);
    EXPECT_EQ(pm.scan.points, 180u);
    EXPECT_DOUBLE_EQ(pm.scan.duration, 900.0);
}

TEST(Scenario, CommandLineOptionsOverride)
{
    RunConfig c = preset_config(Scenario::pump_mz);
    RunOptions o;
    o.trials = 500;
    o.points = 40;
    o.v0 = 0.93;
    apply_options(Scenario::pump_mz, c, o);
    EXPECT_EQ(c.scan.trials, 500u);
    EXPECT_EQ(c.scan.points, 40u);
    EXPECT_DOUBLE_EQ(c.app.baseline_visibility, 0.93);
    o.v0 = 1.2;
    EXPECT_THROW(apply_options(Scenario::pump_mz, c, o), ConfigError);
}

TEST(SweepGrid, ListAndRangeForms)
{
    const auto g = parse_grid("0, 66um, 1mm", ValueKind::length);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_NEAR(g[1], 66e-6, 1e-18);
    EXPECT_NEAR(g[2], 1e-3, 1e-18);
    const auto r = parse_grid("0.5:0.1:0.7", ValueKind::number);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_NEAR(r[2], 0.7, 1e-12);
    EXPECT_THROW(parse_grid("0.5", ValueKind::number), ConfigError);
    EXPECT_THROW(parse_grid("0.5,0.6", ValueKind::number), ConfigError);
    EXPECT_THROW(parse_grid("0:-1:5", ValueKind::number), ConfigError);
}

TEST(Sweep, SinglePointGridRejected)
{
    EXPECT_THROW(run_sweep(Scenario::split_sweep, preset_config(Scenario::split_sweep), {0.5}, {}), ConfigError);
    EXPECT_THROW(run_sweep(Scenario::hom, preset_config(Scenario::hom), {0.1, 0.2, 0.3}, {}), ConfigError);
}

TEST(Sweep, FailedPointsRecordedAndSweepContinues)
{
    RunConfig c = preset_config(Scenario::split_sweep);
    c.scan.points = 40;
    c.scan.trials = 2000;
    RunOptions o;
    const auto r = run_sweep(Scenario::split_sweep, c, {0.5, 1.5, 0.6}, o);
    ASSERT_EQ(r.points.size(), 3u);
    EXPECT_EQ(r.points[0].status.rfind("ok", 0), 0u);
    EXPECT_EQ(r.points[1].status.rfind("failed", 0), 0u);
    EXPECT_EQ(r.points[2].status.rfind("ok", 0), 0u);
    const std::string csv = sweep_csv(r);
    EXPECT_NE(csv.find("parameter,visibility,stderr,status"), std::string::npos);
}

TEST(Report, CsvSchemaAndHeaderBlock)
{
    RunConfig c = preset_config(Scenario::hom);
    RunOptions o;
    o.seed = 5;
    const auto r = run_scenario(Scenario::hom, c, o);
    const std::string csv = scan_csv(r);
    EXPECT_EQ(csv.rfind("# scenario: hom\n# seed: 5\n", 0), 0u);
    EXPECT_NE(csv.find("# config_hash: " + r.config_hash + "\n"), std::string::npos);
    EXPECT_NE(csv.find("\nx,rate,counts,stderr\n"), std::string::npos);
    const std::string report = report_text(r);
    EXPECT_NE(report.find("fitted_visibility:"), std::string::npos);
    EXPECT_NE(report.find("analytic_visibility: 0.978"), std::string::npos);
    EXPECT_NEAR(r.fit.visibility, 0.978, 0.005);
}
