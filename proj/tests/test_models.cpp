#include "asmwb/dsl.hpp"
#include "asmwb/models.hpp"
#include "asmwb/verify.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace asmwb;

namespace {

std::string val(const TransitionSystem& ts, int s, const char* loc)
{
    return ts.machine->value_to_string(ts.value(s, *ts.machine->find_location(loc)));
}

bool has_monitored(const MachineDefinition& m, const char* name) { return m.find_monitored_slot(name).has_value(); }

} // namespace

TEST_CASE("levels load with the documented signature")
{
    auto m0 = load(0);
    CHECK(stats(m0).monitored == 5);
    CHECK(stats(m0).controlled == 1);

    auto m2 = load(2);
    const auto& phase = m2.domains[static_cast<size_t>(*m2.find_domain("Phase"))].literals;
    for (const char* lit : {"INPAUSE", "RM", "EXPAUSE"}) CHECK(std::find(phase.begin(), phase.end(), lit) != phase.end());

    auto m3 = load(3);
    CHECK(has_monitored(m3, "dropPAW_ITS"));
    CHECK(has_monitored(m3, "pawGTMaxPinsp"));
    for (const char* f : {"state", "phase", "iValve", "oValve", "stopVentilation", "apneaBackupMode"})
        CHECK(m3.find_location(f).has_value());
    for (const char* f : {"startupEnded", "selfTestPassed", "startVentilation", "stopRequested", "respirationMode",
                          "flowDropPSV", "cmdInPause", "cmdExPause", "cmdRm"})
        CHECK(has_monitored(m3, f));
}

TEST_CASE("initial state")
{
    for (int l = 1; l < kLevels; ++l) {
        auto m = load(l);
        auto s = initial_state(m);
        auto v = [&](const char* n) { return m.value_to_string(s.at(*m.find_location(n))); };
        CHECK(v("state") == "STARTUP");
        CHECK(v("iValve") == "CLOSED");
        CHECK(v("oValve") == "OPEN");
        CHECK(v("stopVentilation") == "false");
        if (l >= 2) CHECK(v("apneaBackupMode") == "false");
    }
}

TEST_CASE("level out of range")
{
    CHECK_THROWS_AS(load(4), Error);
    CHECK_THROWS_AS(load(-1), Error);
}

TEST_CASE("PCV durations from rate and ratio")
{
    auto d = default_config();
    CHECK(d.inspiration_dur_pcv == Duration{1667});
    CHECK(d.expiration_dur_pcv == Duration{3333});
    CHECK(d.apnea_lag == Duration{30000});
    CHECK(d.trigger_window_delay == Duration{300});
    auto [i, e] = pcv_durations(60, 1, 1);
    CHECK(i == Duration{500});
    CHECK(e == Duration{500});
    auto [i2, e2] = pcv_durations(12, 1, 2);
    CHECK(i2.ms + e2.ms == 5000);
    for (auto bad : {std::array{12.0, 0.0, 2.0}, std::array{12.0, 1.0, 0.0}, std::array{0.0, 1.0, 2.0}}) {
        try {
            pcv_durations(bad[0], bad[1], bad[2]);
            FAIL("expected InvalidConfig");
        } catch (const Error& err) {
            CHECK(err.code() == ErrorCode::InvalidConfig);
        }
    }
}

TEST_CASE("config files")
{
    CHECK(load_config(assets_dir() / "models" / "default.config") == default_config());
    CHECK(load_config(assets_dir() / "models" / "test.config") == test_config());
    CHECK(parse_config(format_config(test_config())) == test_config());
    auto t = test_config();
    CHECK(t.inspiration_dur_pcv == Duration{2000});
    CHECK(t.expiration_dur_pcv == Duration{4000});

    auto c = parse_config("respiratoryRate = 20 # fast\nieRatio = 1:1\napneaLag = 1500ms\nrmDur = 2\n");
    CHECK(c.inspiration_dur_pcv == Duration{1500});
    CHECK(c.apnea_lag == Duration{1500});
    CHECK(c.rm_dur == Duration{2000});
    auto explicit_phase = parse_config("respiratoryRate = 20\ninspirationDurPCV = 1s\n");
    CHECK(explicit_phase.inspiration_dur_pcv == Duration{1000});

    for (const char* bad : {"ieRatio = 0:2\n", "ieRatio = 1\n", "apneaLag = -1s\n", "apneaLag = 0s\n", "bogus = 1s\n",
                            "apneaLag\n", "apneaLag = 3 fortnights\n"}) {
        CAPTURE(bad);
        try {
            parse_config(bad);
            FAIL("expected InvalidConfig");
        } catch (const Error& err) {
            CHECK(err.code() == ErrorCode::InvalidConfig);
        }
    }
}

TEST_CASE("binding a config sets every timer")
{
    auto m = load(3, test_config());
    for (const auto& t : m.timers) {
        REQUIRE(t.duration);
        CHECK(t.duration->ms > 0);
    }
    CHECK(m.timers.size() == 10);
    auto keys = test_config().durations();
    CHECK(keys.size() == 10);
    for (const auto& t : m.timers) CHECK(keys.at(t.config_key) == *t.duration);
}

TEST_CASE("a corrupted asset directory is reported")
{
    const char* old = std::getenv("ASMWB_ASSETS");
    const std::string saved = old ? old : "";
    setenv("ASMWB_ASSETS", "/nonexistent-assets", 1);
    try {
        load(1);
        FAIL("expected CorruptedAsset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorruptedAsset);
    }
    if (old)
        setenv("ASMWB_ASSETS", saved.c_str(), 1);
    else
        unsetenv("ASMWB_ASSETS");
}

TEST_CASE("behavioural invariants over every reachable state")
{
    for (int l = 1; l < kLevels; ++l) {
        CAPTURE(l);
        const auto m = load(l);
        auto ts = build_ts(m);
        for (int s = 0; s < static_cast<int>(ts.states.size()); ++s) {
            const auto state = val(ts, s, "state");
            const auto phase = val(ts, s, "phase");
            const bool running = state == "PCV_STATE" || state == "PSV_STATE";
            if (state == "VENTILATIONOFF" || state == "STARTUP" || state == "SELFTEST") {
                CHECK(val(ts, s, "iValve") == "CLOSED");
                CHECK(val(ts, s, "oValve") == "OPEN");
            }
            if (running && (phase == "INPAUSE" || phase == "EXPAUSE")) {
                CHECK(val(ts, s, "iValve") == "CLOSED");
                CHECK(val(ts, s, "oValve") == "CLOSED");
            }
            if (running && phase == "RM") {
                CHECK(val(ts, s, "iValve") == "OPEN");
                CHECK(val(ts, s, "oValve") == "CLOSED");
            }
            if (running && phase == "INSPIRATION") {
                CHECK(val(ts, s, "iValve") == "OPEN");
                CHECK(val(ts, s, "oValve") == "CLOSED");
            }
        }
        for (const auto& e : ts.edges) {
            const auto from = val(ts, e.from, "state");
            const auto to = val(ts, e.to, "state");
            // stop requests are honoured in expiration only
            if (to == "VENTILATIONOFF" && (from == "PCV_STATE" || from == "PSV_STATE"))
                CHECK(val(ts, e.from, "phase") != "INSPIRATION");
            if (l >= 2) {
                const bool before = val(ts, e.from, "apneaBackupMode") == "true";
                const bool after = val(ts, e.to, "apneaBackupMode") == "true";
                // apnea backup is entered only from PSV, into PCV
                if (!before && after) {
                    CHECK(from == "PSV_STATE");
                    CHECK(to == "PCV_STATE");
                }
                if (from == "PCV_STATE" && to == "PSV_STATE") CHECK_FALSE(after);
            }
        }
    }
}

TEST_CASE("level 01 keeps the valves opposite")
{
    const auto m = load(1);
    auto ts = build_ts(m);
    for (int s = 0; s < static_cast<int>(ts.states.size()); ++s) CHECK(val(ts, s, "iValve") != val(ts, s, "oValve"));
}
