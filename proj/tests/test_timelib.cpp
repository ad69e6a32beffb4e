#include "asmwb/dsl.hpp"
#include "asmwb/interpreter.hpp"
#include "asmwb/time_library.hpp"

#include <doctest.h>

#include <random>

using namespace asmwb;

namespace {

// One 2 s timer reset whenever `reset` is true; `fired` mirrors expiry.
MachineDefinition timer_machine(const std::string& duration = "2s")
{
    return parse({"asm Timer\nimport TimeLibrary\nsignature:\n monitored reset: Boolean\n controlled fired: Boolean\n"
                  " static t: Timer\ndefinitions:\n function t = " + duration + "\n"
                  " main rule r_Main = par\n  if reset then r_reset_timer[t] endif\n"
                  "  if expired(t) then fired := true else fired := false endif\n endpar\n"
                  "default init s0:\n function fired = false\n"});
}

MachineState at_clock(const MachineDefinition& m, MachineState s, Millis start, Millis now)
{
    s.controlled[static_cast<size_t>(m.start_location(0))] = Value::instant(Instant{start});
    s.clock = Instant{now};
    return s;
}

Environment env(const MachineDefinition& m, bool reset, Millis now)
{
    return make_environment(m, {{"reset", reset ? "true" : "false"}}, Instant{now});
}

} // namespace

TEST_CASE("reset records the current clock")
{
    auto m = timer_machine();
    for (Millis now : {Millis{0}, Millis{7000}}) {
        auto u = timelib::reset_timer(m, 0, Instant{now});
        REQUIRE(u.updates().size() == 1);
        CHECK(u.updates()[0].location == m.start_location(0));
        CHECK(u.updates()[0].value == Value::instant(Instant{now}));
    }
    // second of two consecutive resets wins
    auto s = step(m, initial_state(m), env(m, true, 1000));
    s = step(m, s, env(m, true, 2000));
    CHECK(s.at(m.start_location(0)) == Value::instant(Instant{2000}));
}

TEST_CASE("expiry is inclusive")
{
    auto m = parse({"asm T\nimport TimeLibrary\nsignature:\n static t: Timer\ndefinitions:\n function t = 5s\n"});
    auto s0 = initial_state(m);
    CHECK(timelib::expired(m, 0, at_clock(m, s0, 0, 5000)));
    CHECK_FALSE(timelib::expired(m, 0, at_clock(m, s0, 0, 4999)));
    CHECK(timelib::elapsed(m, 0, at_clock(m, s0, 1000, 4500), Instant{4500}) == Duration{3500});
}

TEST_CASE("durations can be changed at run time")
{
    auto m = timer_machine("1500ms");
    CHECK(m.initial_values.at(static_cast<size_t>(m.duration_location(0))) == Value::duration(Duration{1500}));
    auto u = timelib::set_duration(m, 0, Duration{4000});
    REQUIRE(u.updates().size() == 1);
    CHECK(u.updates()[0] == Update{m.duration_location(0), Value::duration(Duration{4000})});
}

TEST_CASE("one second harness: a 2 s timer reset at step k expires at step k+2")
{
    auto m = timer_machine();
    const int fired = *m.find_location("fired");
    for (int k = 1; k <= 4; ++k) {
        MachineState s = initial_state(m);
        std::vector<bool> seen;
        for (int i = 1; i <= k + 3; ++i) {
            s = step(m, s, env(m, i == k, timelib::seconds(i).ms));
            if (i > k) seen.push_back(s.at(fired).as_bool());
        }
        // steps k+1, k+2, k+3: the step at k+2 reads a clock 2 s after the reset
        CHECK(seen == std::vector<bool>{false, true, true});
    }
}

TEST_CASE("all timers start reset at machine initialization")
{
    auto m = timer_machine();
    auto s = initial_state(m);
    CHECK(s.at(m.start_location(0)) == Value::instant(Instant{0}));
    CHECK(timelib::expired(m, 0, at_clock(m, s, 0, 2000)));
}

TEST_CASE("once expired a timer stays expired until reset")
{
    auto m = timer_machine("3s");
    const int fired = *m.find_location("fired");
    std::mt19937_64 rng(7);
    for (int run = 0; run < 200; ++run) {
        MachineState s = initial_state(m);
        Millis now = 0;
        bool was = false;
        for (int i = 0; i < 40; ++i) {
            now += std::uniform_int_distribution<Millis>(0, 1500)(rng);
            const bool reset = std::uniform_int_distribution<int>(0, 9)(rng) == 0;
            s = step(m, s, env(m, reset, now));
            const bool is = s.at(fired).as_bool();
            // Expiry is evaluated before this step's reset takes effect.
            if (was && !reset) CHECK(is);
            was = timelib::expired(m, 0, s);
        }
    }
}

TEST_CASE("finer clock ticks give the same expiry boundaries")
{
    auto m = timer_machine();
    const int fired = *m.find_location("fired");
    auto boundaries = [&](Millis tick, int per_second) {
        MachineState s = initial_state(m);
        std::vector<int> out;  // whole seconds at which fired is true
        for (int i = 1; i <= 10 * per_second; ++i) {
            const bool reset = i == 3 * per_second || i == 6 * per_second;
            s = step(m, s, env(m, reset, i * tick));
            if (i % per_second == 0 && s.at(fired).as_bool()) out.push_back(i / per_second);
        }
        return out;
    };
    const auto coarse = boundaries(1000, 1);
    CHECK(coarse == boundaries(500, 2));
    CHECK(coarse == boundaries(250, 4));
}
