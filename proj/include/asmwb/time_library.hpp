#pragma once

// Timer semantics over a monotonically non-decreasing monitored clock.
// Timers are static functions of the Timer domain; each owns two library
// locations, start(t) and duration(t).

#include "asmwb/machine.hpp"

namespace asmwb::timelib {

inline constexpr const char* kClock = "mCurrTimeSecs";

/// The library as a stand-alone module (signature and rule declarations only).
MachineDefinition module();

/// Adds the library signature and rules to a machine that imports it.
void declare(MachineDefinition& machine);

/// start(timer) := now.
UpdateSet reset_timer(const MachineDefinition& machine, int timer, Instant now);

/// duration(timer) := d.
UpdateSet set_duration(const MachineDefinition& machine, int timer, Duration d);

[[nodiscard]] Duration elapsed(const MachineDefinition& machine, int timer, const MachineState& state, Instant now);

/// True iff now - start >= duration (inclusive boundary).
[[nodiscard]] bool expired(const MachineDefinition& machine, int timer, const MachineState& state, Instant now);
[[nodiscard]] inline bool expired(const MachineDefinition& machine, int timer, const MachineState& state)
{
    return expired(machine, timer, state, state.clock);
}

/// Clock reading for the test harness convention: step k reads k seconds.
[[nodiscard]] inline Instant seconds(double s) { return Instant{static_cast<Millis>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5))}; }

} // namespace asmwb::timelib
