#pragma once

// Validation scenarios: `set loc := value;`, `step`, `check <proposition>;`.
// Monitored values persist across steps until set again; unset ones read as
// false or the first literal of their domain. The clock advances one second
// per step unless `set mCurrTimeSecs := <seconds>;` fixes it.

#include "asmwb/machine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace asmwb {

struct ScenarioCommand {
    enum class Kind { Set, Step, Check };
    Kind kind = Kind::Step;
    std::string location;  // Set
    std::string value;     // Set: value text; Check: proposition text
    SourcePos pos;
};

struct Scenario {
    std::vector<ScenarioCommand> commands;
};

Scenario parse_scenario(std::string_view text);
/// Also rejects sets of non-monitored locations (SetOnControlled) and
/// checks that do not resolve against `machine`.
Scenario parse_scenario(std::string_view text, const MachineDefinition& machine);
Scenario load_scenario(const std::string& path);
std::string format_scenario(const Scenario& scenario);

struct FailedCheck {
    std::size_t index = 0;  // command index
    std::size_t step = 0;   // steps executed before the check
    std::string proposition;
    std::string expected;
    std::string actual;
};

struct ScenarioResult {
    std::optional<FailedCheck> failure;
    Trace trace;
    std::size_t checks_passed = 0;

    [[nodiscard]] bool passed() const { return !failure.has_value(); }
};

ScenarioResult run_scenario(const MachineDefinition& machine, const Scenario& scenario);

} // namespace asmwb
