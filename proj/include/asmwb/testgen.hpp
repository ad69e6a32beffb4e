#pragma once

// Random test generation for generated controller sources, and rule/branch
// coverage of the model measured during interpreted replay.

#include "asmwb/machine.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace asmwb {

struct TestSuiteSpec {
    int tests = 50;
    int steps = 50;
    std::uint64_t seed = 42;
    Duration clock_step{1000};
};

/// Test i is driven by RandomInputs seeded from (seed, i), so each trace is
/// reproducible on its own. Throws InvalidConfig for negative sizes.
std::vector<Trace> generate_traces(const MachineDefinition& machine, const TestSuiteSpec& spec);

/// A standalone test source with one test case per trace. It includes
/// `<Machine>.h`, builds with Catch2 when ASMWB_WITH_CATCH2 is defined and
/// with a small built-in harness otherwise. Throws TraceMachineMismatch.
std::string emit_tests(const std::vector<Trace>& traces, const MachineDefinition& machine);

struct CoverageReport {
    double rule_coverage = 0;    // own declared rules fired / declared
    double branch_coverage = 0;  // if outcomes (true and false) seen / 2 x ifs
    std::vector<std::string> rules_missed;
    std::size_t branches_total = 0;
    std::size_t branches_taken = 0;
};

/// Replays each trace's inputs from the initial state. Throws
/// TraceMachineMismatch when a replay diverges from its recorded states.
CoverageReport measure_coverage(const std::vector<Trace>& traces, const MachineDefinition& machine);

} // namespace asmwb
