#pragma once

// C++ emission for a machine: a class with double-buffered controlled
// locations (slot 0 current, slot 1 next), the pin binding skeleton, and the
// microcontroller runtime (input/output procedures plus the cyclic loop).

#include "asmwb/machine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace asmwb {

struct SourceBundle {
    std::string header_name;          // <Machine>.h
    std::string implementation_name;  // <Machine>.cpp
    std::string header;
    std::string implementation;
};

/// Deterministic. Only rules and derived functions reachable from the main
/// rule are emitted. Throws UnsupportedConstruct when a model identifier
/// cannot be used as a C++ name or two emitted names collide.
SourceBundle generate_source(const MachineDefinition& machine);

enum class PinMode { DigitalIn, DigitalOut, AnalogIn, AnalogOut };

const char* pin_mode_name(PinMode mode);

struct PinBinding {
    PinMode mode = PinMode::DigitalIn;
    std::string function;
    std::string pin;  // empty until the user fills it in
    /// "activeHigh" (the default): true, or an enum's second literal, is
    /// HIGH, so the first literal is LOW. "activeLow" inverts both.
    std::optional<std::string> polarity;

    bool operator==(const PinBinding&) const = default;
};

struct PinConfig {
    std::string arduino_version = "UNO";
    int step_time = 0;  // ms between loop iterations
    std::vector<PinBinding> bindings;

    bool operator==(const PinConfig&) const = default;
};

/// One binding per monitored and controlled function, pins left empty.
/// Booleans and two-literal enums are digital, wider enums analog.
PinConfig generate_pin_config(const MachineDefinition& machine);

std::string format_pin_config(const PinConfig& config);
/// Parses and validates against `machine`: known modes and functions,
/// monitored -> IN and controlled -> OUT, digital only for two-valued types,
/// no duplicate functions or pins. Throws InvalidPinConfig.
PinConfig parse_pin_config(std::string_view json, const MachineDefinition& machine);
PinConfig load_pin_config(const std::string& path, const MachineDefinition& machine);

struct RuntimeBundle {
    std::string hardware_name;  // <Machine>_hw.cpp
    std::string loop_name;      // <Machine>.ino
    std::string hardware;
    std::string loop;
};

/// Throws IncompletePinConfig when a monitored function is unbound or a
/// binding has no pin; controlled functions may stay unbound (not driven).
RuntimeBundle generate_runtime(const MachineDefinition& machine, const PinConfig& config);

/// Variable name used for the machine instance in emitted loops and tests.
std::string instance_name(const MachineDefinition& machine);

} // namespace asmwb
