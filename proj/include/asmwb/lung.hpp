#pragma once

// Single-compartment lung: airway resistance R in series with compliance C,
// driven by the pressure source the valves connect to the airway.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asmwb {

/// Periodic inspiratory effort: a muscle pull of `magnitude` cmH2O lasting
/// `width` seconds at the start of every `period`.
struct EffortProfile {
    double period = 4.0;
    double width = 0.2;
    double magnitude = 3.0;
    bool operator==(const EffortProfile&) const = default;
};

struct LungPatient {
    double resistance = 10.0;         // cmH2O / (L/s)
    double compliance = 0.05;         // L / cmH2O
    double alveolar_pressure = 5.0;   // cmH2O
    std::optional<EffortProfile> effort;
    double time = 0.0;                // seconds simulated so far

    [[nodiscard]] double tau() const { return resistance * compliance; }
    bool operator==(const LungPatient&) const = default;
};

struct VentCircuit {
    double pinsp = 20.0;               // cmH2O
    double peep = 5.0;                 // cmH2O
    bool inspiratory_open = false;
    bool expiratory_open = true;
    double its = 2.0;                  // trigger sensitivity below PEEP, cmH2O
    double flow_peak_fraction = 0.3;
    bool operator==(const VentCircuit&) const = default;
};

struct LungEvents {
    bool drop_paw_its = false;
    bool flow_drop_psv = false;
    bool operator==(const LungEvents&) const = default;
};

struct LungSample {
    double t = 0.0;       // s
    double paw = 0.0;     // cmH2O at the airway opening
    double palv = 0.0;    // cmH2O
    double flow = 0.0;    // L/s, positive into the patient
    LungEvents events;
    bool operator==(const LungSample&) const = default;
};

/// Throws InvalidLungParameters unless R, C > 0, Pinsp > PEEP >= 0,
/// 0 < flowPeakFraction < 1 and the effort (if any) is well formed.
void validate(const LungPatient& patient, const VentCircuit& circuit);

/// Signals at the patient's current time, without advancing. Events are
/// left empty. Throws BothValvesOpen.
LungSample observe(const LungPatient& patient, const VentCircuit& circuit);

/// Advances the patient by `dt` seconds with the valves held. Within the
/// step the source pressure is constant, so Palv follows the exact RC
/// solution. Returns the advanced patient and its sample at the new time.
/// Throws BothValvesOpen, InvalidLungParameters (dt <= 0 or dt > RC/10).
std::pair<LungPatient, LungSample> step_lung(const LungPatient& patient, const VentCircuit& circuit, double dt);

/// Incremental event detection over a stream of samples.
class EventDetector {
public:
    /// Events of `sample`, given everything observed before it.
    LungEvents observe(const LungSample& sample, const VentCircuit& circuit);

private:
    bool drop_armed_ = true;
    bool was_inspiring_ = false;
    double peak_flow_ = 0.0;
};

/// Events of the last sample in `history`; empty history gives none.
LungEvents detect_events(std::span<const LungSample> history, const VentCircuit& circuit);

/// Patient plus circuit settings, as stored in a profile file.
struct LungProfile {
    LungPatient patient;
    VentCircuit circuit;
    bool operator==(const LungProfile&) const = default;
};

/// `key = value` lines with `#` comments. Keys: resistance, compliance,
/// alveolarPressure, pinsp, peep, its, flowPeakFraction, effortPeriod,
/// effortWidth, effortMagnitude (the effort is present when its period is
/// given). Times in seconds. Throws InvalidLungParameters.
LungProfile parse_lung_profile(std::string_view text);
LungProfile load_lung_profile(const std::filesystem::path& path);
std::string format_lung_profile(const LungProfile& profile);

/// Columns t,Paw,Palv,flow,events; events joined with '|'.
std::string waveform_csv(std::span<const LungSample> samples);

/// Drives the lung for `seconds` with fixed valves and dt, detecting events.
std::vector<LungSample> simulate(LungPatient patient, const VentCircuit& circuit, double seconds, double dt);

} // namespace asmwb
