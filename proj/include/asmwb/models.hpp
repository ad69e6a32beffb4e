#pragma once

// The bundled ventilator controller models (levels 0..3), their timing
// configuration, and the asset directory holding models, properties,
// scenarios and glue files.

#include "asmwb/machine.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace asmwb {

struct ControllerConfig {
    double respiratory_rate = 12;  // breaths per minute
    double ie_inspiratory = 1;     // I:E ratio, I part
    double ie_expiratory = 2;      // I:E ratio, E part
    Duration inspiration_dur_pcv{1667};
    Duration expiration_dur_pcv{3333};
    Duration min_insp_time_psv{300};
    Duration max_insp_time_psv{3000};
    Duration min_exp_time_psv{500};
    Duration apnea_lag{30000};
    Duration trigger_window_delay{300};
    Duration in_pause_dur{1000};
    Duration ex_pause_dur{1000};
    Duration rm_dur{1000};

    /// Configuration keys used by the models' timer bindings.
    [[nodiscard]] std::map<std::string, Duration> durations() const;
    bool operator==(const ControllerConfig&) const = default;
};

/// PCV phase durations from respiratory rate and I:E ratio. Throws InvalidConfig.
std::pair<Duration, Duration> pcv_durations(double respiratory_rate, double ie_inspiratory, double ie_expiratory);

ControllerConfig default_config();

/// Slow clinical-looking timings for 1 s/step test harnesses (RR 10, I:E 1:2).
ControllerConfig test_config();

/// `key = value` lines; `#` comments. Durations accept `ms` or `s` suffixes;
/// `ieRatio` is `I:E`. Phase durations are recomputed from RR and I:E unless
/// given explicitly. Throws InvalidConfig.
ControllerConfig parse_config(std::string_view text);
ControllerConfig load_config(const std::filesystem::path& path);
std::string format_config(const ControllerConfig& config);

/// Binds every timer with a configuration key. Throws UnboundTimer for
/// keys the configuration does not provide.
void bind_config(MachineDefinition& machine, const ControllerConfig& config);

/// Root of the bundled assets; $ASMWB_ASSETS overrides the build-time default.
std::filesystem::path assets_dir();
std::filesystem::path model_path(int level);
/// glue/MVMController0<from>_0<to>.glue
std::filesystem::path glue_path(int from, int to);

inline constexpr int kLevels = 4;

/// Parses the bundled model of `level` and binds `config`. Throws
/// CorruptedAsset when the asset is missing or does not parse.
MachineDefinition load(int level, const ControllerConfig& config = default_config());

} // namespace asmwb
