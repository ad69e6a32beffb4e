#include "asmwb/models.hpp"

#include "asmwb/dsl.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef ASMWB_DEFAULT_ASSETS
#define ASMWB_DEFAULT_ASSETS "."
#endif

namespace asmwb {

namespace {

Duration millis(double seconds) { return Duration{static_cast<Millis>(std::llround(seconds * 1000.0))}; }

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& key, const std::string& text)
{
    try {
        size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "'" + key + "': not a number: '" + text + "'");
    }
}

Duration parse_duration(const std::string& key, const std::string& text)
{
    double scale = 1000.0;  // bare numbers are seconds
    std::string number = text;
    if (text.size() > 2 && text.ends_with("ms")) {
        scale = 1.0;
        number = text.substr(0, text.size() - 2);
    } else if (text.size() > 1 && text.ends_with("s")) {
        number = text.substr(0, text.size() - 1);
    }
    const double v = parse_number(key, trim(number)) * scale;
    if (!(v > 0)) throw Error(ErrorCode::InvalidConfig, "'" + key + "' must be positive, got '" + text + "'");
    return Duration{static_cast<Millis>(std::llround(v))};
}

std::string duration_text(Duration d)
{
    return d.ms % 1000 == 0 ? std::to_string(d.ms / 1000) + "s" : std::to_string(d.ms) + "ms";
}

struct Field {
    const char* key;
    Duration ControllerConfig::*member;
};

constexpr Field kFields[] = {
    {"inspirationDurPCV", &ControllerConfig::inspiration_dur_pcv},
    {"expirationDurPCV", &ControllerConfig::expiration_dur_pcv},
    {"minInspTimePSV", &ControllerConfig::min_insp_time_psv},
    {"maxInspTimePSV", &ControllerConfig::max_insp_time_psv},
    {"minExpTimePSV", &ControllerConfig::min_exp_time_psv},
    {"apneaLag", &ControllerConfig::apnea_lag},
    {"triggerWindowDelay", &ControllerConfig::trigger_window_delay},
    {"inPauseDur", &ControllerConfig::in_pause_dur},
    {"exPauseDur", &ControllerConfig::ex_pause_dur},
    {"rmDur", &ControllerConfig::rm_dur},
};

} // namespace

std::map<std::string, Duration> ControllerConfig::durations() const
{
    std::map<std::string, Duration> out;
    for (const auto& f : kFields) out[f.key] = this->*f.member;
    return out;
}

std::pair<Duration, Duration> pcv_durations(double rr, double ie_i, double ie_e)
{
    if (!(rr > 0)) throw Error(ErrorCode::InvalidConfig, "respiratory rate must be > 0");
    if (!(ie_i > 0) || !(ie_e > 0)) throw Error(ErrorCode::InvalidConfig, "I:E ratio parts must be > 0");
    const Duration cycle = millis(60.0 / rr);
    const Duration insp = millis(60.0 / rr * ie_i / (ie_i + ie_e));
    if (insp.ms <= 0 || insp.ms >= cycle.ms) throw Error(ErrorCode::InvalidConfig, "degenerate breathing cycle");
    return {insp, Duration{cycle.ms - insp.ms}};
}

ControllerConfig default_config() { return ControllerConfig{}; }

ControllerConfig test_config()
{
    ControllerConfig c;
    c.respiratory_rate = 10;
    std::tie(c.inspiration_dur_pcv, c.expiration_dur_pcv) = pcv_durations(10, 1, 2);
    c.min_insp_time_psv = Duration{1000};
    c.max_insp_time_psv = Duration{3000};
    c.min_exp_time_psv = Duration{1000};
    c.apnea_lag = Duration{3000};
    c.trigger_window_delay = Duration{1000};
    c.in_pause_dur = Duration{1000};
    c.ex_pause_dur = Duration{1000};
    c.rm_dur = Duration{2000};
    return c;
}

ControllerConfig parse_config(std::string_view text)
{
    ControllerConfig c;
    bool explicit_insp = false;
    bool explicit_exp = false;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "respiratoryRate") {
            c.respiratory_rate = parse_number(key, value);
            continue;
        }
        if (key == "ieRatio") {
            const auto colon = value.find(':');
            if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "ieRatio must look like 1:2");
            c.ie_inspiratory = parse_number(key, trim(value.substr(0, colon)));
            c.ie_expiratory = parse_number(key, trim(value.substr(colon + 1)));
            continue;
        }
        bool known = false;
        for (const auto& f : kFields) {
            if (key != f.key) continue;
            c.*f.member = parse_duration(key, value);
            explicit_insp |= key == "inspirationDurPCV";
            explicit_exp |= key == "expirationDurPCV";
            known = true;
        }
        if (!known) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    const auto [insp, exp] = pcv_durations(c.respiratory_rate, c.ie_inspiratory, c.ie_expiratory);
    if (!explicit_insp) c.inspiration_dur_pcv = insp;
    if (!explicit_exp) c.expiration_dur_pcv = exp;
    return c;
}

ControllerConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ControllerConfig& c)
{
    std::ostringstream out;
    out << "respiratoryRate = " << c.respiratory_rate << "\n";
    out << "ieRatio = " << c.ie_inspiratory << ":" << c.ie_expiratory << "\n";
    for (const auto& f : kFields) out << f.key << " = " << duration_text(c.*f.member) << "\n";
    return out.str();
}

void bind_config(MachineDefinition& m, const ControllerConfig& config)
{
    const auto values = config.durations();
    for (auto& t : m.timers) {
        if (t.config_key.empty()) continue;
        auto it = values.find(t.config_key);
        if (it == values.end())
            throw Error(ErrorCode::UnboundTimer, "timer '" + t.name + "' uses unknown configuration key '" + t.config_key + "'");
        t.duration = it->second;
    }
    m.finalize();
}

std::filesystem::path assets_dir()
{
    if (const char* env = std::getenv("ASMWB_ASSETS"); env && *env) return env;
    return ASMWB_DEFAULT_ASSETS;
}

std::filesystem::path model_path(int level)
{
    if (level < 0 || level >= kLevels) throw Error(ErrorCode::InvalidConfig, "model level must be 0..3, got " + std::to_string(level));
    return assets_dir() / "models" / ("MVMController0" + std::to_string(level) + ".asm");
}

std::filesystem::path glue_path(int from, int to)
{
    return assets_dir() / "glue" / ("MVMController0" + std::to_string(from) + "_0" + std::to_string(to) + ".glue");
}

MachineDefinition load(int level, const ControllerConfig& config)
{
    const auto path = model_path(level);
    MachineDefinition m;
    try {
        m = parse_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptedAsset, path.string() + ": " + e.what());
    }
    bind_config(m, config);
    return m;
}

} // namespace asmwb
