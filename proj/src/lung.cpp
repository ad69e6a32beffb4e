#include "asmwb/lung.hpp"

#include "asmwb/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace asmwb {

namespace {

Error bad(const std::string& what) { return Error(ErrorCode::InvalidLungParameters, what); }

bool effort_active(const LungPatient& p, double t)
{
    if (!p.effort) return false;
    return std::fmod(t, p.effort->period) < p.effort->width;
}

// Pressure the open valve connects to the airway; nullopt when both are closed.
std::optional<double> source_pressure(const VentCircuit& c)
{
    if (c.inspiratory_open && c.expiratory_open)
        throw Error(ErrorCode::BothValvesOpen, "inspiratory and expiratory valves are both open");
    if (c.inspiratory_open) return c.pinsp;
    if (c.expiratory_open) return c.peep;
    return std::nullopt;
}

} // namespace

void validate(const LungPatient& p, const VentCircuit& c)
{
    if (!(p.resistance > 0) || !std::isfinite(p.resistance)) throw bad("resistance must be positive");
    if (!(p.compliance > 0) || !std::isfinite(p.compliance)) throw bad("compliance must be positive");
    if (!std::isfinite(p.alveolar_pressure)) throw bad("alveolar pressure must be finite");
    if (!(c.peep >= 0) || !(c.pinsp > c.peep)) throw bad("need pinsp > peep >= 0");
    if (!(c.its >= 0)) throw bad("its must be non-negative");
    if (!(c.flow_peak_fraction > 0 && c.flow_peak_fraction < 1)) throw bad("flowPeakFraction must lie in (0, 1)");
    if (p.effort) {
        const auto& e = *p.effort;
        if (!(e.period > 0) || !(e.width > 0) || !(e.width < e.period)) throw bad("effort needs 0 < width < period");
        if (!(e.magnitude >= 0)) throw bad("effort magnitude must be non-negative");
    }
}

LungSample observe(const LungPatient& p, const VentCircuit& c)
{
    LungSample s;
    s.t = p.time;
    s.palv = p.alveolar_pressure;
    if (auto src = source_pressure(c)) {
        // The patient's pull shows at the airway opening before the source
        // catches up; that dip is what the trigger detector looks for.
        s.paw = *src - (effort_active(p, p.time) ? p.effort->magnitude : 0.0);
        s.flow = (*src - p.alveolar_pressure) / p.resistance;
    } else {
        s.paw = p.alveolar_pressure;  // no flow: the airway reads the plateau
        s.flow = 0.0;
    }
    return s;
}

std::pair<LungPatient, LungSample> step_lung(const LungPatient& patient, const VentCircuit& circuit, double dt)
{
    if (!(dt > 0)) throw bad("dt must be positive");
    if (dt > patient.tau() / 10 * (1 + 1e-12)) throw bad("dt must not exceed RC/10");
    LungPatient next = patient;
    if (auto src = source_pressure(circuit))
        next.alveolar_pressure = *src + (patient.alveolar_pressure - *src) * std::exp(-dt / patient.tau());
    next.time = patient.time + dt;
    if (effort_active(next, next.time) && !effort_active(patient, patient.time))
        next.alveolar_pressure -= next.effort->magnitude;
    return {next, observe(next, circuit)};
}

LungEvents EventDetector::observe(const LungSample& s, const VentCircuit& c)
{
    LungEvents ev;
    const bool expiring = c.expiratory_open && !c.inspiratory_open;
    const bool inspiring = c.inspiratory_open && !c.expiratory_open;

    if (!expiring) {
        drop_armed_ = true;
    } else if (drop_armed_ && s.paw < c.peep - c.its) {
        ev.drop_paw_its = true;
        drop_armed_ = false;
    }

    if (inspiring && !was_inspiring_) peak_flow_ = 0.0;
    if (inspiring) {
        peak_flow_ = std::max(peak_flow_, s.flow);
        ev.flow_drop_psv = peak_flow_ > 0 && s.flow < c.flow_peak_fraction * peak_flow_;
    }
    was_inspiring_ = inspiring;
    return ev;
}

LungEvents detect_events(std::span<const LungSample> history, const VentCircuit& circuit)
{
    EventDetector d;
    LungEvents last;
    for (const auto& s : history) last = d.observe(s, circuit);
    return last;
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(" \t\r") - b + 1));
}

double number(const std::string& key, const std::string& text)
{
    double v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) throw bad("'" + key + "' is not a number: '" + text + "'");
    return v;
}

} // namespace

LungProfile parse_lung_profile(std::string_view text)
{
    LungProfile p;
    EffortProfile effort;
    bool has_effort = false;
    bool effort_fields = false;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw bad("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const double v = number(key, trim(std::string_view(line).substr(eq + 1)));
        if (key == "resistance") p.patient.resistance = v;
        else if (key == "compliance") p.patient.compliance = v;
        else if (key == "alveolarPressure") p.patient.alveolar_pressure = v;
        else if (key == "pinsp") p.circuit.pinsp = v;
        else if (key == "peep") p.circuit.peep = v;
        else if (key == "its") p.circuit.its = v;
        else if (key == "flowPeakFraction") p.circuit.flow_peak_fraction = v;
        else if (key == "effortPeriod") effort.period = v, has_effort = true;
        else if (key == "effortWidth") effort.width = v, effort_fields = true;
        else if (key == "effortMagnitude") effort.magnitude = v, effort_fields = true;
        else throw bad("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (effort_fields && !has_effort) throw bad("effortWidth/effortMagnitude need effortPeriod");
    if (has_effort) p.patient.effort = effort;
    validate(p.patient, p.circuit);
    return p;
}

LungProfile load_lung_profile(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw bad("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_lung_profile(ss.str());
}

std::string format_lung_profile(const LungProfile& p)
{
    std::ostringstream out;
    out.precision(17);
    out << "resistance = " << p.patient.resistance << "\n"
        << "compliance = " << p.patient.compliance << "\n"
        << "alveolarPressure = " << p.patient.alveolar_pressure << "\n"
        << "pinsp = " << p.circuit.pinsp << "\n"
        << "peep = " << p.circuit.peep << "\n"
        << "its = " << p.circuit.its << "\n"
        << "flowPeakFraction = " << p.circuit.flow_peak_fraction << "\n";
    if (p.patient.effort)
        out << "effortPeriod = " << p.patient.effort->period << "\n"
            << "effortWidth = " << p.patient.effort->width << "\n"
            << "effortMagnitude = " << p.patient.effort->magnitude << "\n";
    return out.str();
}

std::string waveform_csv(std::span<const LungSample> samples)
{
    std::ostringstream out;
    out << "t,Paw,Palv,flow,events\n";
    for (const auto& s : samples) {
        out << s.t << ',' << s.paw << ',' << s.palv << ',' << s.flow << ',';
        if (s.events.drop_paw_its) out << "dropPAW_ITS";
        if (s.events.drop_paw_its && s.events.flow_drop_psv) out << '|';
        if (s.events.flow_drop_psv) out << "flowDropPSV";
        out << '\n';
    }
    return out.str();
}

std::vector<LungSample> simulate(LungPatient patient, const VentCircuit& circuit, double seconds, double dt)
{
    validate(patient, circuit);
    EventDetector detector;
    std::vector<LungSample> out;
    out.push_back(observe(patient, circuit));
    out.back().events = detector.observe(out.back(), circuit);
    const auto steps = static_cast<long>(std::llround(seconds / dt));
    for (long i = 0; i < steps; ++i) {
        auto [next, sample] = step_lung(patient, circuit, dt);
        sample.events = detector.observe(sample, circuit);
        patient = next;
        out.push_back(sample);
    }
    return out;
}

} // namespace asmwb
