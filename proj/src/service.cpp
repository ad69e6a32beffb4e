#include "asmwb/service.hpp"

#include "asmwb/interpreter.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace asmwb {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kEventInputs[] = {"dropPAW_ITS", "flowDropPSV", "pawGTMaxPinsp"};

bool is_event_input(std::string_view name)
{
    for (auto e : kEventInputs)
        if (e == name) return true;
    return false;
}

// Lung signal behind an event input; overpressure is never produced by the
// model, so pawGTMaxPinsp only comes from operator overrides.
bool lung_event(std::string_view name, const LungEvents& ev)
{
    if (name == "dropPAW_ITS") return ev.drop_paw_its;
    if (name == "flowDropPSV") return ev.flow_drop_psv;
    return false;
}

LungEvents& operator|=(LungEvents& a, const LungEvents& b)
{
    a.drop_paw_its |= b.drop_paw_its;
    a.flow_drop_psv |= b.flow_drop_psv;
    return a;
}

std::size_t substeps_per_tick(const SessionSettings& s)
{
    const double n = static_cast<double>(s.tick.ms) / 1000.0 / s.lung_dt;
    const auto rounded = std::llround(n);
    if (rounded < 1 || std::abs(n - static_cast<double>(rounded)) > 1e-9)
        throw Error(ErrorCode::InvalidConfig, "tick must be a whole number of lung sub-steps");
    return static_cast<std::size_t>(rounded);
}

void validate_settings(const SessionSettings& s)
{
    if (s.tick.ms <= 0) throw Error(ErrorCode::InvalidConfig, "tick must be positive");
    if (!(s.lung_dt > 0)) throw Error(ErrorCode::InvalidConfig, "lung dt must be positive");
    if (s.lung_dt * 1000.0 > static_cast<double>(s.tick.ms))
        throw Error(ErrorCode::InvalidConfig, "tick must not be shorter than the lung dt");
    if (!(s.speed > 0)) throw Error(ErrorCode::InvalidConfig, "speed must be positive");
    substeps_per_tick(s);
    validate(s.lung.patient, s.lung.circuit);
    if (s.lung_dt > s.lung.patient.tau() / 10)
        throw Error(ErrorCode::InvalidLungParameters, "lung dt exceeds RC/10 for this patient");
}

// Valve positions commanded by a controller state; machines without valves
// leave the patient connected to PEEP.
VentCircuit circuit_for(const MachineDefinition& m, const MachineState& s, VentCircuit c)
{
    auto valve = [&](std::string_view name, bool fallback) {
        auto loc = m.find_location(name);
        if (!loc) return fallback;
        return m.value_to_string(s.at(*loc)) == "OPEN";
    };
    c.inspiratory_open = valve("iValve", false);
    c.expiratory_open = valve("oValve", true);
    return c;
}

bool apnea_of(const MachineDefinition& m, const MachineState& s)
{
    auto loc = m.find_location("apneaBackupMode");
    return loc && s.at(*loc).as_bool();
}

ojson value_json(const MachineDefinition& m, const Value& v)
{
    if (v.is_boolean()) return v.as_bool();
    if (v.kind() == ValueKind::Duration || v.kind() == ValueKind::Instant) return v.raw();
    return m.value_to_string(v);
}

ojson events_json(const LungEvents& ev)
{
    ojson out = ojson::array();
    if (ev.drop_paw_its) out.push_back("dropPAW_ITS");
    if (ev.flow_drop_psv) out.push_back("flowDropPSV");
    return out;
}

LungEvents events_from_json(const json& j)
{
    LungEvents ev;
    for (const auto& e : j) {
        ev.drop_paw_its |= e == "dropPAW_ITS";
        ev.flow_drop_psv |= e == "flowDropPSV";
    }
    return ev;
}

// Advances the lung through one tick; events are OR-ed over the sub-steps.
LungSample lung_tick(LungPatient& patient, EventDetector& detector, const VentCircuit& circuit, std::size_t substeps,
                     double dt)
{
    LungSample last;
    LungEvents seen;
    for (std::size_t i = 0; i < substeps; ++i) {
        auto [next, sample] = step_lung(patient, circuit, dt);
        sample.events = detector.observe(sample, circuit);
        seen |= sample.events;
        patient = next;
        last = sample;
    }
    last.events = seen;
    return last;
}

} // namespace

const char* session_status_name(SessionStatus s)
{
    switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Stopped: return "stopped";
    }
    return "?";
}

bool is_momentary(std::string_view c)
{
    return c == "cmdInPause" || c == "cmdExPause" || c == "cmdRm" || c == "stopRequested" || c == "startVentilation" ||
           is_event_input(c);
}

Session::Session(std::string id, SessionSettings settings, std::optional<std::filesystem::path> log_file)
    : id_(std::move(id)), settings_(std::move(settings)), log_file_(std::move(log_file))
{
    validate_settings(settings_);
    machine_ = load(settings_.level, settings_.config);
    patient_ = settings_.lung.patient;
    if (log_file_) std::ofstream(*log_file_, std::ios::trunc);

    SessionSample first;
    first.state = initial_state(machine_);
    first.inputs = default_environment(machine_, Instant{0});
    const auto circuit = circuit_for(machine_, first.state, settings_.lung.circuit);
    first.lung = observe(patient_, circuit);
    first.lung.events = detector_.observe(first.lung, circuit);
    tick_events_ = first.lung.events;
    first.apnea = apnea_of(machine_, first.state);
    commit(std::move(first));

    if (settings_.realtime) thread_ = std::thread([this] { run_loop(); });
}

Session::~Session()
{
    quit_ = true;
    samples_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

SessionStatus Session::status() const
{
    std::lock_guard lock(samples_mx_);
    return status_;
}

std::optional<std::string> Session::fault() const
{
    std::lock_guard lock(samples_mx_);
    return fault_;
}

CommandAck Session::submit(const OperatorCommand& command)
{
    const auto slot = machine_.find_monitored_slot(command.name);
    if (!slot)
        throw Error(ErrorCode::InvalidCommand, "'" + command.name + "' is not an input of " + machine_.name);
    const int fn = machine_.monitored.at(static_cast<size_t>(*slot));
    if (!machine_.parse_value(command.value, machine_.function_type(fn)))
        throw Error(ErrorCode::InvalidCommand, "bad value '" + command.value + "' for " + command.name);
    std::lock_guard lock(queue_mx_);
    CommandAck ack{next_sequence_++, command.name, command.value};
    queue_.emplace_back(ack.sequence, command);
    return ack;
}

void Session::step(std::size_t count)
{
    if (settings_.realtime) throw Error(ErrorCode::InvalidCommand, "realtime sessions step on their own");
    for (std::size_t i = 0; i < count; ++i) {
        if (status() != SessionStatus::Running) return;
        advance();
    }
}

void Session::pause()
{
    std::lock_guard lock(samples_mx_);
    if (status_ == SessionStatus::Running) status_ = SessionStatus::Paused;
}

void Session::resume()
{
    std::lock_guard lock(samples_mx_);
    if (status_ == SessionStatus::Paused) status_ = SessionStatus::Running;
}

void Session::stop() { halt(SessionStatus::Stopped, std::nullopt); }

void Session::halt(SessionStatus status, std::optional<std::string> fault)
{
    {
        std::lock_guard lock(samples_mx_);
        if (status_ == SessionStatus::Stopped) return;
        status_ = status;
        if (fault) fault_ = std::move(fault);
    }
    quit_ = true;
    samples_cv_.notify_all();
}

void Session::run_loop()
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double, std::milli>(static_cast<double>(settings_.tick.ms) / settings_.speed));
    auto next = clock::now() + period;
    std::unique_lock lock(samples_mx_);
    while (!quit_) {
        samples_cv_.wait_until(lock, next, [&] { return quit_.load(); });
        if (quit_) break;
        next += period;
        if (status_ != SessionStatus::Running) continue;
        lock.unlock();
        advance();
        lock.lock();
    }
}

void Session::advance()
{
    std::lock_guard writer(writer_);
    const SessionSample prev = snapshot();
    if (prev.step >= settings_.max_steps) {
        halt(SessionStatus::Stopped, "ResourceLimit: session reached " + std::to_string(settings_.max_steps) + " steps");
        return;
    }

    SessionSample next;
    next.step = prev.step + 1;
    {
        std::lock_guard lock(queue_mx_);
        for (auto& [seq, cmd] : queue_) {
            const int slot = *machine_.find_monitored_slot(cmd.name);
            const Value v = *machine_.parse_value(cmd.value, machine_.function_type(machine_.monitored[static_cast<size_t>(slot)]));
            if (is_event_input(cmd.name))
                overrides_[slot] = v;
            else if (is_momentary(cmd.name))
                momentary_[slot] = v;
            else
                latched_[slot] = v;
            next.commands.push_back({seq, cmd.name, cmd.value});
        }
        queue_.clear();
    }

    Environment env = default_environment(machine_, Instant{static_cast<Millis>(next.step) * settings_.tick.ms});
    for (size_t slot = 0; slot < machine_.monitored.size(); ++slot) {
        const auto& name = machine_.functions[static_cast<size_t>(machine_.monitored[slot])].name;
        const int s = static_cast<int>(slot);
        if (is_event_input(name)) {
            const bool pulse = overrides_.count(s) && overrides_.at(s).as_bool();
            env.monitored[slot] = Value::boolean(pulse || lung_event(name, tick_events_));
        } else if (momentary_.count(s)) {
            env.monitored[slot] = momentary_.at(s);
        } else if (latched_.count(s)) {
            env.monitored[slot] = latched_.at(s);
        }
    }

    try {
        next.state = asmwb::step(machine_, prev.state, env);
    } catch (const Error& e) {
        halt(SessionStatus::Stopped, e.what());
        return;
    }
    next.inputs = std::move(env);
    for (size_t slot = 0; slot < next.state.env.monitored.size(); ++slot) {
        if (!next.state.env.monitored[slot]) continue;
        momentary_.erase(static_cast<int>(slot));
        overrides_.erase(static_cast<int>(slot));
    }

    try {
        const auto circuit = circuit_for(machine_, next.state, settings_.lung.circuit);
        next.lung = lung_tick(patient_, detector_, circuit, substeps_per_tick(settings_), settings_.lung_dt);
    } catch (const Error& e) {
        halt(SessionStatus::Stopped, e.what());
        return;
    }
    tick_events_ = next.lung.events;
    next.apnea = apnea_of(machine_, next.state);
    commit(std::move(next));
}

void Session::commit(SessionSample sample)
{
    std::string line = to_json(sample).dump();
    if (log_file_) std::ofstream(*log_file_, std::ios::app) << line << '\n';
    {
        std::lock_guard lock(samples_mx_);
        samples_.push_back(std::move(sample));
        log_lines_.push_back(std::move(line));
    }
    samples_cv_.notify_all();
}

SessionSample Session::snapshot() const
{
    std::lock_guard lock(samples_mx_);
    return samples_.back();
}

std::size_t Session::sample_count() const
{
    std::lock_guard lock(samples_mx_);
    return samples_.size();
}

std::optional<SessionSample> Session::wait_sample(std::size_t index, std::chrono::milliseconds timeout) const
{
    std::unique_lock lock(samples_mx_);
    samples_cv_.wait_for(lock, timeout, [&] { return index < samples_.size() || status_ == SessionStatus::Stopped; });
    if (index < samples_.size()) return samples_[index];
    return std::nullopt;
}

ojson Session::to_json(const SessionSample& s) const
{
    ojson j;
    j["step"] = s.step;
    j["timeMs"] = s.state.clock.ms;
    ojson controlled = ojson::object();
    ojson timers = ojson::object();
    for (size_t loc = 0; loc < machine_.locations.size(); ++loc) {
        const auto& info = machine_.locations[loc];
        const Value& v = s.state.controlled[loc];
        if (info.timer < 0) {
            controlled[info.name] = value_json(machine_, v);
        } else {
            const auto& tname = machine_.timers[static_cast<size_t>(info.timer)].name;
            timers[tname][v.kind() == ValueKind::Instant ? "startMs" : "durationMs"] = v.raw();
        }
    }
    j["controlled"] = std::move(controlled);
    j["timers"] = std::move(timers);
    ojson inputs = ojson::object();
    ojson read = ojson::array();
    for (size_t slot = 0; slot < machine_.monitored.size(); ++slot) {
        const auto& name = machine_.functions[static_cast<size_t>(machine_.monitored[slot])].name;
        if (slot < s.inputs.monitored.size() && s.inputs.monitored[slot])
            inputs[name] = value_json(machine_, *s.inputs.monitored[slot]);
        if (slot < s.state.env.monitored.size() && s.state.env.monitored[slot]) read.push_back(name);
    }
    j["inputs"] = std::move(inputs);
    j["read"] = std::move(read);
    ojson commands = ojson::array();
    for (const auto& c : s.commands)
        commands.push_back({{"sequence", c.sequence}, {"command", c.name}, {"value", c.value}});
    j["commands"] = std::move(commands);
    j["lung"] = {{"t", s.lung.t}, {"paw", s.lung.paw}, {"palv", s.lung.palv}, {"flow", s.lung.flow},
                 {"events", events_json(s.lung.events)}};
    j["alarms"] = {{"apnea", s.apnea}};
    return j;
}

ojson Session::info() const
{
    ojson j;
    j["id"] = id_;
    j["level"] = settings_.level;
    j["machine"] = machine_.name;
    std::lock_guard lock(samples_mx_);
    j["status"] = session_status_name(status_);
    j["steps"] = samples_.size() - 1;
    j["tickMs"] = settings_.tick.ms;
    j["lungDtMs"] = settings_.lung_dt * 1000.0;
    j["realtime"] = settings_.realtime;
    j["fault"] = fault_ ? ojson(*fault_) : ojson(nullptr);
    return j;
}

std::string Session::log() const
{
    std::lock_guard lock(samples_mx_);
    std::string out;
    for (const auto& l : log_lines_) out += l + '\n';
    return out;
}

std::shared_ptr<Session> SessionManager::create(SessionSettings settings)
{
    std::lock_guard lock(mx_);
    if (sessions_.size() >= max_sessions_)
        throw Error(ErrorCode::ResourceLimit, "at most " + std::to_string(max_sessions_) + " sessions");
    const std::string id = "s" + std::to_string(next_id_++);
    std::optional<std::filesystem::path> log;
    if (log_dir_) {
        std::filesystem::create_directories(*log_dir_);
        log = *log_dir_ / (id + ".jsonl");
    }
    auto s = std::make_shared<Session>(id, std::move(settings), log);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const
{
    std::lock_guard lock(mx_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    return it->second;
}

void SessionManager::remove(const std::string& id)
{
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(mx_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
        s = it->second;
        sessions_.erase(it);
    }
    s->stop();
}

std::vector<std::string> SessionManager::ids() const
{
    std::lock_guard lock(mx_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

namespace {

std::string scalar_text(const json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw Error(ErrorCode::InvalidConfig, "expected a scalar, got " + v.dump());
}

// {"key": value} -> "key = value" lines for the plain-text parsers.
std::string key_values(const json& obj)
{
    std::string out;
    for (const auto& [k, v] : obj.items()) out += k + " = " + scalar_text(v) + "\n";
    return out;
}

} // namespace

SessionSettings settings_from_json(const json& r)
{
    if (!r.is_object()) throw Error(ErrorCode::InvalidConfig, "session request must be a JSON object");
    static const std::set<std::string> known{"level", "config", "patient", "tickMs", "lungDtMs", "realtime", "speed"};
    for (const auto& [k, v] : r.items())
        if (!known.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown field '" + k + "'");
    SessionSettings s;
    try {
        s.level = r.value("level", 3);
        if (s.level < 0 || s.level >= kLevels) throw Error(ErrorCode::InvalidConfig, "level must be 0..3");
        if (r.contains("config")) {
            const auto& c = r["config"];
            if (c == "default")
                s.config = default_config();
            else if (c == "test")
                s.config = test_config();
            else if (c.is_object())
                s.config = parse_config(key_values(c));
            else
                throw Error(ErrorCode::InvalidConfig, "config must be \"default\", \"test\" or an object");
        }
        if (r.contains("patient")) {
            const auto& p = r["patient"];
            if (p.is_string()) {
                const auto name = p.get<std::string>();
                if (name.empty() || name.find_first_of("/\\.") != std::string::npos)
                    throw Error(ErrorCode::InvalidConfig, "bad patient profile name '" + name + "'");
                s.lung = load_lung_profile(assets_dir() / "patients" / (name + ".profile"));
            } else if (p.is_object()) {
                s.lung = parse_lung_profile(key_values(p));
            } else {
                throw Error(ErrorCode::InvalidConfig, "patient must be a profile name or an object");
            }
        }
        if (r.contains("tickMs")) s.tick = Duration{r["tickMs"].get<Millis>()};
        if (r.contains("lungDtMs")) s.lung_dt = r["lungDtMs"].get<double>() / 1000.0;
        s.realtime = r.value("realtime", true);
        s.speed = r.value("speed", 1.0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    validate_settings(s);
    return s;
}

ReplayReport replay_log(std::string_view jsonl, const SessionSettings& settings)
{
    ReplayReport report;
    const auto m = load(settings.level, settings.config);
    const auto substeps = substeps_per_tick(settings);

    auto controlled_matches = [&](const MachineState& st, const json& j) {
        for (size_t loc = 0; loc < m.locations.size(); ++loc) {
            const auto& info = m.locations[loc];
            const Value& v = st.controlled[loc];
            json logged;
            if (info.timer < 0) {
                logged = j.at("controlled").at(info.name);
                const auto want = logged.is_boolean() ? (logged.get<bool>() ? "true" : "false") : logged.get<std::string>();
                if (m.value_to_string(v) != want) return false;
            } else {
                const auto& t = j.at("timers").at(m.timers[static_cast<size_t>(info.timer)].name);
                if (t.at(v.kind() == ValueKind::Instant ? "startMs" : "durationMs").get<Millis>() != v.raw()) return false;
            }
        }
        return true;
    };
    auto lung_matches = [](const LungSample& s, const json& j) {
        return j.at("t").get<double>() == s.t && j.at("paw").get<double>() == s.paw && j.at("palv").get<double>() == s.palv &&
               j.at("flow").get<double>() == s.flow && events_from_json(j.at("events")) == s.events;
    };

    LungPatient patient = settings.lung.patient;
    EventDetector detector;
    MachineState state = initial_state(m);
    LungEvents events;
    std::map<int, bool> pending;  // event overrides not yet read
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t index = 0;
    auto flag = [&](std::optional<std::size_t>& slot, const std::string& why) {
        if (!slot) {
            slot = index;
            if (report.detail.empty()) report.detail = "step " + std::to_string(index) + ": " + why;
        }
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.at("step").get<std::size_t>() != index) flag(report.controlled_mismatch, "step numbering gap");
        report.apnea_raised |= j.at("alarms").at("apnea").get<bool>();
        LungSample lung;
        if (index == 0) {
            const auto circuit = circuit_for(m, state, settings.lung.circuit);
            lung = observe(patient, circuit);
            lung.events = detector.observe(lung, circuit);
        } else {
            Environment env;
            env.clock = Instant{static_cast<Millis>(index) * settings.tick.ms};
            for (const auto& c : j.at("commands"))
                if (is_event_input(c.at("command").get<std::string>()))
                    pending[*m.find_monitored_slot(c.at("command").get<std::string>())] = c.at("value") == "true";
            for (size_t slot = 0; slot < m.monitored.size(); ++slot) {
                const int fn = m.monitored[slot];
                const auto& name = m.functions[static_cast<size_t>(fn)].name;
                const auto& logged = j.at("inputs").at(name);
                const std::string text = logged.is_boolean() ? (logged.get<bool>() ? "true" : "false") : logged.get<std::string>();
                env.monitored.push_back(m.parse_value(text, m.function_type(fn)));
                if (is_event_input(name)) {
                    const bool expected = lung_event(name, events) || pending[static_cast<int>(slot)];
                    if (env.monitored.back()->as_bool() != expected) flag(report.event_mismatch, name + " not explained");
                }
            }
            state = step(m, state, env);
            for (size_t slot = 0; slot < state.env.monitored.size(); ++slot)
                if (state.env.monitored[slot]) pending.erase(static_cast<int>(slot));
            lung = lung_tick(patient, detector, circuit_for(m, state, settings.lung.circuit), substeps, settings.lung_dt);
        }
        events = lung.events;
        if (!controlled_matches(state, j)) flag(report.controlled_mismatch, "controlled locations differ");
        if (!lung_matches(lung, j.at("lung"))) flag(report.lung_mismatch, "lung signals differ");
        if (j.at("alarms").at("apnea").get<bool>() != apnea_of(m, state)) flag(report.controlled_mismatch, "apnea alarm differs");
        ++index;
    }
    report.steps = index == 0 ? 0 : index - 1;
    return report;
}

} // namespace asmwb
