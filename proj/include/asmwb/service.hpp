#pragma once

// Closed-loop sessions: a controller level, its clock and a simulated lung,
// stepped by a single writer. Operators queue commands; readers take
// committed samples (snapshot, ordered stream, JSON-lines log).

#include "asmwb/lung.hpp"
#include "asmwb/models.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace asmwb {

struct SessionSettings {
    int level = 3;
    ControllerConfig config = default_config();
    LungProfile lung;
    Duration tick{100};
    double lung_dt = 0.01;   // seconds per lung sub-step
    bool realtime = true;    // a writer thread steps every tick of wall time
    double speed = 1.0;      // wall-clock acceleration for realtime sessions
    std::size_t max_steps = 1'000'000;
};

enum class SessionStatus { Running, Paused, Stopped };
const char* session_status_name(SessionStatus s);

struct OperatorCommand {
    std::string name;    // a monitored location of the session's machine
    std::string value = "true";
};

/// Names the controller reads momentarily: held until a step reads them.
bool is_momentary(std::string_view command);

struct CommandAck {
    std::uint64_t sequence = 0;
    std::string name;
    std::string value;
};

struct SessionSample {
    std::size_t step = 0;
    MachineState state;
    Environment inputs;                     // full environment given to the step
    std::vector<CommandAck> commands;       // drained from the queue at this step
    LungSample lung;                        // end of the tick; events seen during it
    bool apnea = false;
};

class Session {
public:
    /// Validates and loads; throws InvalidConfig, InvalidLungParameters.
    Session(std::string id, SessionSettings settings, std::optional<std::filesystem::path> log_file = std::nullopt);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] const SessionSettings& settings() const { return settings_; }
    [[nodiscard]] const MachineDefinition& machine() const { return machine_; }
    [[nodiscard]] SessionStatus status() const;
    /// Why the session stopped on its own, if it did.
    [[nodiscard]] std::optional<std::string> fault() const;

    /// Thread-safe. Throws InvalidCommand for unknown names or bad values.
    CommandAck submit(const OperatorCommand& command);

    /// Runs `count` steps now. Throws InvalidCommand on realtime sessions
    /// and ResourceLimit past max_steps.
    void step(std::size_t count = 1);
    void pause();
    void resume();
    /// Ends the loop; samples stay readable.
    void stop();

    [[nodiscard]] SessionSample snapshot() const;
    [[nodiscard]] std::size_t sample_count() const;
    /// Sample `index`, waiting up to `timeout` for it to be committed.
    /// Empty on timeout or once the session has stopped short of it.
    std::optional<SessionSample> wait_sample(std::size_t index, std::chrono::milliseconds timeout) const;

    [[nodiscard]] nlohmann::ordered_json to_json(const SessionSample& sample) const;
    [[nodiscard]] nlohmann::ordered_json info() const;
    /// One JSON document per line, one line per committed sample.
    [[nodiscard]] std::string log() const;

private:
    void advance();
    void run_loop();
    void commit(SessionSample sample);
    void halt(SessionStatus status, std::optional<std::string> fault);

    std::string id_;
    SessionSettings settings_;
    MachineDefinition machine_;
    std::optional<std::filesystem::path> log_file_;

    // writer-owned
    std::mutex writer_;
    LungPatient patient_;
    EventDetector detector_;
    LungEvents tick_events_;
    std::map<int, Value> latched_;    // monitored slot -> value
    std::map<int, Value> momentary_;  // pending until read
    std::map<int, Value> overrides_;  // simulated-event pulses, pending until read

    // command queue
    std::mutex queue_mx_;
    std::deque<std::pair<std::uint64_t, OperatorCommand>> queue_;
    std::uint64_t next_sequence_ = 1;

    // committed samples
    mutable std::mutex samples_mx_;
    mutable std::condition_variable samples_cv_;
    std::vector<SessionSample> samples_;
    std::vector<std::string> log_lines_;
    SessionStatus status_ = SessionStatus::Running;
    std::optional<std::string> fault_;

    std::atomic<bool> quit_{false};
    std::thread thread_;
};

/// Owns sessions by id. Throws UnknownSession and ResourceLimit.
class SessionManager {
public:
    explicit SessionManager(std::size_t max_sessions = 8, std::optional<std::filesystem::path> log_dir = std::nullopt)
        : max_sessions_(max_sessions), log_dir_(std::move(log_dir))
    {
    }

    std::shared_ptr<Session> create(SessionSettings settings);
    [[nodiscard]] std::shared_ptr<Session> get(const std::string& id) const;
    void remove(const std::string& id);
    [[nodiscard]] std::vector<std::string> ids() const;

private:
    mutable std::mutex mx_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t max_sessions_;
    std::optional<std::filesystem::path> log_dir_;
    std::uint64_t next_id_ = 1;
};

/// Session settings from a creation request: level, config ("default",
/// "test" or an object of config keys), patient (a bundled profile name or
/// an object of profile keys), tickMs, lungDtMs, realtime, speed.
SessionSettings settings_from_json(const nlohmann::json& request);

struct ReplayReport {
    std::size_t steps = 0;
    std::optional<std::size_t> controlled_mismatch;  // first differing step
    std::optional<std::size_t> lung_mismatch;
    std::optional<std::size_t> event_mismatch;       // inputs not explained by lung events + commands
    bool apnea_raised = false;
    std::string detail;

    [[nodiscard]] bool identical() const { return !controlled_mismatch && !lung_mismatch && !event_mismatch; }
};

/// Re-executes a session log with the interpreter and the lung model and
/// compares every controlled location and lung signal exactly.
ReplayReport replay_log(std::string_view jsonl, const SessionSettings& settings);

} // namespace asmwb
