#pragma once

// Parsed abstract state machines: signature, rule trees, initial state, and
// the runtime state/update-set types the interpreter works on.

#include "asmwb/error.hpp"
#include "asmwb/value.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace asmwb {

struct SourcePos {
    int line = 0;
    int col = 0;
};

inline constexpr std::string_view kTimeLibrary = "TimeLibrary";

enum class FunctionKind { Monitored, Controlled, Derived, Static };

const char* function_kind_name(FunctionKind kind);

/// Codomain of a function or type of an expression.
struct Type {
    enum class Kind { Boolean, Enum, Timer, Instant, Duration };
    Kind kind = Kind::Boolean;
    DomainId domain = -1;  // Enum only

    static Type boolean() { return {Kind::Boolean, -1}; }
    static Type enumeration(DomainId d) { return {Kind::Enum, d}; }
    bool operator==(const Type&) const = default;
};

struct Domain {
    std::string name;
    std::vector<std::string> literals;
    SourcePos pos;
};

// ---------------------------------------------------------------------------
// Expressions and rules

enum class ExprKind { BoolConst, Ident, Expired, Not, And, Or, Implies, Eq, Neq };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind = ExprKind::BoolConst;
    bool bool_value = false;        // BoolConst
    std::string name;               // Ident / Expired (timer name)
    std::vector<ExprPtr> operands;  // Not: 1, binary: 2
    SourcePos pos;

    // Filled by resolution.
    enum class Ref { None, Function, Literal, Timer } ref = Ref::None;
    int index = -1;  // function index, or timer index for Expired
    Value literal;   // Ref::Literal
};

enum class RuleKind { Skip, Update, Par, If, Call };

struct Rule;
using RulePtr = std::shared_ptr<const Rule>;

/// Argument of a macro call: an identifier (timer name, config key) or a
/// duration literal such as `1500ms` / `2s`.
struct CallArg {
    std::string text;
    SourcePos pos;
    std::optional<Millis> duration;
};

struct Rule {
    RuleKind kind = RuleKind::Skip;
    SourcePos pos;
    int id = -1;  // unique per machine, assigned at resolution

    // Update
    std::string target;
    int function = -1;
    ExprPtr value;

    // Par
    std::vector<RulePtr> children;

    // If
    ExprPtr guard;
    RulePtr then_rule;
    RulePtr else_rule;  // may be null

    // Call
    std::string callee;
    std::vector<CallArg> args;
    int rule = -1;
    std::vector<int> arg_timers;  // resolved timer indices for library calls
    std::optional<Millis> arg_duration;
};

struct FunctionDecl {
    std::string name;
    FunctionKind kind = FunctionKind::Monitored;
    Type codomain;
    std::string module;   // declaring module; library functions carry kTimeLibrary
    int arity = 0;        // 1 only for timer-indexed library functions
    SourcePos pos;
    ExprPtr definition;   // derived and static (non-timer) functions
};

/// A timer is a static function of type Timer bound to a duration, either
/// directly or through a configuration key resolved at load time.
struct TimerDecl {
    std::string name;
    int function = -1;
    std::string config_key;         // empty when bound by literal
    std::optional<Duration> duration;
    SourcePos pos;
};

enum class LibraryRule { None, ResetTimer, SetDuration };

struct RuleDecl {
    std::string name;
    std::string module;
    bool is_main = false;
    LibraryRule library = LibraryRule::None;
    RulePtr body;  // null for library rules
    SourcePos pos;
};

struct LocationInfo {
    std::string name;   // `state`, `start(timerX)`, `duration(timerX)`
    int function = -1;
    int timer = -1;     // -1 for user functions
    Type type;
};

struct InitEntry {
    std::string function;
    ExprPtr value;
    std::string raw;  // for duration(...) initializers
    SourcePos pos;
};

/// A parsed and resolved machine.
class MachineDefinition {
public:
    std::string name;
    std::string origin;
    std::vector<std::string> imports;
    std::vector<Domain> domains;
    std::vector<FunctionDecl> functions;
    std::vector<TimerDecl> timers;
    std::vector<RuleDecl> rules;
    std::vector<InitEntry> init;
    std::string init_name = "s0";
    int main_rule = -1;
    int node_count = 0;

    // Derived tables, rebuilt by finalize().
    std::vector<LocationInfo> locations;
    std::vector<int> monitored;              // monitored slot -> function index (excludes clock)
    std::vector<Value> initial_values;       // per location
    int clock_function = -1;                 // mCurrTimeSecs when the time library is imported

    [[nodiscard]] bool has_time_library() const { return clock_function >= 0; }

    [[nodiscard]] std::optional<int> find_function(std::string_view n) const;
    [[nodiscard]] std::optional<int> find_rule(std::string_view n) const;
    [[nodiscard]] std::optional<int> find_timer(std::string_view n) const;
    [[nodiscard]] std::optional<DomainId> find_domain(std::string_view n) const;
    /// Literal lookup across all domains (literal names are machine-unique).
    [[nodiscard]] std::optional<Value> find_literal(std::string_view n) const;

    [[nodiscard]] int location_of_function(int function) const;
    [[nodiscard]] int start_location(int timer) const;
    [[nodiscard]] int duration_location(int timer) const;
    [[nodiscard]] std::optional<int> find_location(std::string_view n) const;
    [[nodiscard]] int monitored_slot(int function) const;
    [[nodiscard]] std::optional<int> find_monitored_slot(std::string_view n) const;

    /// Number of user (non-library) controlled locations; they come first.
    [[nodiscard]] int user_location_count() const { return user_locations_; }

    [[nodiscard]] std::string value_to_string(const Value& v) const;
    /// Parses `true`, `false`, an enum literal of `type`, or a duration/instant.
    [[nodiscard]] std::optional<Value> parse_value(std::string_view text, const Type& type) const;
    [[nodiscard]] Type function_type(int function) const { return functions.at(static_cast<size_t>(function)).codomain; }
    /// All values of a finite type (Boolean or Enum).
    [[nodiscard]] std::vector<Value> values_of(const Type& type) const;
    [[nodiscard]] std::string type_name(const Type& type) const;

    /// Rebuilds location tables and initial values. Controlled functions
    /// without an init entry start at false or their first literal.
    void finalize();

private:
    std::map<std::string, int, std::less<>> function_index_;
    std::map<std::string, int, std::less<>> rule_index_;
    std::map<std::string, int, std::less<>> timer_index_;
    std::map<std::string, int, std::less<>> location_index_;
    std::vector<int> function_location_;
    std::vector<int> function_slot_;
    int user_locations_ = 0;
};

// ---------------------------------------------------------------------------
// Runtime state

/// Monitored values for one step plus the clock reading.
struct Environment {
    std::vector<std::optional<Value>> monitored;  // indexed by monitored slot
    Instant clock;

    bool operator==(const Environment&) const = default;
};

/// Builds an environment from name/value text pairs.
Environment make_environment(const MachineDefinition& machine,
                             const std::map<std::string, std::string>& values, Instant clock);

/// Environment with every monitored location at its default (false / first literal).
Environment default_environment(const MachineDefinition& machine, Instant clock);

struct MachineState {
    std::vector<Value> controlled;  // indexed by location
    Environment env;                // monitored values read by the step that produced this state
    Instant clock;

    [[nodiscard]] const Value& at(int location) const { return controlled.at(static_cast<size_t>(location)); }
    bool operator==(const MachineState&) const = default;
};

MachineState initial_state(const MachineDefinition& machine);

struct Update {
    int location = -1;
    Value value;
    bool operator==(const Update&) const = default;
    auto operator<=>(const Update&) const = default;
};

struct Clash {
    int location = -1;
    Value first;
    Value second;
};

class UpdateSet {
public:
    /// Adds an update; identical duplicates collapse, contradictions record a
    /// clash. The set is ordered, so the reported clash (lowest location, two
    /// lowest values) does not depend on insertion order.
    void add(const Update& u);
    void merge(const UpdateSet& other);

    [[nodiscard]] const std::vector<Update>& updates() const { return updates_; }
    [[nodiscard]] const std::optional<Clash>& clash() const { return clash_; }
    [[nodiscard]] bool consistent() const { return !clash_.has_value(); }
    [[nodiscard]] std::optional<Value> value_for(int location) const;
    [[nodiscard]] bool empty() const { return updates_.empty(); }

    bool operator==(const UpdateSet& other) const;

private:
    std::vector<Update> updates_;  // sorted by (location, value), unique
    std::optional<Clash> clash_;
};

class InconsistentUpdateSet : public Error {
public:
    InconsistentUpdateSet(const MachineDefinition& machine, const Clash& clash);
    [[nodiscard]] const Clash& clash() const { return clash_; }

private:
    Clash clash_;
};

struct Trace {
    std::vector<MachineState> states;
    std::vector<Environment> inputs;  // inputs[i] drives states[i] -> states[i+1]
};

} // namespace asmwb
