#include "asmwb/machine.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace asmwb {

const char* error_code_name(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateDeclaration: return "DuplicateDeclaration";
    case ErrorCode::UnknownImport: return "UnknownImport";
    case ErrorCode::UnresolvedSymbol: return "UnresolvedSymbol";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MissingMonitoredInput: return "MissingMonitoredInput";
    case ErrorCode::InconsistentUpdateSet: return "InconsistentUpdateSet";
    case ErrorCode::ClockRegression: return "ClockRegression";
    case ErrorCode::UnboundTimer: return "UnboundTimer";
    case ErrorCode::NotControlStateShaped: return "NotControlStateShaped";
    case ErrorCode::CorruptedAsset: return "CorruptedAsset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StateSpaceBudgetExceeded: return "StateSpaceBudgetExceeded";
    case ErrorCode::UnknownAtom: return "UnknownAtom";
    case ErrorCode::EmptyGlue: return "EmptyGlue";
    case ErrorCode::SetOnControlled: return "SetOnControlled";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::InvalidPinConfig: return "InvalidPinConfig";
    case ErrorCode::IncompletePinConfig: return "IncompletePinConfig";
    case ErrorCode::TraceMachineMismatch: return "TraceMachineMismatch";
    case ErrorCode::BothValvesOpen: return "BothValvesOpen";
    case ErrorCode::InvalidLungParameters: return "InvalidLungParameters";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::ResourceLimit: return "ResourceLimit";
    case ErrorCode::InvalidCommand: return "InvalidCommand";
    }
    return "Error";
}

SyntaxError::SyntaxError(int line, int col, const std::string& expected, const std::string& found)
    : Error(ErrorCode::SyntaxError,
            std::to_string(line) + ":" + std::to_string(col) + ": expected " + expected +
                (found.empty() ? std::string() : ", found '" + found + "'")),
      line_(line), col_(col), expected_(expected)
{
}

const char* function_kind_name(FunctionKind kind)
{
    switch (kind) {
    case FunctionKind::Monitored: return "monitored";
    case FunctionKind::Controlled: return "controlled";
    case FunctionKind::Derived: return "derived";
    case FunctionKind::Static: return "static";
    }
    return "?";
}

std::optional<int> MachineDefinition::find_function(std::string_view n) const
{
    if (auto it = function_index_.find(n); it != function_index_.end()) return it->second;
    for (size_t i = 0; i < functions.size(); ++i)
        if (functions[i].name == n) return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> MachineDefinition::find_rule(std::string_view n) const
{
    if (auto it = rule_index_.find(n); it != rule_index_.end()) return it->second;
    for (size_t i = 0; i < rules.size(); ++i)
        if (rules[i].name == n) return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> MachineDefinition::find_timer(std::string_view n) const
{
    if (auto it = timer_index_.find(n); it != timer_index_.end()) return it->second;
    for (size_t i = 0; i < timers.size(); ++i)
        if (timers[i].name == n) return static_cast<int>(i);
    return std::nullopt;
}

std::optional<DomainId> MachineDefinition::find_domain(std::string_view n) const
{
    for (size_t i = 0; i < domains.size(); ++i)
        if (domains[i].name == n) return static_cast<DomainId>(i);
    return std::nullopt;
}

std::optional<Value> MachineDefinition::find_literal(std::string_view n) const
{
    for (size_t d = 0; d < domains.size(); ++d) {
        const auto& lits = domains[d].literals;
        for (size_t i = 0; i < lits.size(); ++i)
            if (lits[i] == n) return Value::literal(static_cast<DomainId>(d), static_cast<int>(i));
    }
    return std::nullopt;
}

int MachineDefinition::location_of_function(int function) const
{
    if (function < 0 || static_cast<size_t>(function) >= function_location_.size()) return -1;
    return function_location_[static_cast<size_t>(function)];
}

int MachineDefinition::start_location(int timer) const { return user_locations_ + 2 * timer; }

int MachineDefinition::duration_location(int timer) const { return user_locations_ + 2 * timer + 1; }

std::optional<int> MachineDefinition::find_location(std::string_view n) const
{
    if (auto it = location_index_.find(n); it != location_index_.end()) return it->second;
    return std::nullopt;
}

int MachineDefinition::monitored_slot(int function) const
{
    if (function < 0 || static_cast<size_t>(function) >= function_slot_.size()) return -1;
    return function_slot_[static_cast<size_t>(function)];
}

std::optional<int> MachineDefinition::find_monitored_slot(std::string_view n) const
{
    auto f = find_function(n);
    if (!f) return std::nullopt;
    int slot = monitored_slot(*f);
    if (slot < 0) return std::nullopt;
    return slot;
}

std::string MachineDefinition::value_to_string(const Value& v) const
{
    switch (v.kind()) {
    case ValueKind::Boolean: return v.as_bool() ? "true" : "false";
    case ValueKind::Enum: {
        const auto d = static_cast<size_t>(v.domain());
        if (d < domains.size() && static_cast<size_t>(v.literal_index()) < domains[d].literals.size())
            return domains[d].literals[static_cast<size_t>(v.literal_index())];
        return "<literal " + std::to_string(v.literal_index()) + ">";
    }
    case ValueKind::Integer: return std::to_string(v.as_integer());
    case ValueKind::Duration: return std::to_string(v.raw()) + "ms";
    case ValueKind::Instant: return "@" + std::to_string(v.raw()) + "ms";
    }
    return "?";
}

std::optional<Value> MachineDefinition::parse_value(std::string_view text, const Type& type) const
{
    switch (type.kind) {
    case Type::Kind::Boolean:
        if (text == "true") return Value::boolean(true);
        if (text == "false") return Value::boolean(false);
        return std::nullopt;
    case Type::Kind::Enum: {
        const auto& lits = domains.at(static_cast<size_t>(type.domain)).literals;
        for (size_t i = 0; i < lits.size(); ++i)
            if (lits[i] == text) return Value::literal(type.domain, static_cast<int>(i));
        return std::nullopt;
    }
    case Type::Kind::Duration:
    case Type::Kind::Instant: {
        std::string_view digits = text;
        if (!digits.empty() && digits.front() == '@') digits.remove_prefix(1);
        if (digits.size() > 2 && digits.substr(digits.size() - 2) == "ms") digits.remove_suffix(2);
        Millis ms = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), ms);
        if (ec != std::errc() || p != digits.data() + digits.size() || ms < 0) return std::nullopt;
        return type.kind == Type::Kind::Duration ? Value::duration(Duration{ms}) : Value::instant(Instant{ms});
    }
    case Type::Kind::Timer: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<Value> MachineDefinition::values_of(const Type& type) const
{
    std::vector<Value> out;
    if (type.kind == Type::Kind::Boolean) {
        out = {Value::boolean(false), Value::boolean(true)};
    } else if (type.kind == Type::Kind::Enum) {
        const auto n = domains.at(static_cast<size_t>(type.domain)).literals.size();
        for (size_t i = 0; i < n; ++i) out.push_back(Value::literal(type.domain, static_cast<int>(i)));
    }
    return out;
}

std::string MachineDefinition::type_name(const Type& type) const
{
    switch (type.kind) {
    case Type::Kind::Boolean: return "Boolean";
    case Type::Kind::Enum: return domains.at(static_cast<size_t>(type.domain)).name;
    case Type::Kind::Timer: return "Timer";
    case Type::Kind::Instant: return "Instant";
    case Type::Kind::Duration: return "Duration";
    }
    return "?";
}

namespace {

Value constant_value(const MachineDefinition& m, const Expr& e)
{
    if (e.kind == ExprKind::BoolConst) return Value::boolean(e.bool_value);
    if (e.kind == ExprKind::Ident && e.ref == Expr::Ref::Literal) return e.literal;
    if (e.kind == ExprKind::Ident) {
        if (auto lit = m.find_literal(e.name)) return *lit;
    }
    throw Error(ErrorCode::TypeMismatch, "initial value of must be a literal at line " + std::to_string(e.pos.line));
}

} // namespace

void MachineDefinition::finalize()
{
    function_index_.clear();
    rule_index_.clear();
    timer_index_.clear();
    location_index_.clear();
    locations.clear();
    monitored.clear();
    initial_values.clear();
    clock_function = -1;

    for (size_t i = 0; i < functions.size(); ++i) function_index_.emplace(functions[i].name, static_cast<int>(i));
    for (size_t i = 0; i < rules.size(); ++i) rule_index_.emplace(rules[i].name, static_cast<int>(i));
    for (size_t i = 0; i < timers.size(); ++i) timer_index_.emplace(timers[i].name, static_cast<int>(i));

    function_location_.assign(functions.size(), -1);
    function_slot_.assign(functions.size(), -1);

    for (size_t i = 0; i < functions.size(); ++i) {
        const auto& f = functions[i];
        if (f.kind == FunctionKind::Controlled && f.arity == 0) {
            function_location_[i] = static_cast<int>(locations.size());
            locations.push_back({f.name, static_cast<int>(i), -1, f.codomain});
        } else if (f.kind == FunctionKind::Monitored) {
            if (f.module == kTimeLibrary) {
                clock_function = static_cast<int>(i);
            } else {
                function_slot_[i] = static_cast<int>(monitored.size());
                monitored.push_back(static_cast<int>(i));
            }
        }
    }
    user_locations_ = static_cast<int>(locations.size());

    const auto start_fn = find_function("start").value_or(-1);
    const auto duration_fn = find_function("duration").value_or(-1);
    for (size_t t = 0; t < timers.size(); ++t) {
        locations.push_back({"start(" + timers[t].name + ")", start_fn, static_cast<int>(t), {Type::Kind::Instant, -1}});
        locations.push_back(
            {"duration(" + timers[t].name + ")", duration_fn, static_cast<int>(t), {Type::Kind::Duration, -1}});
    }
    for (size_t i = 0; i < locations.size(); ++i) location_index_.emplace(locations[i].name, static_cast<int>(i));

    initial_values.assign(locations.size(), Value{});
    std::vector<bool> set(static_cast<size_t>(user_locations_), false);
    for (const auto& entry : init) {
        auto f = find_function(entry.function);
        if (!f) throw Error(ErrorCode::UnresolvedSymbol, "init of undeclared function '" + entry.function + "'");
        const int loc = location_of_function(*f);
        if (loc < 0)
            throw Error(ErrorCode::TypeMismatch, "init of non-controlled function '" + entry.function + "'");
        initial_values[static_cast<size_t>(loc)] = constant_value(*this, *entry.value);
        set[static_cast<size_t>(loc)] = true;
    }
    for (int loc = 0; loc < user_locations_; ++loc) {
        if (!set[static_cast<size_t>(loc)]) {
            // Booleans default to false, enums to their first literal.
            const auto& type = locations[static_cast<size_t>(loc)].type;
            initial_values[static_cast<size_t>(loc)] = values_of(type).front();
        }
    }
    for (size_t t = 0; t < timers.size(); ++t) {
        initial_values[static_cast<size_t>(start_location(static_cast<int>(t)))] = Value::instant(Instant{0});
        initial_values[static_cast<size_t>(duration_location(static_cast<int>(t)))] =
            Value::duration(timers[t].duration.value_or(Duration{0}));
    }
}

Environment make_environment(const MachineDefinition& machine, const std::map<std::string, std::string>& values,
                             Instant clock)
{
    Environment env = default_environment(machine, clock);
    for (const auto& [name, text] : values) {
        auto slot = machine.find_monitored_slot(name);
        if (!slot) throw Error(ErrorCode::UnresolvedSymbol, "'" + name + "' is not a monitored function");
        const int f = machine.monitored[static_cast<size_t>(*slot)];
        auto v = machine.parse_value(text, machine.function_type(f));
        if (!v) throw Error(ErrorCode::TypeMismatch, "bad value '" + text + "' for " + name);
        env.monitored[static_cast<size_t>(*slot)] = *v;
    }
    return env;
}

Environment default_environment(const MachineDefinition& machine, Instant clock)
{
    Environment env;
    env.clock = clock;
    env.monitored.reserve(machine.monitored.size());
    for (int f : machine.monitored) env.monitored.emplace_back(machine.values_of(machine.function_type(f)).front());
    return env;
}

MachineState initial_state(const MachineDefinition& machine)
{
    for (const auto& t : machine.timers)
        if (!t.duration)
            throw Error(ErrorCode::UnboundTimer,
                        "timer '" + t.name + "' has no duration (config key '" + t.config_key + "')");
    MachineState s;
    s.controlled = machine.initial_values;
    s.env.clock = Instant{0};
    s.clock = Instant{0};
    return s;
}

void UpdateSet::add(const Update& u)
{
    auto it = std::lower_bound(updates_.begin(), updates_.end(), u);
    if (it != updates_.end() && *it == u) return;
    updates_.insert(it, u);

    auto lo = std::lower_bound(updates_.begin(), updates_.end(), Update{u.location, Value::boolean(false)},
                               [](const Update& a, const Update& b) { return a.location < b.location; });
    if (std::next(lo) != updates_.end() && std::next(lo)->location == u.location) {
        if (!clash_ || u.location <= clash_->location)
            clash_ = Clash{u.location, lo->value, std::next(lo)->value};
    }
}

void UpdateSet::merge(const UpdateSet& other)
{
    for (const auto& u : other.updates_) add(u);
}

std::optional<Value> UpdateSet::value_for(int location) const
{
    auto it = std::lower_bound(updates_.begin(), updates_.end(), location,
                               [](const Update& a, int loc) { return a.location < loc; });
    if (it != updates_.end() && it->location == location) return it->value;
    return std::nullopt;
}

bool UpdateSet::operator==(const UpdateSet& other) const { return updates_ == other.updates_; }

InconsistentUpdateSet::InconsistentUpdateSet(const MachineDefinition& machine, const Clash& clash)
    : Error(ErrorCode::InconsistentUpdateSet,
            "location '" + machine.locations.at(static_cast<size_t>(clash.location)).name + "' updated to " +
                machine.value_to_string(clash.first) + " and " + machine.value_to_string(clash.second)),
      clash_(clash)
{
}

} // namespace asmwb
