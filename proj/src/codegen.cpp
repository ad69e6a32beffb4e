#include "asmwb/codegen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

namespace asmwb {

namespace {

// Names the emitted code needs for itself, plus C++ keywords and the
// Arduino macros a model identifier must not shadow.
const std::set<std::string>& reserved()
{
    static const std::set<std::string> names = {
        "alignas", "alignof", "and", "and_eq", "asm", "auto", "bitand", "bitor", "bool", "break", "case", "catch",
        "char", "char8_t", "char16_t", "char32_t", "class", "compl", "concept", "const", "consteval", "constexpr",
        "constinit", "const_cast", "continue", "co_await", "co_return", "co_yield", "decltype", "default", "delete",
        "do", "double", "dynamic_cast", "else", "enum", "explicit", "export", "extern", "false", "float", "for",
        "friend", "goto", "if", "inline", "int", "long", "mutable", "namespace", "new", "noexcept", "not", "not_eq",
        "nullptr", "operator", "or", "or_eq", "private", "protected", "public", "register", "reinterpret_cast",
        "requires", "return", "short", "signed", "sizeof", "static", "static_assert", "static_cast", "struct",
        "switch", "template", "this", "thread_local", "throw", "true", "try", "typedef", "typeid", "typename",
        "union", "unsigned", "using", "virtual", "void", "volatile", "wchar_t", "while", "xor", "xor_eq",
        "HIGH", "LOW", "INPUT", "OUTPUT", "INPUT_PULLUP", "Timer", "timerStart", "timerDuration", "nowMillis",
        "expired", "fireUpdateSet", "initControlledWithMonitored", "getInputs", "setOutputs", "setupPins",
        "initOutputs", "setup", "loop", "main"};
    return names;
}

std::string duration_ms(const Value& v) { return std::to_string(v.as_duration().ms); }

class SourceEmitter {
public:
    explicit SourceEmitter(const MachineDefinition& m) : m_(m) { collect_reachable(); }

    SourceBundle emit()
    {
        check_names();
        SourceBundle b;
        b.header_name = m_.name + ".h";
        b.implementation_name = m_.name + ".cpp";
        b.header = header();
        b.implementation = implementation();
        return b;
    }

private:
    const MachineDefinition& m_;
    std::vector<int> rules_;      // reachable own rules, declaration order
    std::vector<int> functions_;  // reachable derived/static non-timer functions

    std::string origin() const
    {
        if (m_.origin.empty() || m_.origin.front() == '<') return m_.name;
        return std::filesystem::path(m_.origin).filename().string();
    }

    bool is_timer_function(int f) const { return m_.functions[static_cast<size_t>(f)].codomain.kind == Type::Kind::Timer; }

    void collect_reachable()
    {
        std::set<int> rules, funcs;
        std::function<void(const Expr&)> read = [&](const Expr& e) {
            if (e.kind == ExprKind::Ident && e.ref == Expr::Ref::Function) {
                const auto& f = m_.functions[static_cast<size_t>(e.index)];
                if (f.definition && funcs.insert(e.index).second) read(*f.definition);
            }
            for (const auto& o : e.operands) read(*o);
        };
        std::function<void(const Rule&)> walk = [&](const Rule& r) {
            if (r.value) read(*r.value);
            if (r.guard) read(*r.guard);
            if (r.kind == RuleKind::Call && r.rule >= 0) {
                const auto& d = m_.rules[static_cast<size_t>(r.rule)];
                if (d.body && rules.insert(r.rule).second) walk(*d.body);
            }
            for (const auto& c : r.children) walk(*c);
            if (r.then_rule) walk(*r.then_rule);
            if (r.else_rule) walk(*r.else_rule);
        };
        if (m_.main_rule < 0) throw Error(ErrorCode::UnsupportedConstruct, "machine has no main rule");
        rules.insert(m_.main_rule);
        walk(*m_.rules[static_cast<size_t>(m_.main_rule)].body);
        rules_.assign(rules.begin(), rules.end());
        for (int f : funcs)
            if (!is_timer_function(f)) functions_.push_back(f);
    }

    void check_names() const
    {
        static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
        std::map<std::string, std::string> seen;
        auto claim = [&](const std::string& name, const std::string& what) {
            if (!std::regex_match(name, ident) || reserved().count(name) || name == m_.name)
                throw Error(ErrorCode::UnsupportedConstruct, what + " '" + name + "' is not usable as a C++ name");
            auto [it, fresh] = seen.emplace(name, what);
            if (!fresh) throw Error(ErrorCode::UnsupportedConstruct, what + " '" + name + "' collides with " + it->second);
        };
        for (const auto& d : m_.domains) {
            claim(d.name, "domain");
            for (const auto& l : d.literals) claim(l, "literal");
        }
        for (const auto& f : m_.functions)
            if (f.module == m_.name || static_cast<int>(&f - m_.functions.data()) == m_.clock_function) claim(f.name, "function");
        for (int r : rules_) claim(m_.rules[static_cast<size_t>(r)].name, "rule");
    }

    std::string type_of(const Type& t) const
    {
        switch (t.kind) {
        case Type::Kind::Boolean: return "bool";
        case Type::Kind::Enum: return m_.domains[static_cast<size_t>(t.domain)].name;
        default: throw Error(ErrorCode::UnsupportedConstruct, "type " + m_.type_name(t) + " has no C++ mapping");
        }
    }

    std::string value(const Value& v) const { return v.is_boolean() ? (v.as_bool() ? "true" : "false") : m_.value_to_string(v); }

    std::string expr(const Expr& e) const
    {
        auto op = [&](size_t i) { return expr(*e.operands[i]); };
        switch (e.kind) {
        case ExprKind::BoolConst: return e.bool_value ? "true" : "false";
        case ExprKind::Ident: {
            if (e.ref == Expr::Ref::Literal) return e.name;
            const auto& f = m_.functions[static_cast<size_t>(e.index)];
            switch (f.kind) {
            case FunctionKind::Monitored: return f.name;
            case FunctionKind::Controlled: return f.name + "[0]";
            default: return f.name + "()";
            }
        }
        case ExprKind::Expired: return "expired(" + e.name + ")";
        case ExprKind::Not: return "!" + op(0);
        case ExprKind::And: return "(" + op(0) + " && " + op(1) + ")";
        case ExprKind::Or: return "(" + op(0) + " || " + op(1) + ")";
        case ExprKind::Implies: return "(!" + op(0) + " || " + op(1) + ")";
        case ExprKind::Eq: return "(" + op(0) + " == " + op(1) + ")";
        case ExprKind::Neq: return "(" + op(0) + " != " + op(1) + ")";
        }
        return {};
    }

    static std::string pad(int n) { return std::string(static_cast<size_t>(n) * 4, ' '); }

    void rule(const Rule& r, int indent, std::ostringstream& out) const
    {
        switch (r.kind) {
        case RuleKind::Skip: return;
        case RuleKind::Update: out << pad(indent) << r.target << "[1] = " << expr(*r.value) << ";\n"; return;
        case RuleKind::Par:
            for (const auto& c : r.children) rule(*c, indent, out);
            return;
        case RuleKind::If: {
            out << pad(indent);
            const Rule* cur = &r;
            for (;;) {
                out << "if " << guard(*cur->guard) << " {\n";
                rule(*cur->then_rule, indent + 1, out);
                out << pad(indent) << "}";
                if (!cur->else_rule) break;
                if (cur->else_rule->kind == RuleKind::If) {
                    out << " else ";
                    cur = cur->else_rule.get();
                    continue;
                }
                out << " else {\n";
                rule(*cur->else_rule, indent + 1, out);
                out << pad(indent) << "}";
                break;
            }
            out << "\n";
            return;
        }
        case RuleKind::Call: {
            const auto& d = m_.rules[static_cast<size_t>(r.rule)];
            const std::string timer = r.arg_timers.empty() ? "" : m_.timers[static_cast<size_t>(r.arg_timers[0])].name;
            switch (d.library) {
            case LibraryRule::ResetTimer: out << pad(indent) << "timerStart[" << timer << "][1] = nowMillis();\n"; return;
            case LibraryRule::SetDuration:
                out << pad(indent) << "timerDuration[" << timer << "][1] = " << r.arg_duration.value_or(0) << ";\n";
                return;
            case LibraryRule::None: out << pad(indent) << d.name << "();\n"; return;
            }
        }
        }
    }

    // Guards always print wrapped in one pair of parentheses.
    std::string guard(const Expr& e) const
    {
        std::string s = expr(e);
        const bool wrapped = s.size() > 1 && s.front() == '(' && s.back() == ')' && balanced_inside(s);
        return wrapped ? s : "(" + s + ")";
    }

    static bool balanced_inside(const std::string& s)
    {
        int depth = 0;
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            depth += s[i] == '(' ? 1 : s[i] == ')' ? -1 : 0;
            if (depth == 0) return false;
        }
        return true;
    }

    std::vector<int> own_functions(FunctionKind kind) const
    {
        std::vector<int> out;
        for (size_t i = 0; i < m_.functions.size(); ++i)
            if (m_.functions[i].module == m_.name && m_.functions[i].kind == kind) out.push_back(static_cast<int>(i));
        return out;
    }

    std::string header() const
    {
        std::ostringstream h;
        h << "// Generated from " << origin() << ". Do not edit.\n";
        h << "#pragma once\n\n";
        for (const auto& d : m_.domains) {
            h << "enum " << d.name << " { ";
            for (size_t i = 0; i < d.literals.size(); ++i) h << (i ? ", " : "") << d.literals[i];
            h << " };\n";
        }
        if (!m_.timers.empty()) {
            h << "enum Timer { ";
            for (size_t i = 0; i < m_.timers.size(); ++i) h << (i ? ", " : "") << m_.timers[i].name;
            h << " };\n";
        }
        h << "\nclass " << m_.name << " {\npublic:\n";
        h << "    " << m_.name << "();\n\n";
        h << "    // monitored\n";
        for (int f : own_functions(FunctionKind::Monitored))
            h << "    " << type_of(m_.function_type(f)) << " " << m_.functions[static_cast<size_t>(f)].name << ";\n";
        if (m_.has_time_library()) h << "    double " << m_.functions[static_cast<size_t>(m_.clock_function)].name << ";  // seconds\n";
        h << "\n    // controlled: [0] current state, [1] next state\n";
        for (int f : own_functions(FunctionKind::Controlled))
            h << "    " << type_of(m_.function_type(f)) << " " << m_.functions[static_cast<size_t>(f)].name << "[2];\n";
        if (!m_.timers.empty()) {
            h << "    long long timerStart[" << m_.timers.size() << "][2];     // ms\n";
            h << "    long long timerDuration[" << m_.timers.size() << "][2];  // ms\n";
        }
        if (!functions_.empty()) {
            h << "\n";
            for (int f : functions_) {
                const auto& fd = m_.functions[static_cast<size_t>(f)];
                h << "    " << type_of(fd.codomain) << " " << fd.name << "() const;\n";
            }
        }
        h << "\n";
        for (int r : rules_) h << "    void " << m_.rules[static_cast<size_t>(r)].name << "();\n";
        h << "\n    void initControlledWithMonitored();\n    void fireUpdateSet();\n";
        h << "\n    // hardware binding, defined in " << m_.name << "_hw.cpp\n";
        h << "    void setupPins();\n    void initOutputs();\n    void getInputs();\n    void setOutputs();\n";
        if (!m_.timers.empty()) h << "\nprivate:\n    long long nowMillis() const;\n    bool expired(Timer t) const;\n";
        h << "};\n";
        return h.str();
    }

    std::string implementation() const
    {
        std::ostringstream c;
        const std::string& cls = m_.name;
        c << "// Generated from " << origin() << ". Do not edit.\n";
        c << "#include \"" << cls << ".h\"\n\n";
        if (!m_.timers.empty()) c << "#include <cmath>\n\n";

        c << cls << "::" << cls << "()\n{\n";
        for (int f : own_functions(FunctionKind::Monitored)) {
            const auto& fd = m_.functions[static_cast<size_t>(f)];
            c << "    " << fd.name << " = " << value(m_.values_of(fd.codomain).front()) << ";\n";
        }
        if (m_.has_time_library()) c << "    " << m_.functions[static_cast<size_t>(m_.clock_function)].name << " = 0.0;\n";
        c << "    initControlledWithMonitored();\n}\n\n";

        if (!m_.timers.empty()) {
            c << "long long " << cls << "::nowMillis() const\n{\n    return std::llround("
              << m_.functions[static_cast<size_t>(m_.clock_function)].name << " * 1000.0);\n}\n\n";
            c << "bool " << cls << "::expired(Timer t) const\n{\n"
              << "    return nowMillis() - timerStart[t][0] >= timerDuration[t][0];\n}\n\n";
        }

        for (int f : functions_) {
            const auto& fd = m_.functions[static_cast<size_t>(f)];
            c << "// " << (fd.kind == FunctionKind::Derived ? "derived " : "static ") << fd.name << ": " << origin() << ":"
              << fd.pos.line << "\n";
            c << type_of(fd.codomain) << " " << cls << "::" << fd.name << "() const\n{\n    return " << expr(*fd.definition)
              << ";\n}\n\n";
        }

        for (int r : rules_) {
            const auto& d = m_.rules[static_cast<size_t>(r)];
            c << "// rule " << d.name << ": " << origin() << ":" << d.pos.line << "\n";
            c << "void " << cls << "::" << d.name << "()\n{\n";
            std::ostringstream body;
            rule(*d.body, 1, body);
            c << body.str() << "}\n\n";
        }

        c << "void " << cls << "::initControlledWithMonitored()\n{\n";
        for (int f : own_functions(FunctionKind::Controlled)) {
            const auto& fd = m_.functions[static_cast<size_t>(f)];
            const auto& v = m_.initial_values[static_cast<size_t>(m_.location_of_function(f))];
            c << "    " << fd.name << "[0] = " << fd.name << "[1] = " << value(v) << ";\n";
        }
        for (size_t t = 0; t < m_.timers.size(); ++t) {
            const auto& name = m_.timers[t].name;
            const auto& d = m_.initial_values[static_cast<size_t>(m_.duration_location(static_cast<int>(t)))];
            c << "    timerStart[" << name << "][0] = timerStart[" << name << "][1] = 0;\n";
            c << "    timerDuration[" << name << "][0] = timerDuration[" << name << "][1] = " << duration_ms(d) << ";\n";
        }
        c << "}\n\n";

        c << "void " << cls << "::fireUpdateSet()\n{\n";
        for (int f : own_functions(FunctionKind::Controlled)) {
            const auto& n = m_.functions[static_cast<size_t>(f)].name;
            c << "    " << n << "[0] = " << n << "[1];\n";
        }
        if (!m_.timers.empty()) {
            c << "    for (int t = 0; t < " << m_.timers.size() << "; ++t) {\n";
            c << "        timerStart[t][0] = timerStart[t][1];\n        timerDuration[t][0] = timerDuration[t][1];\n    }\n";
        }
        c << "}\n";
        return c.str();
    }
};

} // namespace

SourceBundle generate_source(const MachineDefinition& machine) { return SourceEmitter(machine).emit(); }

std::string instance_name(const MachineDefinition& machine)
{
    std::string s = machine.name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// ---------------------------------------------------------------------------
// Pin configuration

const char* pin_mode_name(PinMode mode)
{
    switch (mode) {
    case PinMode::DigitalIn: return "DIGITALIN";
    case PinMode::DigitalOut: return "DIGITALOUT";
    case PinMode::AnalogIn: return "ANALOGIN";
    case PinMode::AnalogOut: return "ANALOGOUT";
    }
    return "";
}

namespace {

std::optional<PinMode> pin_mode_from(const std::string& s)
{
    for (auto m : {PinMode::DigitalIn, PinMode::DigitalOut, PinMode::AnalogIn, PinMode::AnalogOut})
        if (s == pin_mode_name(m)) return m;
    return std::nullopt;
}

bool is_input(PinMode m) { return m == PinMode::DigitalIn || m == PinMode::AnalogIn; }
bool is_digital(PinMode m) { return m == PinMode::DigitalIn || m == PinMode::DigitalOut; }

bool two_valued(const MachineDefinition& m, const Type& t) { return m.values_of(t).size() == 2; }

Error invalid(const std::string& what) { return Error(ErrorCode::InvalidPinConfig, what); }

/// "D8" -> "8"; "A5" and plain numbers stay as written.
std::string pin_expression(const std::string& pin) { return pin.size() > 1 && pin[0] == 'D' ? pin.substr(1) : pin; }

bool active_low(const PinBinding& b) { return b.polarity && *b.polarity == "activeLow"; }

} // namespace

PinConfig generate_pin_config(const MachineDefinition& m)
{
    PinConfig cfg;
    for (auto kind : {FunctionKind::Monitored, FunctionKind::Controlled}) {
        for (const auto& f : m.functions) {
            if (f.module != m.name || f.kind != kind) continue;
            const bool digital = two_valued(m, f.codomain);
            const bool in = kind == FunctionKind::Monitored;
            cfg.bindings.push_back({in ? (digital ? PinMode::DigitalIn : PinMode::AnalogIn)
                                       : (digital ? PinMode::DigitalOut : PinMode::AnalogOut),
                                    f.name, "", std::nullopt});
        }
    }
    return cfg;
}

std::string format_pin_config(const PinConfig& cfg)
{
    nlohmann::ordered_json j;
    j["arduinoVersion"] = cfg.arduino_version;
    j["stepTime"] = cfg.step_time;
    j["bindings"] = nlohmann::ordered_json::array();
    for (const auto& b : cfg.bindings) {
        nlohmann::ordered_json e;
        e["mode"] = pin_mode_name(b.mode);
        e["function"] = b.function;
        e["pin"] = b.pin;
        if (b.polarity) e["polarity"] = *b.polarity;
        j["bindings"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

PinConfig parse_pin_config(std::string_view text, const MachineDefinition& m)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw invalid(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) throw invalid("top level must be an object");
    for (const auto& [key, _] : j.items())
        if (key != "arduinoVersion" && key != "stepTime" && key != "bindings") throw invalid("unknown field '" + key + "'");
    if (!j.contains("arduinoVersion") || !j["arduinoVersion"].is_string()) throw invalid("arduinoVersion must be a string");
    if (!j.contains("stepTime") || !j["stepTime"].is_number_integer() || j["stepTime"].get<long long>() < 0)
        throw invalid("stepTime must be a non-negative integer");
    if (!j.contains("bindings") || !j["bindings"].is_array()) throw invalid("bindings must be an array");

    static const std::regex pin_syntax("D?[0-9]+|A[0-9]+");
    PinConfig cfg;
    cfg.arduino_version = j["arduinoVersion"].get<std::string>();
    cfg.step_time = j["stepTime"].get<int>();
    std::set<std::string> functions, pins;
    for (const auto& e : j["bindings"]) {
        if (!e.is_object()) throw invalid("binding must be an object");
        for (const auto& [key, _] : e.items())
            if (key != "mode" && key != "function" && key != "pin" && key != "polarity")
                throw invalid("unknown binding field '" + key + "'");
        for (const char* key : {"mode", "function", "pin"})
            if (!e.contains(key) || !e[key].is_string()) throw invalid(std::string("binding needs a string '") + key + "'");
        PinBinding b;
        const auto mode = pin_mode_from(e["mode"].get<std::string>());
        if (!mode) throw invalid("unknown mode '" + e["mode"].get<std::string>() + "'");
        b.mode = *mode;
        b.function = e["function"].get<std::string>();
        b.pin = e["pin"].get<std::string>();
        if (e.contains("polarity")) {
            if (!e["polarity"].is_string()) throw invalid("polarity must be a string");
            b.polarity = e["polarity"].get<std::string>();
            if (*b.polarity != "activeLow" && *b.polarity != "activeHigh")
                throw invalid("polarity must be activeLow or activeHigh, got '" + *b.polarity + "'");
        }

        auto fi = m.find_function(b.function);
        if (!fi) throw invalid("unknown function '" + b.function + "'");
        const auto& f = m.functions[static_cast<size_t>(*fi)];
        if (f.module != m.name || (f.kind != FunctionKind::Monitored && f.kind != FunctionKind::Controlled))
            throw invalid("'" + b.function + "' is neither monitored nor controlled");
        if (is_input(b.mode) != (f.kind == FunctionKind::Monitored))
            throw invalid("'" + b.function + "' is " + function_kind_name(f.kind) + " but bound as " + pin_mode_name(b.mode));
        if (is_digital(b.mode) && !two_valued(m, f.codomain))
            throw invalid("'" + b.function + "' has more than two values and needs an analog pin");
        if (!functions.insert(b.function).second) throw invalid("'" + b.function + "' bound twice");
        if (!b.pin.empty()) {
            if (!std::regex_match(b.pin, pin_syntax)) throw invalid("bad pin '" + b.pin + "'");
            if (!pins.insert(pin_expression(b.pin)).second) throw invalid("pin " + b.pin + " used twice");
        }
        cfg.bindings.push_back(std::move(b));
    }
    return cfg;
}

PinConfig load_pin_config(const std::string& path, const MachineDefinition& machine)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptedAsset, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pin_config(ss.str(), machine);
}

// ---------------------------------------------------------------------------
// Runtime

RuntimeBundle generate_runtime(const MachineDefinition& m, const PinConfig& cfg)
{
    // Completeness: every input bound, every listed binding has a pin.
    std::set<std::string> bound;
    for (const auto& b : cfg.bindings) {
        if (b.pin.empty()) throw Error(ErrorCode::IncompletePinConfig, "no pin for '" + b.function + "'");
        bound.insert(b.function);
    }
    for (const auto& f : m.functions)
        if (f.module == m.name && f.kind == FunctionKind::Monitored && !bound.count(f.name))
            throw Error(ErrorCode::IncompletePinConfig, "monitored '" + f.name + "' has no binding");

    const std::string& cls = m.name;
    auto type_of = [&](const std::string& fn) { return m.function_type(*m.find_function(fn)); };
    auto lit = [&](const Type& t, size_t i) { return m.value_to_string(m.values_of(t)[i]); };

    std::ostringstream hw;
    hw << "// Pin binding for " << cls << ". Generated; do not edit.\n";
    hw << "#include <Arduino.h>\n#include \"" << cls << ".h\"\n\n";

    hw << "void " << cls << "::setupPins()\n{\n";
    for (const auto& b : cfg.bindings)
        hw << "    pinMode(" << pin_expression(b.pin) << ", " << (is_input(b.mode) ? "INPUT" : "OUTPUT") << ");\n";
    hw << "}\n\n";

    hw << "void " << cls << "::getInputs()\n{\n";
    if (m.has_time_library())
        hw << "    " << m.functions[static_cast<size_t>(m.clock_function)].name << " = millis() / 1000.0;\n";
    for (const auto& b : cfg.bindings) {
        if (!is_input(b.mode)) continue;
        const Type t = type_of(b.function);
        const std::string pin = pin_expression(b.pin);
        // The active level reads as true or as the second literal.
        const std::string active = active_low(b) ? "LOW" : "HIGH";
        if (b.mode == PinMode::DigitalIn) {
            if (t.kind == Type::Kind::Boolean)
                hw << "    " << b.function << " = (digitalRead(" << pin << ") == " << active << ");\n";
            else
                hw << "    " << b.function << " = (digitalRead(" << pin << ") == " << active << ") ? " << lit(t, 1) << " : "
                   << lit(t, 0) << ";\n";
        } else {
            const size_t n = m.values_of(t).size();
            hw << "    {\n        long i = analogRead(" << pin << ") * " << n << "L / 1024;\n";
            hw << "        " << b.function << " = static_cast<" << m.type_name(t) << ">(i < " << n << " ? i : " << n - 1
               << ");\n    }\n";
        }
    }
    hw << "}\n\n";

    auto write = [&](const PinBinding& b, const std::string& slot, const std::string& indent) {
        const Type t = type_of(b.function);
        const std::string pin = pin_expression(b.pin);
        const std::string v = b.function + "[" + slot + "]";
        if (b.mode == PinMode::DigitalOut) {
            const std::string on = active_low(b) ? "LOW" : "HIGH";
            const std::string off = active_low(b) ? "HIGH" : "LOW";
            const std::string is_first = t.kind == Type::Kind::Boolean ? "!" + v : v + " == " + lit(t, 0);
            hw << indent << "if (" << is_first << ")\n" << indent << "    digitalWrite(" << pin << ", " << off << ");\n"
               << indent << "else\n" << indent << "    digitalWrite(" << pin << ", " << on << ");\n";
        } else {
            const size_t n = m.values_of(t).size();
            hw << indent << "analogWrite(" << pin << ", static_cast<int>(" << v << ") * 255 / " << (n > 1 ? n - 1 : 1) << ");\n";
        }
    };

    hw << "void " << cls << "::initOutputs()\n{\n";
    for (const auto& b : cfg.bindings)
        if (!is_input(b.mode)) write(b, "0", "    ");
    hw << "}\n\n";

    hw << "void " << cls << "::setOutputs()\n{\n";
    for (const auto& b : cfg.bindings) {
        if (is_input(b.mode)) continue;
        hw << "    if (" << b.function << "[0] != " << b.function << "[1]) {\n";
        write(b, "1", "        ");
        hw << "    }\n";
    }
    hw << "}\n";

    const std::string inst = instance_name(m);
    const std::string main_rule = m.rules[static_cast<size_t>(m.main_rule)].name;
    std::ostringstream ino;
    ino << "// Execution loop for " << cls << ". Generated; do not edit.\n";
    ino << "#include <Arduino.h>\n#include \"" << cls << ".h\"\n\n";
    ino << cls << " " << inst << ";\n\n";
    ino << "void setup()\n{\n    " << inst << ".setupPins();\n    " << inst << ".initControlledWithMonitored();\n    " << inst
        << ".initOutputs();\n}\n\n";
    ino << "void loop()\n{\n";
    ino << "    " << inst << ".getInputs();\n";
    ino << "    " << inst << "." << main_rule << "();\n";
    ino << "    " << inst << ".setOutputs();\n";
    ino << "    " << inst << ".fireUpdateSet();\n";
    if (cfg.step_time > 0) ino << "    delay(" << cfg.step_time << ");\n";
    ino << "}\n";

    return {cls + "_hw.cpp", cls + ".ino", hw.str(), ino.str()};
}

} // namespace asmwb
