#include "asmwb/scenario.hpp"

#include "asmwb/dsl.hpp"
#include "asmwb/interpreter.hpp"
#include "asmwb/time_library.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace asmwb {

namespace {

struct Cursor {
    std::string_view text;
    size_t i = 0;
    int line = 1;
    int col = 1;

    void bump()
    {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++i;
    }
    void skip_blank()
    {
        while (i < text.size()) {
            if (std::isspace(static_cast<unsigned char>(text[i]))) {
                bump();
            } else if (text.substr(i, 2) == "//") {
                while (i < text.size() && text[i] != '\n') bump();
            } else {
                break;
            }
        }
    }
    std::string word()
    {
        std::string w;
        while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
            w += text[i];
            bump();
        }
        return w;
    }
    std::string until_semicolon(const std::string& what)
    {
        std::string out;
        while (i < text.size() && text[i] != ';') {
            out += text[i];
            bump();
        }
        if (i >= text.size()) throw SyntaxError(line, col, "';' after " + what, "end of input");
        bump();
        const auto b = out.find_first_not_of(" \t\r\n");
        const auto e = out.find_last_not_of(" \t\r\n");
        return b == std::string::npos ? std::string{} : out.substr(b, e - b + 1);
    }
};

} // namespace

Scenario parse_scenario(std::string_view text)
{
    Scenario sc;
    Cursor c{text};
    for (c.skip_blank(); c.i < text.size(); c.skip_blank()) {
        ScenarioCommand cmd;
        cmd.pos = {c.line, c.col};
        const std::string kw = c.word();
        if (kw == "step") {
            cmd.kind = ScenarioCommand::Kind::Step;
            c.skip_blank();
            if (c.i < text.size() && text[c.i] == ';') c.bump();
        } else if (kw == "check") {
            cmd.kind = ScenarioCommand::Kind::Check;
            cmd.value = c.until_semicolon("check");
            if (cmd.value.empty()) throw SyntaxError(cmd.pos.line, cmd.pos.col, "a proposition after 'check'", ";");
        } else if (kw == "set") {
            cmd.kind = ScenarioCommand::Kind::Set;
            const std::string body = c.until_semicolon("set");
            const auto assign = body.find(":=");
            if (assign == std::string::npos) throw SyntaxError(cmd.pos.line, cmd.pos.col, "'location := value'", body);
            auto strip = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r\n");
                const auto e = s.find_last_not_of(" \t\r\n");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            cmd.location = strip(body.substr(0, assign));
            cmd.value = strip(body.substr(assign + 2));
            if (cmd.location.empty() || cmd.value.empty())
                throw SyntaxError(cmd.pos.line, cmd.pos.col, "'location := value'", body);
        } else {
            throw SyntaxError(cmd.pos.line, cmd.pos.col, "'set', 'step' or 'check'",
                              kw.empty() ? std::string(1, text[c.i]) : kw);
        }
        sc.commands.push_back(std::move(cmd));
    }
    return sc;
}

namespace {

void validate_set(const ScenarioCommand& cmd, const MachineDefinition& m)
{
    if (cmd.location == timelib::kClock && m.has_time_library()) {
        try {
            (void)timelib::seconds(std::stod(cmd.value));
        } catch (const std::invalid_argument&) {
            throw Error(ErrorCode::TypeMismatch, "clock value '" + cmd.value + "' is not a number of seconds");
        }
        return;
    }
    auto fi = m.find_function(cmd.location);
    if (!fi) throw Error(ErrorCode::UnresolvedSymbol, "set of undeclared '" + cmd.location + "'");
    const auto& f = m.functions[static_cast<size_t>(*fi)];
    if (f.kind != FunctionKind::Monitored)
        throw Error(ErrorCode::SetOnControlled, "'" + cmd.location + "' is " + function_kind_name(f.kind) +
                                                    "; scenarios may only set monitored locations");
    if (!m.parse_value(cmd.value, f.codomain))
        throw Error(ErrorCode::TypeMismatch, "'" + cmd.value + "' is not a " + m.type_name(f.codomain));
}

} // namespace

Scenario parse_scenario(std::string_view text, const MachineDefinition& machine)
{
    Scenario sc = parse_scenario(text);
    for (const auto& cmd : sc.commands) {
        if (cmd.kind == ScenarioCommand::Kind::Set) validate_set(cmd, machine);
        if (cmd.kind == ScenarioCommand::Kind::Check) (void)parse_expression(cmd.value, machine);
    }
    return sc;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptedAsset, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string format_scenario(const Scenario& sc)
{
    std::ostringstream out;
    for (const auto& cmd : sc.commands) {
        switch (cmd.kind) {
        case ScenarioCommand::Kind::Set: out << "set " << cmd.location << " := " << cmd.value << ";\n"; break;
        case ScenarioCommand::Kind::Step: out << "step\n"; break;
        case ScenarioCommand::Kind::Check: out << "check " << cmd.value << ";\n"; break;
        }
    }
    return out.str();
}

ScenarioResult run_scenario(const MachineDefinition& m, const Scenario& sc)
{
    ScenarioResult result;
    MachineState state = initial_state(m);
    result.trace.states.push_back(state);

    Environment pending = default_environment(m, state.clock);
    std::optional<Instant> clock_override;

    for (std::size_t idx = 0; idx < sc.commands.size(); ++idx) {
        const auto& cmd = sc.commands[idx];
        switch (cmd.kind) {
        case ScenarioCommand::Kind::Set: {
            validate_set(cmd, m);
            if (cmd.location == timelib::kClock) {
                clock_override = timelib::seconds(std::stod(cmd.value));
                break;
            }
            const int fn = *m.find_function(cmd.location);
            pending.monitored[static_cast<size_t>(m.monitored_slot(fn))] = m.parse_value(cmd.value, m.function_type(fn));
            break;
        }
        case ScenarioCommand::Kind::Step: {
            Environment env = pending;
            env.clock = clock_override.value_or(Instant{state.clock.ms + 1000});
            clock_override.reset();
            try {
                state = step(m, state, env);
            } catch (const RunError&) {
                throw;
            } catch (const Error& e) {
                throw RunError(result.trace.inputs.size(), e);
            }
            result.trace.inputs.push_back(env);
            result.trace.states.push_back(state);
            break;
        }
        case ScenarioCommand::Kind::Check: {
            const ExprPtr prop = parse_expression(cmd.value, m);
            Environment env = pending;
            env.clock = state.clock;
            if (eval_expr(m, state, env, *prop).as_bool()) {
                ++result.checks_passed;
                break;
            }
            FailedCheck f;
            f.index = idx;
            f.step = result.trace.inputs.size();
            f.proposition = cmd.value;
            f.expected = "true";
            f.actual = "false";
            // For `location = value` report the location's actual value.
            if (prop->kind == ExprKind::Eq && prop->operands[0]->ref == Expr::Ref::Function) {
                f.expected = print_expr(*prop->operands[1]);
                f.actual = m.value_to_string(eval_expr(m, state, env, *prop->operands[0]));
            }
            result.failure = f;
            return result;
        }
        }
    }
    return result;
}

} // namespace asmwb
