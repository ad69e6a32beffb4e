#include "asmwb/time_library.hpp"

namespace asmwb::timelib {

namespace {

FunctionDecl library_function(std::string name, FunctionKind kind, Type type, int arity)
{
    FunctionDecl f;
    f.name = std::move(name);
    f.kind = kind;
    f.codomain = type;
    f.module = std::string(kTimeLibrary);
    f.arity = arity;
    return f;
}

RuleDecl library_rule(std::string name, LibraryRule which)
{
    RuleDecl r;
    r.name = std::move(name);
    r.module = std::string(kTimeLibrary);
    r.library = which;
    return r;
}

} // namespace

void declare(MachineDefinition& m)
{
    m.functions.push_back(library_function(kClock, FunctionKind::Monitored, {Type::Kind::Instant, -1}, 0));
    m.functions.push_back(library_function("start", FunctionKind::Controlled, {Type::Kind::Instant, -1}, 1));
    m.functions.push_back(library_function("duration", FunctionKind::Controlled, {Type::Kind::Duration, -1}, 1));
    m.functions.push_back(library_function("expired", FunctionKind::Derived, Type::boolean(), 1));
    m.functions.push_back(library_function("elapsed", FunctionKind::Derived, {Type::Kind::Duration, -1}, 1));
    m.rules.push_back(library_rule("r_reset_timer", LibraryRule::ResetTimer));
    m.rules.push_back(library_rule("r_set_duration", LibraryRule::SetDuration));
}

MachineDefinition module()
{
    MachineDefinition m;
    m.name = std::string(kTimeLibrary);
    m.origin = "<builtin>";
    declare(m);
    m.finalize();
    return m;
}

UpdateSet reset_timer(const MachineDefinition& machine, int timer, Instant now)
{
    UpdateSet u;
    u.add({machine.start_location(timer), Value::instant(now)});
    return u;
}

UpdateSet set_duration(const MachineDefinition& machine, int timer, Duration d)
{
    UpdateSet u;
    u.add({machine.duration_location(timer), Value::duration(d)});
    return u;
}

Duration elapsed(const MachineDefinition& machine, int timer, const MachineState& state, Instant now)
{
    return now - state.at(machine.start_location(timer)).as_instant();
}

bool expired(const MachineDefinition& machine, int timer, const MachineState& state, Instant now)
{
    return elapsed(machine, timer, state, now) >= state.at(machine.duration_location(timer)).as_duration();
}

} // namespace asmwb::timelib
