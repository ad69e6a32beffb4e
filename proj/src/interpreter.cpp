#include "asmwb/interpreter.hpp"

#include "asmwb/time_library.hpp"

namespace asmwb {

ConcreteInputs::ConcreteInputs(const MachineDefinition& machine, const MachineState& state, const Environment& env)
    : machine_(machine), state_(state), env_(env)
{
}

Value ConcreteInputs::monitored(int slot)
{
    const auto idx = static_cast<size_t>(slot);
    if (idx >= env_.monitored.size() || !env_.monitored[idx]) {
        const auto& name = machine_.functions.at(static_cast<size_t>(machine_.monitored.at(idx))).name;
        throw Error(ErrorCode::MissingMonitoredInput, "no value for monitored '" + name + "'");
    }
    read_.insert(slot);
    return *env_.monitored[idx];
}

bool ConcreteInputs::expired(int timer) { return timelib::expired(machine_, timer, state_, env_.clock); }

namespace {

Error type_error(const Expr& e, const std::string& what)
{
    return Error(ErrorCode::TypeMismatch,
                 what + " at " + std::to_string(e.pos.line) + ":" + std::to_string(e.pos.col));
}

} // namespace

Value Evaluator::eval(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::BoolConst: return Value::boolean(e.bool_value);
    case ExprKind::Ident: {
        if (e.ref == Expr::Ref::Literal) return e.literal;
        if (e.ref != Expr::Ref::Function)
            throw Error(ErrorCode::UnresolvedSymbol, "unresolved identifier '" + e.name + "'");
        const auto& f = machine_.functions.at(static_cast<size_t>(e.index));
        switch (f.kind) {
        case FunctionKind::Monitored: {
            const int slot = machine_.monitored_slot(e.index);
            if (slot < 0) throw type_error(e, "clock is not readable in expressions");
            return inputs_.monitored(slot);
        }
        case FunctionKind::Controlled: return state_.at(machine_.location_of_function(e.index));
        case FunctionKind::Derived:
        case FunctionKind::Static:
            if (!f.definition) throw type_error(e, "function '" + f.name + "' has no definition");
            return eval(*f.definition);
        }
        break;
    }
    case ExprKind::Expired:
        if (e.index < 0) throw Error(ErrorCode::UnresolvedSymbol, "unknown timer '" + e.name + "'");
        return Value::boolean(inputs_.expired(e.index));
    case ExprKind::Not: return Value::boolean(!eval_bool(*e.operands.at(0)));
    // Connectives short-circuit left to right; the abstract explorer relies
    // on this to branch only on atoms that decide the result.
    case ExprKind::And: {
        const bool a = eval_bool(*e.operands.at(0));
        if (!a) return Value::boolean(false);
        return Value::boolean(eval_bool(*e.operands.at(1)));
    }
    case ExprKind::Or: {
        const bool a = eval_bool(*e.operands.at(0));
        if (a) return Value::boolean(true);
        return Value::boolean(eval_bool(*e.operands.at(1)));
    }
    case ExprKind::Implies: {
        const bool a = eval_bool(*e.operands.at(0));
        if (!a) return Value::boolean(true);
        return Value::boolean(eval_bool(*e.operands.at(1)));
    }
    case ExprKind::Eq:
    case ExprKind::Neq: {
        const Value a = eval(*e.operands.at(0));
        const Value b = eval(*e.operands.at(1));
        if (a.kind() != b.kind() || (a.is_enum() && a.domain() != b.domain()))
            throw type_error(e, "comparison of " + machine_.value_to_string(a) + " with " + machine_.value_to_string(b));
        return Value::boolean((a == b) == (e.kind == ExprKind::Eq));
    }
    }
    throw type_error(e, "unsupported expression");
}

bool Evaluator::eval_bool(const Expr& e)
{
    const Value v = eval(e);
    if (!v.is_boolean()) throw type_error(e, "expected a Boolean, got " + machine_.value_to_string(v));
    return v.as_bool();
}

UpdateSet Evaluator::eval_rule(const Rule& rule)
{
    UpdateSet out;
    collect(rule, out);
    return out;
}

UpdateSet Evaluator::fire(int rule_index)
{
    const auto& decl = machine_.rules.at(static_cast<size_t>(rule_index));
    if (observer_) observer_->rule_fired(rule_index);
    UpdateSet out;
    if (decl.body) collect(*decl.body, out);
    return out;
}

void Evaluator::collect(const Rule& rule, UpdateSet& out)
{
    switch (rule.kind) {
    case RuleKind::Skip: return;
    case RuleKind::Update: {
        const int loc = machine_.location_of_function(rule.function);
        if (loc < 0) throw Error(ErrorCode::UnresolvedSymbol, "update of non-controlled '" + rule.target + "'");
        out.add({loc, eval(*rule.value)});
        return;
    }
    case RuleKind::Par:
        for (const auto& child : rule.children) collect(*child, out);
        return;
    case RuleKind::If: {
        const bool g = eval_bool(*rule.guard);
        if (observer_) observer_->branch_taken(rule.id, g);
        if (g)
            collect(*rule.then_rule, out);
        else if (rule.else_rule)
            collect(*rule.else_rule, out);
        return;
    }
    case RuleKind::Call: {
        if (rule.rule < 0) throw Error(ErrorCode::UnresolvedSymbol, "unresolved rule '" + rule.callee + "'");
        const auto& decl = machine_.rules.at(static_cast<size_t>(rule.rule));
        switch (decl.library) {
        case LibraryRule::ResetTimer:
            out.merge(timelib::reset_timer(machine_, rule.arg_timers.at(0), inputs_.now()));
            return;
        case LibraryRule::SetDuration:
            out.merge(timelib::set_duration(machine_, rule.arg_timers.at(0), Duration{rule.arg_duration.value_or(0)}));
            return;
        case LibraryRule::None: out.merge(fire(rule.rule)); return;
        }
        return;
    }
    }
}

UpdateSet eval_rule(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                    const Rule& rule, EvalObserver* observer)
{
    ConcreteInputs inputs(machine, state, env);
    Evaluator ev(machine, state, inputs, observer);
    return ev.eval_rule(rule);
}

Value eval_expr(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                const Expr& expr)
{
    ConcreteInputs inputs(machine, state, env);
    Evaluator ev(machine, state, inputs);
    return ev.eval(expr);
}

MachineState apply_updates(const MachineState& state, const UpdateSet& updates, Environment env)
{
    MachineState next;
    next.controlled = state.controlled;
    for (const auto& u : updates.updates()) next.controlled.at(static_cast<size_t>(u.location)) = u.value;
    next.clock = env.clock;
    next.env = std::move(env);
    return next;
}

MachineState step(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                  EvalObserver* observer)
{
    if (env.clock < state.clock)
        throw Error(ErrorCode::ClockRegression, "clock went from " + std::to_string(state.clock.ms) + "ms to " +
                                                    std::to_string(env.clock.ms) + "ms");
    if (machine.main_rule < 0) throw Error(ErrorCode::UnresolvedSymbol, "machine has no main rule");
    ConcreteInputs inputs(machine, state, env);
    Evaluator ev(machine, state, inputs, observer);
    UpdateSet updates = ev.fire(machine.main_rule);
    if (!updates.consistent()) throw InconsistentUpdateSet(machine, *updates.clash());

    Environment read;
    read.clock = env.clock;
    read.monitored.assign(env.monitored.size(), std::nullopt);
    for (int slot : inputs.read_slots()) read.monitored[static_cast<size_t>(slot)] = env.monitored[static_cast<size_t>(slot)];
    return apply_updates(state, updates, std::move(read));
}

Environment ScriptedInputs::next(const MachineState& /*current*/, std::size_t index)
{
    if (index >= script_.size())
        throw Error(ErrorCode::MissingMonitoredInput, "script has no input for step " + std::to_string(index));
    return script_[index];
}

RandomInputs::RandomInputs(const MachineDefinition& machine, std::uint64_t seed, Duration clock_step)
    : machine_(machine), rng_(seed), clock_step_(clock_step)
{
}

Environment RandomInputs::next(const MachineState& /*current*/, std::size_t index)
{
    Environment env;
    env.clock = Instant{static_cast<Millis>(index + 1) * clock_step_.ms};
    env.monitored.reserve(machine_.monitored.size());
    for (int f : machine_.monitored) {
        const auto values = machine_.values_of(machine_.function_type(f));
        std::uniform_int_distribution<size_t> pick(0, values.size() - 1);
        env.monitored.emplace_back(values[pick(rng_)]);
    }
    return env;
}

Trace run(const MachineDefinition& machine, InputProvider& inputs, std::size_t steps, EvalObserver* observer)
{
    return run_from(machine, initial_state(machine), inputs, steps, observer);
}

Trace run_from(const MachineDefinition& machine, MachineState start, InputProvider& inputs, std::size_t steps,
               EvalObserver* observer)
{
    Trace trace;
    trace.states.reserve(steps + 1);
    trace.inputs.reserve(steps);
    trace.states.push_back(std::move(start));
    for (std::size_t i = 0; i < steps; ++i) {
        try {
            Environment env = inputs.next(trace.states.back(), i);
            MachineState next = step(machine, trace.states.back(), env, observer);
            trace.inputs.push_back(std::move(env));
            trace.states.push_back(std::move(next));
        } catch (const RunError&) {
            throw;
        } catch (const Error& e) {
            throw RunError(i, e);
        }
    }
    return trace;
}

} // namespace asmwb
