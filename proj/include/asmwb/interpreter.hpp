#pragma once

// Step semantics: rules evaluate to update sets against a frozen state; a
// step applies a consistent update set to the controlled locations.

#include "asmwb/machine.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <set>

namespace asmwb {

/// Where an evaluation reads monitored values and timer expiry from.
class InputSource {
public:
    virtual ~InputSource() = default;
    virtual Value monitored(int slot) = 0;
    virtual bool expired(int timer) = 0;
    virtual Instant now() = 0;
};

/// Hooks for coverage measurement.
class EvalObserver {
public:
    virtual ~EvalObserver() = default;
    virtual void rule_fired(int /*rule*/) {}
    virtual void branch_taken(int /*node*/, bool /*then_arm*/) {}
};

/// Reads a concrete environment; expiry comes from the timer locations of the state.
class ConcreteInputs final : public InputSource {
public:
    ConcreteInputs(const MachineDefinition& machine, const MachineState& state, const Environment& env);

    Value monitored(int slot) override;
    bool expired(int timer) override;
    Instant now() override { return env_.clock; }

    /// Monitored slots read so far.
    [[nodiscard]] const std::set<int>& read_slots() const { return read_; }

private:
    const MachineDefinition& machine_;
    const MachineState& state_;
    const Environment& env_;
    std::set<int> read_;
};

class Evaluator {
public:
    Evaluator(const MachineDefinition& machine, const MachineState& state, InputSource& inputs,
              EvalObserver* observer = nullptr)
        : machine_(machine), state_(state), inputs_(inputs), observer_(observer)
    {
    }

    Value eval(const Expr& expr);
    bool eval_bool(const Expr& expr);
    UpdateSet eval_rule(const Rule& rule);
    /// Fires a declared rule by index (reports it to the observer).
    UpdateSet fire(int rule_index);

private:
    void collect(const Rule& rule, UpdateSet& out);

    const MachineDefinition& machine_;
    const MachineState& state_;
    InputSource& inputs_;
    EvalObserver* observer_;
};

UpdateSet eval_rule(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                    const Rule& rule, EvalObserver* observer = nullptr);

Value eval_expr(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                const Expr& expr);

/// Applies a consistent update set; unmentioned locations keep their values.
MachineState apply_updates(const MachineState& state, const UpdateSet& updates, Environment env);

/// One machine step. Throws InconsistentUpdateSet, ClockRegression,
/// MissingMonitoredInput.
MachineState step(const MachineDefinition& machine, const MachineState& state, const Environment& env,
                  EvalObserver* observer = nullptr);

class InputProvider {
public:
    virtual ~InputProvider() = default;
    /// Environment for step `index` (0-based) taken from `current`.
    virtual Environment next(const MachineState& current, std::size_t index) = 0;
};

class ScriptedInputs final : public InputProvider {
public:
    explicit ScriptedInputs(std::vector<Environment> script) : script_(std::move(script)) {}
    Environment next(const MachineState& current, std::size_t index) override;

private:
    std::vector<Environment> script_;
};

/// Uniform booleans and enum literals; the clock advances by `clock_step`
/// per step, starting at one step (the first step reads `clock_step`).
class RandomInputs final : public InputProvider {
public:
    RandomInputs(const MachineDefinition& machine, std::uint64_t seed, Duration clock_step);
    Environment next(const MachineState& current, std::size_t index) override;

private:
    const MachineDefinition& machine_;
    std::mt19937_64 rng_;
    Duration clock_step_;
};

class CallbackInputs final : public InputProvider {
public:
    using Fn = std::function<Environment(const MachineState&, std::size_t)>;
    explicit CallbackInputs(Fn fn) : fn_(std::move(fn)) {}
    Environment next(const MachineState& current, std::size_t index) override { return fn_(current, index); }

private:
    Fn fn_;
};

/// Runs `steps` steps from the initial state. Step errors are re-raised as
/// RunError carrying the failing step index.
Trace run(const MachineDefinition& machine, InputProvider& inputs, std::size_t steps,
          EvalObserver* observer = nullptr);
Trace run_from(const MachineDefinition& machine, MachineState start, InputProvider& inputs, std::size_t steps,
               EvalObserver* observer = nullptr);

} // namespace asmwb
