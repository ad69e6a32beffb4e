#pragma once

// Explicit-state exploration of a machine under a finite input abstraction,
// and invariant checking with shortest counterexamples.
//
// freeBoolean: every `expired(t)` atom is an unconstrained input and timer
// locations are not part of the explored state. Counterexamples found this
// way are concretized afterwards by solving the clock constraints their
// expiry choices imply; infeasible ones are flagged abstract-only.
//
// boundedClock: timer locations and the clock are part of the state; the
// clock advances by exactly one tick per step and exploration stops at the
// horizon.

#include "asmwb/machine.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace asmwb {

struct AbstractionConfig {
    enum class TimerMode { FreeBoolean, BoundedClock };
    TimerMode mode = TimerMode::FreeBoolean;
    Duration tick{1000};
    Duration horizon{20000};
    std::size_t state_budget = 0;  // 0: default_state_budget()

    static AbstractionConfig free_boolean() { return {}; }
    static AbstractionConfig bounded_clock(Duration tick, Duration horizon)
    {
        return {TimerMode::BoundedClock, tick, horizon, 0};
    }
};

/// 10^6, or $ASMWB_STATE_BUDGET when set.
std::size_t default_state_budget();

/// An input the exploration branches on: a monitored slot or an expiry atom.
struct Atom {
    enum class Kind { Monitored, Expired };
    Kind kind = Kind::Monitored;
    int index = -1;  // monitored slot or timer index
    auto operator<=>(const Atom&) const = default;
};

/// Partial assignment of atoms; unlisted atoms were not read.
using Cube = std::vector<std::pair<Atom, Value>>;

std::string format_cube(const MachineDefinition& machine, const Cube& cube);

struct TsEdge {
    int from = -1;
    int to = -1;
    Cube label;
    std::vector<int> resets;                         // timers reset by this step
    std::vector<std::pair<int, Duration>> durations;  // timers whose duration was set
};

struct TransitionSystem {
    const MachineDefinition* machine = nullptr;
    AbstractionConfig abstraction;
    /// freeBoolean: user controlled locations. boundedClock: every location
    /// followed by the clock as an Instant value.
    std::vector<std::vector<Value>> states;  // BFS order, 0 is initial
    std::vector<TsEdge> edges;
    std::vector<std::vector<int>> out;  // edge indices per state
    std::vector<int> parent_edge;       // BFS tree, -1 for the initial state

    /// Machine state realizing abstract state `s` (timers at their initial values in freeBoolean).
    [[nodiscard]] MachineState concrete(int s) const;
    /// Shortest edge path from the initial state to `s`.
    [[nodiscard]] std::vector<int> path_to(int s) const;
    /// Value of user location `loc` in state `s`.
    [[nodiscard]] const Value& value(int s, int loc) const { return states[static_cast<size_t>(s)][static_cast<size_t>(loc)]; }
};

/// The result refers to `machine`, which must outlive it. Throws
/// StateSpaceBudgetExceeded.
TransitionSystem build_ts(const MachineDefinition& machine, const AbstractionConfig& abstraction = {});

/// All outcomes of evaluating a boolean formula in `state` as the atoms it
/// reads range over their values (lazy branching; false before true).
std::vector<std::pair<Cube, bool>> evaluate_all(const MachineDefinition& machine, const MachineState& state,
                                                const Expr& formula, bool expiry_from_state);

struct InvariantProperty {
    enum class Form { Always, AlwaysImplies, Never };
    Form form = Form::Always;
    ExprPtr p;
    ExprPtr q;  // AlwaysImplies only
    std::string text;

    /// The formula that must hold in every reachable state.
    [[nodiscard]] ExprPtr state_formula() const;
};

/// `g(p)`, `g(p implies q)`, `not f(p)`, optionally prefixed by `LTLSPEC`.
/// Throws SyntaxError, UnknownAtom.
InvariantProperty parse_property(std::string_view text, const MachineDefinition& machine);

/// One property per non-empty line; `//` starts a comment.
std::vector<InvariantProperty> load_properties(const std::string& path, const MachineDefinition& machine);

struct Counterexample {
    InvariantProperty property;
    Trace trace;                   // concrete run ending in the violating state
    std::size_t violated_at = 0;   // index into trace.states
    Environment violating_inputs;  // monitored values under which the formula fails there
    bool abstract_only = false;    // the expiry pattern admits no clock
};

struct CheckResult {
    bool verified = false;
    std::optional<Counterexample> counterexample;
    std::size_t states = 0;
    std::size_t edges = 0;
    std::chrono::milliseconds elapsed{0};
};

CheckResult check_invariant(const TransitionSystem& ts, const InvariantProperty& prop);
CheckResult check_invariant(const MachineDefinition& machine, const InvariantProperty& prop,
                            const AbstractionConfig& abstraction = {});

/// Concrete replay of an edge path: clock values solving the expiry
/// constraints (difference constraints, Bellman-Ford). Returns nullopt when
/// the constraints are infeasible or the replay diverges from the path.
std::optional<Trace> concretize(const TransitionSystem& ts, const std::vector<int>& path);

/// Scenario text replaying the counterexample and failing its final check.
std::string export_scenario(const MachineDefinition& machine, const Counterexample& cex);

} // namespace asmwb
