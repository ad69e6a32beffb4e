#include "asmwb/verify.hpp"

#include "asmwb/dsl.hpp"
#include "asmwb/interpreter.hpp"
#include "asmwb/time_library.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

namespace asmwb {

std::size_t default_state_budget()
{
    if (const char* env = std::getenv("ASMWB_STATE_BUDGET"); env && *env) {
        try {
            const auto v = std::stoull(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw Error(ErrorCode::InvalidConfig, std::string("ASMWB_STATE_BUDGET is not a positive integer: ") + env);
    }
    return 1'000'000;
}

std::string format_cube(const MachineDefinition& m, const Cube& cube)
{
    std::string out;
    for (const auto& [atom, v] : cube) {
        if (!out.empty()) out += ", ";
        if (atom.kind == Atom::Kind::Monitored)
            out += m.functions[static_cast<size_t>(m.monitored[static_cast<size_t>(atom.index)])].name;
        else
            out += "expired(" + m.timers[static_cast<size_t>(atom.index)].name + ")";
        out += "=" + m.value_to_string(v);
    }
    return out.empty() ? "-" : out;
}

namespace {

struct NeedAtom {
    Atom atom;
};

/// Input source answering from a partial cube; unknown atoms abort the
/// evaluation so the caller can branch on them.
class BranchingInputs final : public InputSource {
public:
    BranchingInputs(const MachineDefinition& m, const MachineState& s, const Cube& cube, Instant now, bool expiry_from_state)
        : m_(m), s_(s), cube_(cube), now_(now), from_state_(expiry_from_state)
    {
    }

    Value monitored(int slot) override { return lookup({Atom::Kind::Monitored, slot}); }
    bool expired(int timer) override
    {
        if (from_state_) return timelib::expired(m_, timer, s_, now_);
        return lookup({Atom::Kind::Expired, timer}).as_bool();
    }
    Instant now() override { return now_; }

private:
    Value lookup(Atom a) const
    {
        for (const auto& [atom, v] : cube_)
            if (atom == a) return v;
        throw NeedAtom{a};
    }

    const MachineDefinition& m_;
    const MachineState& s_;
    const Cube& cube_;
    Instant now_;
    bool from_state_;
};

std::vector<Value> atom_values(const MachineDefinition& m, Atom a)
{
    if (a.kind == Atom::Kind::Expired) return {Value::boolean(false), Value::boolean(true)};
    return m.values_of(m.function_type(m.monitored[static_cast<size_t>(a.index)]));
}

/// Runs `body` once per cube of the lazy branching tree, in DFS order with
/// false / first literal explored first.
template <class Body>
void for_each_cube(const MachineDefinition& m, const MachineState& s, Instant now, bool from_state, Body&& body)
{
    std::vector<Cube> stack{Cube{}};
    while (!stack.empty()) {
        Cube cube = std::move(stack.back());
        stack.pop_back();
        BranchingInputs inputs(m, s, cube, now, from_state);
        try {
            body(inputs, cube);
        } catch (const NeedAtom& need) {
            const auto values = atom_values(m, need.atom);
            for (auto it = values.rbegin(); it != values.rend(); ++it) {
                Cube next = cube;
                next.emplace_back(need.atom, *it);
                stack.push_back(std::move(next));
            }
        }
    }
}

struct VecHash {
    std::size_t operator()(const std::vector<Value>& v) const noexcept
    {
        std::size_t h = 0xcbf29ce484222325ULL;
        ValueHash vh;
        for (const auto& x : v) h = (h ^ vh(x)) * 0x100000001b3ULL;
        return h;
    }
};

bool bounded(const AbstractionConfig& a) { return a.mode == AbstractionConfig::TimerMode::BoundedClock; }

Environment env_from_cube(const MachineDefinition& m, const Cube& cube, Instant clock)
{
    Environment env = default_environment(m, clock);
    for (const auto& [atom, v] : cube)
        if (atom.kind == Atom::Kind::Monitored) env.monitored[static_cast<size_t>(atom.index)] = v;
    return env;
}

} // namespace

MachineState TransitionSystem::concrete(int s) const
{
    const auto& vals = states.at(static_cast<size_t>(s));
    MachineState st;
    if (bounded(abstraction)) {
        st.controlled.assign(vals.begin(), vals.end() - 1);
        st.clock = vals.back().as_instant();
    } else {
        st.controlled = machine->initial_values;
        std::copy(vals.begin(), vals.end(), st.controlled.begin());
    }
    st.env = default_environment(*machine, st.clock);
    return st;
}

std::vector<int> TransitionSystem::path_to(int s) const
{
    std::vector<int> path;
    for (int e = parent_edge.at(static_cast<size_t>(s)); e >= 0; e = parent_edge[static_cast<size_t>(edges[static_cast<size_t>(e)].from)])
        path.push_back(e);
    std::reverse(path.begin(), path.end());
    return path;
}

TransitionSystem build_ts(const MachineDefinition& m, const AbstractionConfig& abstraction)
{
    if (m.main_rule < 0) throw Error(ErrorCode::UnresolvedSymbol, "machine has no main rule");
    TransitionSystem ts;
    ts.machine = &m;
    ts.abstraction = abstraction;
    const std::size_t budget = abstraction.state_budget ? abstraction.state_budget : default_state_budget();
    const bool clocked = bounded(abstraction);
    const size_t user = static_cast<size_t>(m.user_location_count());

    std::unordered_map<std::vector<Value>, int, VecHash> index;
    auto intern = [&](std::vector<Value> v, int parent) {
        auto [it, inserted] = index.try_emplace(v, static_cast<int>(ts.states.size()));
        if (inserted) {
            if (ts.states.size() >= budget)
                throw Error(ErrorCode::StateSpaceBudgetExceeded,
                            "more than " + std::to_string(budget) + " states (raise ASMWB_STATE_BUDGET)");
            ts.states.push_back(std::move(v));
            ts.out.emplace_back();
            ts.parent_edge.push_back(parent);
        }
        return it->second;
    };

    MachineState init = initial_state(m);
    std::vector<Value> init_vec;
    if (clocked) {
        init_vec = init.controlled;
        init_vec.push_back(Value::instant(init.clock));
    } else {
        init_vec.assign(init.controlled.begin(), init.controlled.begin() + static_cast<long>(user));
    }
    intern(std::move(init_vec), -1);

    for (size_t s = 0; s < ts.states.size(); ++s) {
        const MachineState cur = ts.concrete(static_cast<int>(s));
        Instant now = cur.clock;
        if (clocked) {
            now = Instant{cur.clock.ms + abstraction.tick.ms};
            if (now.ms > abstraction.horizon.ms) continue;
        }
        for_each_cube(m, cur, now, clocked, [&](BranchingInputs& inputs, const Cube& cube) {
            Evaluator ev(m, cur, inputs);
            UpdateSet updates = ev.fire(m.main_rule);
            if (!updates.consistent()) throw InconsistentUpdateSet(m, *updates.clash());
            TsEdge edge;
            edge.from = static_cast<int>(s);
            edge.label = cube;
            for (int t = 0; t < static_cast<int>(m.timers.size()); ++t) {
                if (updates.value_for(m.start_location(t))) edge.resets.push_back(t);
                if (auto d = updates.value_for(m.duration_location(t))) edge.durations.emplace_back(t, d->as_duration());
            }
            MachineState next = apply_updates(cur, updates, Environment{{}, now});
            std::vector<Value> vec;
            if (clocked) {
                vec = std::move(next.controlled);
                vec.push_back(Value::instant(now));
            } else {
                vec.assign(next.controlled.begin(), next.controlled.begin() + static_cast<long>(user));
            }
            const size_t edge_index = ts.edges.size();
            edge.to = intern(std::move(vec), static_cast<int>(edge_index));
            ts.edges.push_back(std::move(edge));
            ts.out[s].push_back(static_cast<int>(edge_index));
        });
    }
    return ts;
}

std::vector<std::pair<Cube, bool>> evaluate_all(const MachineDefinition& m, const MachineState& state, const Expr& formula,
                                                bool expiry_from_state)
{
    std::vector<std::pair<Cube, bool>> out;
    for_each_cube(m, state, state.clock, expiry_from_state, [&](BranchingInputs& inputs, const Cube& cube) {
        Evaluator ev(m, state, inputs);
        const bool v = ev.eval_bool(formula);
        out.emplace_back(cube, v);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Properties

ExprPtr InvariantProperty::state_formula() const
{
    switch (form) {
    case Form::Always: return p;
    case Form::AlwaysImplies: {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Implies;
        e->operands = {p, q};
        return e;
    }
    case Form::Never: {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Not;
        e->operands = {p};
        return e;
    }
    }
    return p;
}

namespace {

std::string strip(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Text inside `head(` ... `)` when the parenthesis opened after `head`
/// closes at the very end.
std::optional<std::string> wrapped(const std::string& text, const std::string& head)
{
    if (!text.starts_with(head)) return std::nullopt;
    size_t i = head.size();
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size() || text[i] != '(') return std::nullopt;
    int depth = 0;
    for (size_t j = i; j < text.size(); ++j) {
        if (text[j] == '(') ++depth;
        if (text[j] == ')' && --depth == 0) {
            if (j + 1 != text.size()) return std::nullopt;
            return text.substr(i + 1, j - i - 1);
        }
    }
    throw SyntaxError(1, static_cast<int>(text.size()) + 1, "')'", "end of input");
}

ExprPtr parse_atoms(const std::string& text, const MachineDefinition& m)
{
    try {
        return parse_expression(text, m);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnresolvedSymbol) throw Error(ErrorCode::UnknownAtom, e.message());
        throw;
    }
}

} // namespace

InvariantProperty parse_property(std::string_view text, const MachineDefinition& m)
{
    std::string body = strip(text);
    InvariantProperty prop;
    prop.text = body;
    if (body.starts_with("LTLSPEC")) body = strip(std::string_view(body).substr(7));
    if (auto inner = wrapped(body, "g")) {
        ExprPtr e = parse_atoms(*inner, m);
        if (e->kind == ExprKind::Implies) {
            prop.form = InvariantProperty::Form::AlwaysImplies;
            prop.p = e->operands[0];
            prop.q = e->operands[1];
        } else {
            prop.form = InvariantProperty::Form::Always;
            prop.p = e;
        }
        return prop;
    }
    if (body.starts_with("not")) {
        if (auto inner = wrapped(strip(std::string_view(body).substr(3)), "f")) {
            prop.form = InvariantProperty::Form::Never;
            prop.p = parse_atoms(*inner, m);
            return prop;
        }
    }
    throw SyntaxError(1, 1, "'g(...)' or 'not f(...)'", body.substr(0, std::min<size_t>(body.size(), 12)));
}

std::vector<InvariantProperty> load_properties(const std::string& path, const MachineDefinition& m)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptedAsset, "cannot read " + path);
    std::vector<InvariantProperty> out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto c = line.find("//"); c != std::string::npos) line.resize(c);
        if (strip(line).empty()) continue;
        out.push_back(parse_property(line, m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concretization

namespace {

struct Constraint {
    int a, b;   // t_a - t_b <= c
    Millis c;
};

std::optional<std::vector<Millis>> solve(int n, const std::vector<Constraint>& cs)
{
    // Virtual source with zero edges to every node; an edge b -> a of weight c
    // per constraint. Feasible iff no negative cycle.
    std::vector<Millis> dist(static_cast<size_t>(n), 0);
    for (int round = 0; round <= n; ++round) {
        bool changed = false;
        for (const auto& k : cs) {
            const Millis cand = dist[static_cast<size_t>(k.b)] + k.c;
            if (cand < dist[static_cast<size_t>(k.a)]) {
                dist[static_cast<size_t>(k.a)] = cand;
                changed = true;
            }
        }
        if (!changed) {
            const Millis base = dist[0];
            for (auto& d : dist) d -= base;
            return dist;
        }
    }
    return std::nullopt;
}

std::optional<std::vector<Millis>> clock_values(const TransitionSystem& ts, const std::vector<int>& path, Millis min_gap)
{
    const auto& m = *ts.machine;
    const int k = static_cast<int>(path.size());
    std::vector<Constraint> cs;
    std::vector<int> last_reset(m.timers.size(), 0);
    std::vector<Millis> duration(m.timers.size());
    for (size_t t = 0; t < m.timers.size(); ++t)
        duration[t] = m.initial_values[static_cast<size_t>(m.duration_location(static_cast<int>(t)))].as_duration().ms;
    for (int j = 1; j <= k; ++j) {
        const auto& e = ts.edges[static_cast<size_t>(path[static_cast<size_t>(j - 1)])];
        cs.push_back({j - 1, j, -min_gap});
        for (const auto& [atom, v] : e.label) {
            if (atom.kind != Atom::Kind::Expired) continue;
            const int r = last_reset[static_cast<size_t>(atom.index)];
            const Millis d = duration[static_cast<size_t>(atom.index)];
            if (v.as_bool())
                cs.push_back({r, j, -d});     // t_j - t_r >= d
            else
                cs.push_back({j, r, d - 1});  // t_j - t_r <= d - 1
        }
        for (int t : e.resets) last_reset[static_cast<size_t>(t)] = j;
        for (const auto& [t, d] : e.durations) duration[static_cast<size_t>(t)] = d.ms;
    }
    return solve(k + 1, cs);
}

} // namespace

std::optional<Trace> concretize(const TransitionSystem& ts, const std::vector<int>& path)
{
    const auto& m = *ts.machine;
    std::vector<Millis> clocks;
    if (bounded(ts.abstraction)) {
        for (size_t j = 0; j <= path.size(); ++j) clocks.push_back(static_cast<Millis>(j) * ts.abstraction.tick.ms);
    } else {
        // Prefer strictly increasing clock readings; fall back to equal ones.
        auto solved = clock_values(ts, path, 1);
        if (!solved) solved = clock_values(ts, path, 0);
        if (!solved) return std::nullopt;
        clocks = std::move(*solved);
    }
    Trace trace;
    trace.states.push_back(initial_state(m));
    const size_t user = static_cast<size_t>(m.user_location_count());
    for (size_t j = 0; j < path.size(); ++j) {
        const auto& e = ts.edges[static_cast<size_t>(path[j])];
        Environment env = env_from_cube(m, e.label, Instant{clocks[j + 1]});
        MachineState next;
        try {
            next = step(m, trace.states.back(), env);
        } catch (const Error&) {
            return std::nullopt;
        }
        const auto& expect = ts.states[static_cast<size_t>(e.to)];
        const size_t n = bounded(ts.abstraction) ? next.controlled.size() : user;
        if (!std::equal(expect.begin(), expect.begin() + static_cast<long>(n), next.controlled.begin())) return std::nullopt;
        trace.inputs.push_back(env);
        trace.states.push_back(std::move(next));
    }
    return trace;
}

CheckResult check_invariant(const TransitionSystem& ts, const InvariantProperty& prop)
{
    const auto start = std::chrono::steady_clock::now();
    const auto& m = *ts.machine;
    CheckResult result;
    result.states = ts.states.size();
    result.edges = ts.edges.size();
    const ExprPtr formula = prop.state_formula();
    for (size_t s = 0; s < ts.states.size() && !result.counterexample; ++s) {
        const MachineState st = ts.concrete(static_cast<int>(s));
        for (const auto& [cube, holds] : evaluate_all(m, st, *formula, bounded(ts.abstraction))) {
            if (holds) continue;
            Counterexample cex;
            cex.property = prop;
            const auto path = ts.path_to(static_cast<int>(s));
            if (auto trace = concretize(ts, path)) {
                cex.trace = std::move(*trace);
            } else {
                cex.abstract_only = true;
                cex.trace.states.push_back(ts.concrete(0));
                for (size_t j = 0; j < path.size(); ++j) {
                    const auto& e = ts.edges[static_cast<size_t>(path[j])];
                    cex.trace.inputs.push_back(env_from_cube(m, e.label, Instant{static_cast<Millis>(j + 1) * 1000}));
                    cex.trace.states.push_back(ts.concrete(e.to));
                }
            }
            cex.violated_at = path.size();
            cex.violating_inputs = env_from_cube(m, cube, cex.trace.states.back().clock);
            result.counterexample = std::move(cex);
            break;
        }
    }
    result.verified = !result.counterexample;
    result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return result;
}

CheckResult check_invariant(const MachineDefinition& m, const InvariantProperty& prop, const AbstractionConfig& abstraction)
{
    const auto start = std::chrono::steady_clock::now();
    const TransitionSystem ts = build_ts(m, abstraction);
    CheckResult r = check_invariant(ts, prop);
    r.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return r;
}

std::string export_scenario(const MachineDefinition& m, const Counterexample& cex)
{
    std::ostringstream out;
    out << "// counterexample for: " << cex.property.text << "\n";
    if (cex.abstract_only) out << "// abstract only: no clock realizes this expiry pattern\n";
    auto seconds = [](Instant t) {
        std::ostringstream s;
        s << t.ms / 1000;
        if (t.ms % 1000) s << "." << std::setw(3) << std::setfill('0') << t.ms % 1000;
        return s.str();
    };
    auto sets = [&](const Environment& env) {
        for (size_t slot = 0; slot < m.monitored.size(); ++slot)
            if (env.monitored[slot])
                out << "set " << m.functions[static_cast<size_t>(m.monitored[slot])].name << " := "
                    << m.value_to_string(*env.monitored[slot]) << ";\n";
    };
    for (const auto& env : cex.trace.inputs) {
        sets(env);
        if (m.has_time_library()) out << "set " << timelib::kClock << " := " << seconds(env.clock) << ";\n";
        out << "step\n";
    }
    sets(cex.violating_inputs);
    out << "check " << print_expr(*cex.property.state_formula()) << ";\n";
    return out.str();
}

} // namespace asmwb
