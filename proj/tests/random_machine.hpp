#pragma once

// Random well-typed machines for property tests: up to three booleans x0..x2,
// an enum c over {RED, GREEN, BLUE}, monitored booleans m0 and m1, a derived
// boolean d, and acyclic macros. Each comes with a naive reference
// evaluator that shares no code with the library.

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace randmachine {

struct RefState {
    std::map<std::string, int> v;  // booleans as 0/1, c as literal index
};

inline const std::vector<std::string> kColors{"RED", "GREEN", "BLUE"};

struct RExpr {
    enum Kind { Const, Var, Not, And, Or, EqColor, EqVars } kind = Const;
    bool b = false;
    std::string name;  // Var / EqColor lhs
    int color = 0;
    std::vector<RExpr> ops;
};

struct RRule {
    enum Kind { Skip, Update, Par, If, Call } kind = Skip;
    std::string target;
    RExpr value;  // boolean targets
    int color = 0;  // c := literal
    std::vector<RRule> children;
    RExpr guard;
    bool has_else = false;
    int macro = -1;
};

struct RMachine {
    int n_bool = 0;
    RExpr derived;
    std::vector<RRule> macros;  // macro i only calls macros > i
    RRule main;
};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
    bool coin() { return pick(2) == 1; }

    std::vector<std::string> bool_reads(const RMachine& m, bool with_derived) const
    {
        std::vector<std::string> out;
        for (int i = 0; i < m.n_bool; ++i) out.push_back("x" + std::to_string(i));
        out.push_back("m0");
        out.push_back("m1");
        if (with_derived) out.push_back("d");
        return out;
    }

    RExpr expr(const RMachine& m, int depth, bool with_derived)
    {
        const auto reads = bool_reads(m, with_derived);
        const int k = depth <= 0 ? pick(2) : pick(7);
        RExpr e;
        switch (k) {
        case 0: e.kind = RExpr::Const; e.b = coin(); break;
        case 1: e.kind = RExpr::Var; e.name = reads[static_cast<size_t>(pick(static_cast<int>(reads.size())))]; break;
        case 2: e.kind = RExpr::Not; e.ops.push_back(expr(m, depth - 1, with_derived)); break;
        case 3:
        case 4:
            e.kind = k == 3 ? RExpr::And : RExpr::Or;
            e.ops.push_back(expr(m, depth - 1, with_derived));
            e.ops.push_back(expr(m, depth - 1, with_derived));
            break;
        case 5: e.kind = RExpr::EqColor; e.color = pick(3); break;
        default:
            e.kind = RExpr::EqVars;
            e.ops.push_back({RExpr::Var, false, reads[static_cast<size_t>(pick(static_cast<int>(reads.size())))], 0, {}});
            e.ops.push_back({RExpr::Var, false, reads[static_cast<size_t>(pick(static_cast<int>(reads.size())))], 0, {}});
        }
        return e;
    }

    RRule rule(const RMachine& m, int depth, int first_macro)
    {
        const int k = depth <= 0 ? pick(2) : pick(6);
        RRule r;
        switch (k) {
        case 0: r.kind = RRule::Skip; break;
        case 1: {
            r.kind = RRule::Update;
            const int t = pick(m.n_bool + 1);
            if (t == m.n_bool) {
                r.target = "c";
                r.color = pick(3);
            } else {
                r.target = "x" + std::to_string(t);
                r.value = expr(m, 2, true);
            }
            break;
        }
        case 2:
        case 3: {
            r.kind = RRule::Par;
            const int n = 1 + pick(4);
            for (int i = 0; i < n; ++i) r.children.push_back(rule(m, depth - 1, first_macro));
            break;
        }
        case 4:
            r.kind = RRule::If;
            r.guard = expr(m, 2, true);
            r.children.push_back(rule(m, depth - 1, first_macro));
            r.has_else = coin();
            if (r.has_else) r.children.push_back(rule(m, depth - 1, first_macro));
            break;
        default:
            if (first_macro >= static_cast<int>(m.macros.size())) return rule(m, 0, first_macro);
            r.kind = RRule::Call;
            r.macro = first_macro + pick(static_cast<int>(m.macros.size()) - first_macro);
        }
        return r;
    }

    RMachine machine()
    {
        RMachine m;
        m.n_bool = 1 + pick(3);
        m.derived = expr(m, 2, false);
        const int n_macros = pick(4);
        m.macros.resize(static_cast<size_t>(n_macros));
        for (int i = n_macros - 1; i >= 0; --i) m.macros[static_cast<size_t>(i)] = rule(m, 2, i + 1);
        m.main.kind = RRule::Par;
        const int n = 2 + pick(4);
        for (int i = 0; i < n; ++i) m.main.children.push_back(rule(m, 3, 0));
        return m;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline std::string text(const RExpr& e)
{
    switch (e.kind) {
    case RExpr::Const: return e.b ? "true" : "false";
    case RExpr::Var: return e.name;
    case RExpr::Not: return "not (" + text(e.ops[0]) + ")";
    case RExpr::And: return "(" + text(e.ops[0]) + ") and (" + text(e.ops[1]) + ")";
    case RExpr::Or: return "(" + text(e.ops[0]) + ") or (" + text(e.ops[1]) + ")";
    case RExpr::EqColor: return "c = " + kColors[static_cast<size_t>(e.color)];
    case RExpr::EqVars: return text(e.ops[0]) + " != " + text(e.ops[1]);
    }
    return {};
}

inline std::string text(const RRule& r)
{
    switch (r.kind) {
    case RRule::Skip: return "skip";
    case RRule::Update:
        return r.target + " := " + (r.target == "c" ? kColors[static_cast<size_t>(r.color)] : "(" + text(r.value) + ")");
    case RRule::Par: {
        std::string s = "par";
        for (const auto& c : r.children) s += " " + text(c);
        return s + " endpar";
    }
    case RRule::If:
        return "if " + text(r.guard) + " then " + text(r.children[0]) + (r.has_else ? " else " + text(r.children[1]) : "") +
               " endif";
    case RRule::Call: return "r_m" + std::to_string(r.macro) + "[]";
    }
    return {};
}

inline std::string source(const RMachine& m)
{
    std::string s = "asm Random\nsignature:\n    enum domain Color = {RED | GREEN | BLUE}\n";
    s += "    monitored m0: Boolean\n    monitored m1: Boolean\n";
    for (int i = 0; i < m.n_bool; ++i) s += "    controlled x" + std::to_string(i) + ": Boolean\n";
    s += "    controlled c: Color\n    derived d: Boolean\ndefinitions:\n";
    s += "    function d = " + text(m.derived) + "\n";
    for (size_t i = 0; i < m.macros.size(); ++i) s += "    rule r_m" + std::to_string(i) + " = " + text(m.macros[i]) + "\n";
    s += "    main rule r_Main = " + text(m.main) + "\ndefault init s0:\n";
    for (int i = 0; i < m.n_bool; ++i) s += "    function x" + std::to_string(i) + " = false\n";
    return s + "    function c = RED\n";
}

// Naive reference semantics.
inline int ref_eval(const RMachine& m, const RExpr& e, const RefState& s)
{
    switch (e.kind) {
    case RExpr::Const: return e.b;
    case RExpr::Var: return e.name == "d" ? ref_eval(m, m.derived, s) : s.v.at(e.name);
    case RExpr::Not: return !ref_eval(m, e.ops[0], s);
    case RExpr::And: return ref_eval(m, e.ops[0], s) && ref_eval(m, e.ops[1], s);
    case RExpr::Or: return ref_eval(m, e.ops[0], s) || ref_eval(m, e.ops[1], s);
    case RExpr::EqColor: return s.v.at("c") == e.color;
    case RExpr::EqVars: return ref_eval(m, e.ops[0], s) != ref_eval(m, e.ops[1], s);
    }
    return 0;
}

inline void ref_updates(const RMachine& m, const RRule& r, const RefState& s, std::vector<std::pair<std::string, int>>& out)
{
    switch (r.kind) {
    case RRule::Skip: return;
    case RRule::Update: out.push_back({r.target, r.target == "c" ? r.color : ref_eval(m, r.value, s)}); return;
    case RRule::Par:
        for (const auto& c : r.children) ref_updates(m, c, s, out);
        return;
    case RRule::If:
        if (ref_eval(m, r.guard, s))
            ref_updates(m, r.children[0], s, out);
        else if (r.has_else)
            ref_updates(m, r.children[1], s, out);
        return;
    case RRule::Call: ref_updates(m, m.macros[static_cast<size_t>(r.macro)], s, out); return;
    }
}

} // namespace randmachine
