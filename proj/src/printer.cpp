#include "asmwb/dsl.hpp"

#include <sstream>

namespace asmwb {

namespace {

int precedence(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Implies: return 1;
    case ExprKind::Or: return 2;
    case ExprKind::And: return 3;
    case ExprKind::Not: return 4;
    case ExprKind::Eq:
    case ExprKind::Neq: return 5;
    default: return 6;
    }
}

std::string wrap(const Expr& e, bool parens) { return parens ? "(" + print_expr(e) + ")" : print_expr(e); }

std::string pad(int indent) { return std::string(static_cast<size_t>(indent) * 4, ' '); }

std::string duration_text(Millis ms) { return ms % 1000 == 0 ? std::to_string(ms / 1000) + "s" : std::to_string(ms) + "ms"; }

} // namespace

std::string print_expr(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::BoolConst: return e.bool_value ? "true" : "false";
    case ExprKind::Ident: return e.name;
    case ExprKind::Expired: return "expired(" + e.name + ")";
    case ExprKind::Not: return "not " + wrap(*e.operands[0], precedence(*e.operands[0]) < 4);
    case ExprKind::Eq:
    case ExprKind::Neq:
        return wrap(*e.operands[0], precedence(*e.operands[0]) < 6) + (e.kind == ExprKind::Eq ? " = " : " != ") +
               wrap(*e.operands[1], precedence(*e.operands[1]) < 6);
    case ExprKind::Implies:
        return wrap(*e.operands[0], precedence(*e.operands[0]) <= 1) + " implies " +
               wrap(*e.operands[1], precedence(*e.operands[1]) < 1);
    case ExprKind::Or:
    case ExprKind::And: {
        const int p = precedence(e);
        return wrap(*e.operands[0], precedence(*e.operands[0]) < p) + (e.kind == ExprKind::Or ? " or " : " and ") +
               wrap(*e.operands[1], precedence(*e.operands[1]) <= p);
    }
    }
    return {};
}

std::string print_rule(const Rule& r, int indent)
{
    std::ostringstream out;
    const std::string p = pad(indent);
    switch (r.kind) {
    case RuleKind::Skip: out << p << "skip\n"; break;
    case RuleKind::Update: out << p << r.target << " := " << print_expr(*r.value) << "\n"; break;
    case RuleKind::Par:
        out << p << "par\n";
        for (const auto& c : r.children) out << print_rule(*c, indent + 1);
        out << p << "endpar\n";
        break;
    case RuleKind::If:
        out << p << "if " << print_expr(*r.guard) << " then\n" << print_rule(*r.then_rule, indent + 1);
        if (r.else_rule) out << p << "else\n" << print_rule(*r.else_rule, indent + 1);
        out << p << "endif\n";
        break;
    case RuleKind::Call: {
        out << p << r.callee << "[";
        for (size_t i = 0; i < r.args.size(); ++i) out << (i ? ", " : "") << r.args[i].text;
        out << "]\n";
        break;
    }
    }
    return out.str();
}

std::string print(const MachineDefinition& m)
{
    std::ostringstream out;
    out << "asm " << m.name << "\n\n";
    for (const auto& i : m.imports) out << "import " << i << "\n";
    if (!m.imports.empty()) out << "\n";

    out << "signature:\n";
    for (const auto& d : m.domains) {
        out << "    enum domain " << d.name << " = {";
        for (size_t i = 0; i < d.literals.size(); ++i) out << (i ? " | " : "") << d.literals[i];
        out << "}\n";
    }
    for (const auto& f : m.functions) {
        if (f.module != m.name) continue;
        std::string type = f.codomain.kind == Type::Kind::Timer ? "Timer" : m.type_name(f.codomain);
        out << "    " << function_kind_name(f.kind) << " " << f.name << ": " << type << "\n";
    }

    out << "\ndefinitions:\n";
    for (const auto& t : m.timers) {
        out << "    function " << t.name << " = ";
        if (!t.config_key.empty())
            out << t.config_key << "\n";
        else
            out << duration_text(t.duration->ms) << "\n";
    }
    for (const auto& f : m.functions)
        if (f.module == m.name && f.definition) out << "    function " << f.name << " = " << print_expr(*f.definition) << "\n";
    for (const auto& r : m.rules) {
        if (r.module != m.name || !r.body) continue;
        out << "\n    " << (r.is_main ? "main rule " : "rule ") << r.name << " =\n" << print_rule(*r.body, 2);
    }

    if (!m.init.empty()) {
        out << "\ndefault init " << m.init_name << ":\n";
        for (const auto& e : m.init) out << "    function " << e.function << " = " << print_expr(*e.value) << "\n";
    }
    return out.str();
}

bool structurally_equal(const Expr& a, const Expr& b)
{
    if (a.kind != b.kind || a.name != b.name || a.operands.size() != b.operands.size()) return false;
    if (a.kind == ExprKind::BoolConst && a.bool_value != b.bool_value) return false;
    for (size_t i = 0; i < a.operands.size(); ++i)
        if (!structurally_equal(*a.operands[i], *b.operands[i])) return false;
    return true;
}

namespace {

bool same_expr(const ExprPtr& a, const ExprPtr& b)
{
    if (!a || !b) return !a && !b;
    return structurally_equal(*a, *b);
}

bool same_rule(const RulePtr& a, const RulePtr& b)
{
    if (!a || !b) return !a && !b;
    return structurally_equal(*a, *b);
}

} // namespace

bool structurally_equal(const Rule& a, const Rule& b)
{
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case RuleKind::Skip: return true;
    case RuleKind::Update: return a.target == b.target && same_expr(a.value, b.value);
    case RuleKind::Par:
        if (a.children.size() != b.children.size()) return false;
        for (size_t i = 0; i < a.children.size(); ++i)
            if (!same_rule(a.children[i], b.children[i])) return false;
        return true;
    case RuleKind::If:
        return same_expr(a.guard, b.guard) && same_rule(a.then_rule, b.then_rule) && same_rule(a.else_rule, b.else_rule);
    case RuleKind::Call:
        if (a.callee != b.callee || a.args.size() != b.args.size()) return false;
        for (size_t i = 0; i < a.args.size(); ++i)
            if (a.args[i].text != b.args[i].text) return false;
        return true;
    }
    return false;
}

bool structurally_equal(const MachineDefinition& a, const MachineDefinition& b)
{
    if (a.name != b.name || a.imports != b.imports || a.init_name != b.init_name) return false;
    if (a.domains.size() != b.domains.size() || a.functions.size() != b.functions.size() ||
        a.timers.size() != b.timers.size() || a.rules.size() != b.rules.size() || a.init.size() != b.init.size())
        return false;
    for (size_t i = 0; i < a.domains.size(); ++i)
        if (a.domains[i].name != b.domains[i].name || a.domains[i].literals != b.domains[i].literals) return false;
    for (size_t i = 0; i < a.functions.size(); ++i) {
        const auto& x = a.functions[i];
        const auto& y = b.functions[i];
        if (x.name != y.name || x.kind != y.kind || !(x.codomain == y.codomain) || x.module != y.module ||
            x.arity != y.arity || !same_expr(x.definition, y.definition))
            return false;
    }
    for (size_t i = 0; i < a.timers.size(); ++i) {
        const auto& x = a.timers[i];
        const auto& y = b.timers[i];
        if (x.name != y.name || x.config_key != y.config_key || x.duration != y.duration) return false;
    }
    for (size_t i = 0; i < a.rules.size(); ++i) {
        const auto& x = a.rules[i];
        const auto& y = b.rules[i];
        if (x.name != y.name || x.module != y.module || x.is_main != y.is_main || x.library != y.library ||
            !same_rule(x.body, y.body))
            return false;
    }
    for (size_t i = 0; i < a.init.size(); ++i)
        if (a.init[i].function != b.init[i].function || !same_expr(a.init[i].value, b.init[i].value)) return false;
    return true;
}

} // namespace asmwb
