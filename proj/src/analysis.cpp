#include "asmwb/dsl.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace asmwb {

namespace {

// Update, Par, If and Call nodes; skip is not a rule of its own.
int count_nodes(const Rule& r)
{
    int n = r.kind == RuleKind::Skip ? 0 : 1;
    for (const auto& c : r.children) n += count_nodes(*c);
    if (r.then_rule) n += count_nodes(*r.then_rule);
    if (r.else_rule) n += count_nodes(*r.else_rule);
    return n;
}

} // namespace

ModelStats stats(const MachineDefinition& m)
{
    ModelStats s;
    for (const auto& f : m.functions) {
        if (f.module != m.name) continue;
        switch (f.kind) {
        case FunctionKind::Monitored: ++s.monitored; break;
        case FunctionKind::Controlled: ++s.controlled; break;
        case FunctionKind::Derived: ++s.derived; break;
        case FunctionKind::Static: ++s.statics; break;
        }
    }
    for (const auto& r : m.rules) {
        if (r.module != m.name) continue;
        ++s.rule_declarations;
        s.rules_including_nested += r.body ? std::max(1, count_nodes(*r.body)) : 1;
    }
    return s;
}

LintReport lint(const MachineDefinition& m)
{
    std::set<int> used_functions;
    std::set<int> used_rules;

    std::function<void(const Expr&)> read = [&](const Expr& e) {
        if (e.kind == ExprKind::Ident && e.ref == Expr::Ref::Function) {
            if (used_functions.insert(e.index).second) {
                const auto& f = m.functions[static_cast<size_t>(e.index)];
                if (f.definition) read(*f.definition);
            }
        }
        if (e.kind == ExprKind::Expired && e.index >= 0)
            used_functions.insert(m.timers[static_cast<size_t>(e.index)].function);
        for (const auto& o : e.operands) read(*o);
    };
    std::function<void(int)> use_rule;
    std::function<void(const Rule&)> walk = [&](const Rule& r) {
        switch (r.kind) {
        case RuleKind::Update:
            used_functions.insert(r.function);
            read(*r.value);
            break;
        case RuleKind::If: read(*r.guard); break;
        case RuleKind::Call:
            if (r.rule >= 0) use_rule(r.rule);
            for (int t : r.arg_timers) used_functions.insert(m.timers[static_cast<size_t>(t)].function);
            break;
        default: break;
        }
        for (const auto& c : r.children) walk(*c);
        if (r.then_rule) walk(*r.then_rule);
        if (r.else_rule) walk(*r.else_rule);
    };
    use_rule = [&](int i) {
        if (!used_rules.insert(i).second) return;
        const auto& decl = m.rules[static_cast<size_t>(i)];
        if (decl.body) walk(*decl.body);
    };

    if (m.main_rule >= 0) {
        use_rule(m.main_rule);
    } else {
        for (size_t i = 0; i < m.rules.size(); ++i) use_rule(static_cast<int>(i));
    }

    LintReport report;
    for (size_t i = 0; i < m.functions.size(); ++i) {
        const auto& f = m.functions[i];
        if (f.module == m.name && !used_functions.count(static_cast<int>(i)))
            report.unused_declarations.push_back(f.name);
    }
    for (size_t i = 0; i < m.rules.size(); ++i) {
        const auto& r = m.rules[i];
        if (r.module == m.name && !used_rules.count(static_cast<int>(i))) report.unused_declarations.push_back(r.name);
    }

    // Names living in more than one namespace (rules, values, domains).
    std::map<std::string, int> spaces;
    std::set<std::string> values;
    for (const auto& f : m.functions) values.insert(f.name);
    for (const auto& d : m.domains)
        for (const auto& l : d.literals) values.insert(l);
    for (const auto& v : values) spaces[v] |= 1;
    for (const auto& r : m.rules) spaces[r.name] |= 2;
    for (const auto& d : m.domains) spaces[d.name] |= 4;
    for (const auto& [name, mask] : spaces)
        if (mask != 1 && mask != 2 && mask != 4) report.shadowed_names.push_back(name);
    return report;
}

namespace {

// Matches `loc = LIT` (either side) over a controlled enum location.
std::optional<std::pair<int, Value>> dispatch_guard(const MachineDefinition& m, const Expr& g)
{
    if (g.kind != ExprKind::Eq) return std::nullopt;
    const Expr* fn = g.operands[0].get();
    const Expr* lit = g.operands[1].get();
    if (fn->ref == Expr::Ref::Literal) std::swap(fn, lit);
    if (fn->kind != ExprKind::Ident || fn->ref != Expr::Ref::Function || lit->ref != Expr::Ref::Literal) return std::nullopt;
    const auto& f = m.functions[static_cast<size_t>(fn->index)];
    if (f.kind != FunctionKind::Controlled || f.codomain.kind != Type::Kind::Enum) return std::nullopt;
    return std::make_pair(fn->index, lit->literal);
}

void collect_dispatch(const MachineDefinition& m, const Rule& r, std::vector<std::pair<int, std::pair<Value, const Rule*>>>& out)
{
    if (r.kind == RuleKind::Par) {
        for (const auto& c : r.children) collect_dispatch(m, *c, out);
        return;
    }
    if (r.kind != RuleKind::If) throw Error(ErrorCode::NotControlStateShaped, "main rule arm is not a state dispatch");
    auto g = dispatch_guard(m, *r.guard);
    if (!g) throw Error(ErrorCode::NotControlStateShaped, "guard '" + print_expr(*r.guard) + "' is not `location = literal`");
    out.push_back({g->first, {g->second, r.then_rule.get()}});
    if (r.else_rule) collect_dispatch(m, *r.else_rule, out);
}

} // namespace

GraphDoc export_state_graph(const MachineDefinition& m)
{
    if (m.main_rule < 0) throw Error(ErrorCode::NotControlStateShaped, "machine has no main rule");
    const auto& main = m.rules[static_cast<size_t>(m.main_rule)];
    std::vector<std::pair<int, std::pair<Value, const Rule*>>> arms;
    collect_dispatch(m, *main.body, arms);
    if (arms.empty()) throw Error(ErrorCode::NotControlStateShaped, "main rule has no dispatch");
    const int loc_fn = arms.front().first;
    for (const auto& a : arms)
        if (a.first != loc_fn)
            throw Error(ErrorCode::NotControlStateShaped, "main rule dispatches on more than one location");

    GraphDoc doc;
    const auto& f = m.functions[static_cast<size_t>(loc_fn)];
    doc.mode_location = f.name;
    const auto& domain = m.domains[static_cast<size_t>(f.codomain.domain)];
    doc.nodes = domain.literals;

    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& [fn, arm] : arms) {
        const std::string from = domain.literals[static_cast<size_t>(arm.first.literal_index())];
        std::set<int> visited;
        std::function<void(const Rule&, const std::string&)> scan = [&](const Rule& r, const std::string& owner) {
            switch (r.kind) {
            case RuleKind::Update:
                if (r.function == loc_fn && r.value->ref == Expr::Ref::Literal) {
                    const std::string to = domain.literals[static_cast<size_t>(r.value->literal.literal_index())];
                    if (to != from && seen.insert({from, to, owner}).second) doc.edges.push_back({from, to, owner});
                }
                break;
            case RuleKind::Call:
                if (r.rule >= 0 && visited.insert(r.rule).second) {
                    const auto& decl = m.rules[static_cast<size_t>(r.rule)];
                    if (decl.body) scan(*decl.body, decl.name);
                }
                break;
            default: break;
            }
            for (const auto& c : r.children) scan(*c, owner);
            if (r.then_rule) scan(*r.then_rule, owner);
            if (r.else_rule) scan(*r.else_rule, owner);
        };
        scan(*arm.second, main.name);
    }
    return doc;
}

std::string GraphDoc::dot(const std::string& graph_name) const
{
    std::ostringstream out;
    out << "digraph " << graph_name << " {\n";
    out << "    // control states of '" << mode_location << "'\n";
    for (const auto& n : nodes) out << "    " << n << ";\n";
    for (const auto& e : edges) out << "    " << e.from << " -> " << e.to << " [label=\"" << e.label << "\"];\n";
    out << "}\n";
    return out.str();
}

} // namespace asmwb
