#pragma once

// Textual model language: a small AsmetaL-style subset (signature, static
// and derived definitions, macro rules built from update/par/if/call, and a
// default initial state). Grammar: docs/grammar.ebnf.

#include "asmwb/machine.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace asmwb {

struct SourceModel {
    std::string text;
    std::string origin = "<inline>";
};

/// Parses and resolves a model. Throws SyntaxError, DuplicateDeclaration,
/// UnknownImport, UnresolvedSymbol, TypeMismatch.
MachineDefinition parse(const SourceModel& src);
MachineDefinition parse_file(const std::filesystem::path& path);

/// Parses a boolean expression over the machine's signature.
ExprPtr parse_expression(std::string_view text, const MachineDefinition& machine);

/// Canonical source text; parse(print(m)) is structurally equal to m.
std::string print(const MachineDefinition& machine);
std::string print_expr(const Expr& expr);
std::string print_rule(const Rule& rule, int indent = 0);

/// Equality of declarations and rule trees, ignoring source positions.
bool structurally_equal(const MachineDefinition& a, const MachineDefinition& b);
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Rule& a, const Rule& b);

struct ModelStats {
    int monitored = 0;
    int controlled = 0;
    int derived = 0;
    int statics = 0;
    int rule_declarations = 0;
    int rules_including_nested = 0;

    bool operator==(const ModelStats&) const = default;
};

/// Counts the machine's own declarations (imported library declarations are
/// excluded). Nested rules: every rule node of every declaration, and one
/// per body-less library rule.
ModelStats stats(const MachineDefinition& machine);

struct LintReport {
    std::vector<std::string> unused_declarations;
    std::vector<std::string> shadowed_names;

    [[nodiscard]] bool clean() const { return unused_declarations.empty() && shadowed_names.empty(); }
};

LintReport lint(const MachineDefinition& machine);

struct GraphEdge {
    std::string from;
    std::string to;
    std::string label;
};

struct GraphDoc {
    std::string mode_location;
    std::vector<std::string> nodes;
    std::vector<GraphEdge> edges;

    [[nodiscard]] std::string dot(const std::string& graph_name = "G") const;
};

/// Control-state diagram of a machine whose main rule dispatches on one enum
/// location. Throws NotControlStateShaped otherwise.
GraphDoc export_state_graph(const MachineDefinition& machine);

} // namespace asmwb
