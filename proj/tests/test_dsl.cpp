#include "asmwb/dsl.hpp"
#include "asmwb/models.hpp"
#include "asmwb/time_library.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace asmwb;

namespace {

template <class F>
std::optional<ErrorCode> code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::optional<ErrorCode> parse_code(const std::string& text)
{
    return code_of([&] { parse({text}); });
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small machine used as a base for error cases.
std::string tiny(const std::string& signature_extra, const std::string& definitions, const std::string& init = " function s = A\n")
{
    return "asm Tiny\nsignature:\n enum domain D = {A | B}\n monitored go: Boolean\n controlled s: D\n" + signature_extra +
           "definitions:\n" + definitions + "default init s0:\n" + init;
}

const std::string kMain = " main rule r_Main = if go then s := B endif\n";

bool has_edge(const GraphDoc& g, const std::string& a, const std::string& b)
{
    return std::any_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) { return e.from == a && e.to == b; });
}

} // namespace

TEST_CASE("empty input fails at the first character")
{
    try {
        parse({""});
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 1);
        CHECK(e.col() == 1);
        CHECK(e.code() == ErrorCode::SyntaxError);
    }
}

TEST_CASE("syntax errors carry position and expectation")
{
    try {
        parse({"asm X\nsignature:\n controlled s Boolean\n"});
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line() == 3);
        CHECK(e.col() == 15);
        CHECK(e.expected().find(":") != std::string::npos);
    }
    CHECK(parse_code(tiny("", " main rule r_Main = if go then s := B\n")) == ErrorCode::SyntaxError);
    CHECK(parse_code(tiny("", " main rule r_Main = par s := B\n")) == ErrorCode::SyntaxError);
    CHECK(parse_code(tiny("", " main rule r_Main = s := B $\n")) == ErrorCode::SyntaxError);
}

TEST_CASE("dispatch main rule of the base level")
{
    auto m = load(0);
    const auto& body = *m.rules[static_cast<size_t>(m.main_rule)].body;
    REQUIRE(body.kind == RuleKind::Par);
    REQUIRE(body.children.size() == 5);
    for (const auto& arm : body.children) {
        REQUIRE(arm->kind == RuleKind::If);
        CHECK(arm->then_rule->kind == RuleKind::Call);
        CHECK_FALSE(arm->else_rule);
    }
    CHECK(print_expr(*body.children[0]->guard) == "state = STARTUP");
}

TEST_CASE("resolution errors")
{
    CHECK(parse_code(tiny("", kMain)).has_value() == false);
    CHECK(parse_code(tiny("", " main rule r_Main = t := B\n")) == ErrorCode::UnresolvedSymbol);
    CHECK(parse_code(tiny("", " main rule r_Main = if nope then s := B endif\n")) == ErrorCode::UnresolvedSymbol);
    CHECK(parse_code(tiny("", " main rule r_Main = r_missing[]\n")) == ErrorCode::UnresolvedSymbol);
    CHECK(parse_code(tiny(" controlled s: Boolean\n", kMain)) == ErrorCode::DuplicateDeclaration);
    CHECK(parse_code(tiny("", kMain + " rule r_Main = skip\n")) == ErrorCode::DuplicateDeclaration);
    CHECK(parse_code(tiny(" enum domain E = {B | C}\n", kMain)) == ErrorCode::DuplicateDeclaration);
    CHECK(parse_code("asm X\nimport StandardLibrary\nsignature:\ndefinitions:\n") == ErrorCode::UnknownImport);
    // Controlled functions without an init entry start at their default.
    auto m = parse({tiny(" controlled t: Boolean\n controlled u: D\n", kMain)});
    CHECK(m.initial_values.at(static_cast<size_t>(*m.find_location("t"))) == Value::boolean(false));
    CHECK(m.value_to_string(m.initial_values.at(static_cast<size_t>(*m.find_location("u")))) == "A");
}

TEST_CASE("type errors")
{
    CHECK(parse_code(tiny("", " main rule r_Main = s := true\n")) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny("", " main rule r_Main = if s = true then skip endif\n")) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny("", " main rule r_Main = if s then skip endif\n")) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny("", " main rule r_Main = go := true\n")) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny(" derived d: Boolean\n", " function d = s\n" + kMain)) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny(" static k: Boolean\n", " function k = go\n" + kMain)) == ErrorCode::TypeMismatch);
    CHECK(parse_code(tiny("", kMain, " function s = go\n")) == ErrorCode::TypeMismatch);
}

TEST_CASE("time library use is checked")
{
    const std::string timed = "asm T\nimport TimeLibrary\nsignature:\n controlled b: Boolean\n static t: Timer\ndefinitions:\n";
    const std::string init = "default init s0:\n function b = false\n";
    CHECK_FALSE(parse_code(timed + " function t = 2s\n main rule r_Main = if expired(t) then r_reset_timer[t] endif\n" + init));
    CHECK_FALSE(parse_code(timed + " function t = 1500ms\n main rule r_Main = r_set_duration[t, 3s]\n" + init));
    CHECK(parse_code(timed + " function t = 2s\n main rule r_Main = if elapsed(t) then skip endif\n" + init) ==
          ErrorCode::TypeMismatch);
    CHECK(parse_code(timed + " function t = 2s\n main rule r_Main = r_reset_timer[]\n" + init) == ErrorCode::TypeMismatch);
    CHECK(parse_code(timed + " function t = 2s\n main rule r_Main = r_reset_timer[u]\n" + init) == ErrorCode::UnresolvedSymbol);
    CHECK(parse_code(timed + " main rule r_Main = skip\n" + init) == ErrorCode::UnresolvedSymbol);
    // Timers need the library.
    CHECK(parse_code("asm T\nsignature:\n static t: Timer\ndefinitions:\n function t = 2s\n") == ErrorCode::UnresolvedSymbol);
    // Config-bound timers parse and are bound later.
    auto m = parse({timed + " function t = apneaLag\n main rule r_Main = skip\n" + init});
    CHECK(m.timers.at(0).config_key == "apneaLag");
    CHECK_FALSE(m.timers.at(0).duration);
}

TEST_CASE("unsupported constructs")
{
    CHECK(parse_code(tiny("", " rule r_a = r_b[]\n rule r_b = r_a[]\n main rule r_Main = r_a[]\n")) ==
          ErrorCode::UnsupportedConstruct);
    CHECK(parse_code(tiny("", " rule r_a = if go then r_a[] endif\n main rule r_Main = r_a[]\n")) ==
          ErrorCode::UnsupportedConstruct);
    CHECK(parse_code(tiny("", " main rule r_Main = r_Main[]\n")) == ErrorCode::UnsupportedConstruct);
    CHECK(parse_code(tiny(" derived p: Boolean\n derived q: Boolean\n", " function p = q\n function q = not p\n" + kMain)) ==
          ErrorCode::UnsupportedConstruct);
}

TEST_CASE("print then parse is a fixpoint for bundled models")
{
    for (int l = 0; l < kLevels; ++l) {
        const auto original = parse_file(model_path(l));
        const auto printed = print(original);
        const auto again = parse({printed});
        CHECK(structurally_equal(original, again));
        CHECK(print(again) == printed);
    }
}

TEST_CASE("expressions print with minimal parentheses and reparse equal")
{
    auto m = load(2);
    for (const char* text : {"state = PCV_STATE and (phase = INSPIRATION or phase = EXPIRATION)",
                             "not (iValve = oValve) implies stopVentilation",
                             "stopVentilation implies apneaBackupMode implies startVentilation",
                             "(stopVentilation implies apneaBackupMode) implies startVentilation",
                             "not not apneaBackupMode", "(iValve = OPEN) = (oValve = CLOSED)",
                             "state != PCV_STATE or not stopRequested and startVentilation"}) {
        auto e = parse_expression(text, m);
        CHECK(structurally_equal(*e, *parse_expression(print_expr(*e), m)));
    }
    CHECK(print_expr(*parse_expression("(stopVentilation and apneaBackupMode) or startVentilation", m)) ==
          "stopVentilation and apneaBackupMode or startVentilation");
    CHECK(print_expr(*parse_expression("stopVentilation and (apneaBackupMode or startVentilation)", m)) ==
          "stopVentilation and (apneaBackupMode or startVentilation)");
    // implies associates to the right
    CHECK(print_expr(*parse_expression("(stopVentilation implies apneaBackupMode) implies startVentilation", m)) ==
          "(stopVentilation implies apneaBackupMode) implies startVentilation");
    CHECK_THROWS_AS(parse_expression("state", m), Error);
}

TEST_CASE("every identifier resolves to one declaration")
{
    for (int l = 0; l < kLevels; ++l) {
        auto m = load(l);
        std::set<std::string> names;
        for (const auto& f : m.functions) CHECK(names.insert(f.name).second);
        for (const auto& r : m.rules) CHECK(names.insert(r.name).second);
        for (const auto& d : m.domains) {
            CHECK(names.insert(d.name).second);
            for (const auto& lit : d.literals) CHECK(names.insert(lit).second);
        }
    }
}

TEST_CASE("declaration counts of the bundled models")
{
    const ModelStats expected[] = {
        {5, 1, 0, 0, 8, 29},
        {6, 5, 0, 5, 19, 104},
        {9, 6, 0, 9, 27, 174},
        {11, 6, 0, 10, 27, 186},
    };
    for (int l = 0; l < kLevels; ++l) {
        CAPTURE(l);
        const auto s = stats(load(l));
        CHECK(s == expected[l]);
        CHECK(s.rules_including_nested >= s.rule_declarations);
    }
}

TEST_CASE("time library counts")
{
    const auto s = stats(timelib::module());
    CHECK(s.monitored == 1);
    CHECK(s.controlled == 2);
    CHECK(s.derived == 2);
    CHECK(s.rule_declarations == 2);
    CHECK(s.rules_including_nested == 2);
}

TEST_CASE("empty machine has zero counts")
{
    CHECK(stats(parse({"asm Empty\nsignature:\ndefinitions:\n"})) == ModelStats{});
}

TEST_CASE("counts do not depend on rule order")
{
    const std::string text = read_file(model_path(1));
    const auto a = text.find("    rule r_startup =");
    const auto b = text.find("    rule r_selftest =");
    const auto c = text.find("    rule r_safeValves =");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    REQUIRE(c != std::string::npos);
    // move r_startup after r_selftest
    std::string moved = text;
    const std::string startup = text.substr(a, b - a);
    moved.erase(a, startup.size());
    const auto after = moved.find("    rule r_PCVStartInsp =");
    REQUIRE(after != std::string::npos);
    moved.insert(after, startup);
    REQUIRE(moved != text);
    auto m = parse({moved});
    bind_config(m, default_config());
    CHECK(stats(m) == stats(load(1)));
}

TEST_CASE("lint: bundled models are minimal")
{
    for (int l = 0; l < kLevels; ++l) {
        auto r = lint(load(l));
        CHECK_MESSAGE(r.unused_declarations.empty(), "level " << l);
        CHECK(r.shadowed_names.empty());
    }
}

TEST_CASE("lint: unused functions and macros are reported")
{
    auto m = parse({tiny(" controlled spare: D\n", " rule r_never = s := A\n" + kMain, " function s = A\n function spare = B\n")});
    auto r = lint(m);
    CHECK(r.unused_declarations == std::vector<std::string>{"spare", "r_never"});
    CHECK_FALSE(r.clean());

    // A monitored function read only by a derived function that is used counts as used.
    auto n = parse({tiny(" monitored extra: Boolean\n derived both: Boolean\n",
                         " function both = go and extra\n main rule r_Main = if both then s := B endif\n")});
    CHECK(lint(n).unused_declarations.empty());
}

TEST_CASE("lint: names shared between namespaces are shadowed")
{
    auto m = parse({"asm S\nsignature:\n enum domain D = {A | r_x}\n controlled s: D\ndefinitions:\n"
                    " rule r_x = s := A\n main rule r_Main = r_x[]\ndefault init s0:\n function s = r_x\n"});
    CHECK(lint(m).shadowed_names == std::vector<std::string>{"r_x"});
}

TEST_CASE("state graph of the base level")
{
    auto g = export_state_graph(load(0));
    CHECK(g.mode_location == "state");
    CHECK(g.nodes == std::vector<std::string>{"STARTUP", "SELFTEST", "VENTILATIONOFF", "PCV_STATE", "PSV_STATE"});
    CHECK(has_edge(g, "STARTUP", "SELFTEST"));
    CHECK(has_edge(g, "SELFTEST", "VENTILATIONOFF"));
    CHECK(has_edge(g, "VENTILATIONOFF", "PCV_STATE"));
    CHECK(has_edge(g, "VENTILATIONOFF", "PSV_STATE"));
    CHECK(has_edge(g, "PCV_STATE", "PSV_STATE"));
    CHECK(has_edge(g, "PSV_STATE", "PCV_STATE"));
    CHECK(has_edge(g, "PCV_STATE", "VENTILATIONOFF"));
    CHECK(has_edge(g, "PSV_STATE", "VENTILATIONOFF"));
    CHECK(g.edges.size() == 8);
    const auto dot = g.dot("MVM");
    CHECK(dot.rfind("digraph MVM {", 0) == 0);
    CHECK(dot.find("PCV_STATE -> PSV_STATE [label=\"r_runPCV\"];") != std::string::npos);
}

TEST_CASE("state graphs of every level share the control states")
{
    for (int l = 1; l < kLevels; ++l) {
        auto g = export_state_graph(load(l));
        CHECK(g.nodes.size() == 5);
        CHECK(has_edge(g, "PCV_STATE", "PSV_STATE"));
        CHECK(has_edge(g, "PSV_STATE", "PCV_STATE"));
    }
}

TEST_CASE("state graph of a single-state machine")
{
    auto m = parse({"asm One\nsignature:\n enum domain D = {ONLY}\n controlled s: D\ndefinitions:\n"
                    " main rule r_Main = if s = ONLY then skip endif\ndefault init s0:\n function s = ONLY\n"});
    auto g = export_state_graph(m);
    CHECK(g.nodes.size() == 1);
    CHECK(g.edges.empty());
}

TEST_CASE("machines without dispatch are not graphable")
{
    auto shape = [](const std::string& main) {
        return code_of([&] { export_state_graph(parse({tiny(" controlled t: D\n", main, " function s = A\n function t = A\n")})); });
    };
    CHECK(shape(" main rule r_Main = s := B\n") == ErrorCode::NotControlStateShaped);
    CHECK(shape(" main rule r_Main = if go then s := B endif\n") == ErrorCode::NotControlStateShaped);
    CHECK(shape(" main rule r_Main = par if s = A then s := B endif if t = A then t := B endif endpar\n") ==
          ErrorCode::NotControlStateShaped);
    CHECK_FALSE(shape(" main rule r_Main = if s = A then s := B else if s = B then s := A endif endif\n"));
}
