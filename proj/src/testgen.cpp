#include "asmwb/testgen.hpp"

#include "asmwb/codegen.hpp"
#include "asmwb/interpreter.hpp"

#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace asmwb {

namespace {

std::uint64_t test_seed(std::uint64_t seed, int index)
{
    // splitmix64 of the pair keeps per-test streams independent
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void check_shape(const Trace& t, const MachineDefinition& m, std::size_t index)
{
    const auto where = "trace " + std::to_string(index);
    if (t.states.empty() || t.inputs.size() + 1 != t.states.size())
        throw Error(ErrorCode::TraceMachineMismatch, where + " has mismatched states and inputs");
    for (const auto& s : t.states)
        if (s.controlled.size() != m.locations.size())
            throw Error(ErrorCode::TraceMachineMismatch, where + " does not have the locations of " + m.name);
    for (const auto& in : t.inputs)
        if (in.monitored.size() != m.monitored.size())
            throw Error(ErrorCode::TraceMachineMismatch, where + " does not have the inputs of " + m.name);
}

std::string cpp_value(const MachineDefinition& m, const Value& v)
{
    switch (v.kind()) {
    case ValueKind::Boolean: return v.as_bool() ? "true" : "false";
    case ValueKind::Enum: return m.value_to_string(v);
    case ValueKind::Instant: return std::to_string(v.as_instant().ms);
    case ValueKind::Duration: return std::to_string(v.as_duration().ms);
    case ValueKind::Integer: return std::to_string(v.as_integer());
    }
    return {};
}

std::string seconds_literal(Instant t)
{
    std::ostringstream s;
    s << t.ms / 1000 << "." << std::setw(3) << std::setfill('0') << t.ms % 1000;
    return s.str();
}

const char* kHarness = R"(#ifdef ASMWB_WITH_CATCH2
#include <catch2/catch_test_macros.hpp>
#else
// Minimal stand-in for the Catch2 macros used below.
#include <cstdio>
#include <vector>
namespace harness {
struct Case { const char* name; void (*fn)(); };
inline std::vector<Case>& cases() { static std::vector<Case> c; return c; }
inline int& failures() { static int n = 0; return n; }
struct Register { Register(const char* n, void (*f)()) { cases().push_back({n, f}); } };
struct Abort {};
}
#define HARNESS_CAT2(a, b) a##b
#define HARNESS_CAT(a, b) HARNESS_CAT2(a, b)
#define TEST_CASE(name, ...) \
    static void HARNESS_CAT(test_fn_, __LINE__)(); \
    static harness::Register HARNESS_CAT(test_reg_, __LINE__)(name, &HARNESS_CAT(test_fn_, __LINE__)); \
    static void HARNESS_CAT(test_fn_, __LINE__)()
#define REQUIRE(expr) \
    do { if (!(expr)) { std::printf("%s:%d: REQUIRE(%s) failed\n", __FILE__, __LINE__, #expr); throw harness::Abort{}; } } while (0)
int main()
{
    int failed = 0;
    for (const auto& c : harness::cases()) {
        try { c.fn(); } catch (const harness::Abort&) { ++failed; std::printf("FAILED: %s\n", c.name); }
    }
    std::printf("%zu test cases, %d failed\n", harness::cases().size(), failed);
    return failed == 0 ? 0 : 1;
}
#endif
)";

} // namespace

std::vector<Trace> generate_traces(const MachineDefinition& machine, const TestSuiteSpec& spec)
{
    if (spec.tests < 0 || spec.steps < 0) throw Error(ErrorCode::InvalidConfig, "test and step counts must be non-negative");
    std::vector<Trace> out;
    out.reserve(static_cast<size_t>(spec.tests));
    for (int i = 0; i < spec.tests; ++i) {
        RandomInputs inputs(machine, test_seed(spec.seed, i), spec.clock_step);
        out.push_back(run(machine, inputs, static_cast<size_t>(spec.steps)));
    }
    return out;
}

std::string emit_tests(const std::vector<Trace>& traces, const MachineDefinition& m)
{
    for (size_t i = 0; i < traces.size(); ++i) check_shape(traces[i], m, i);

    const std::string inst = instance_name(m);
    const std::string main_rule = m.rules[static_cast<size_t>(m.main_rule)].name;
    std::ostringstream out;
    out << "// Random conformance tests for " << m.name << ". Generated; do not edit.\n";
    out << kHarness << "\n#include \"" << m.name << ".h\"\n";

    auto expect_state = [&](const MachineState& s, const std::string& indent) {
        for (int l = 0; l < m.user_location_count(); ++l)
            out << indent << "REQUIRE(" << inst << "." << m.locations[static_cast<size_t>(l)].name
                << "[0] == " << cpp_value(m, s.at(l)) << ");\n";
        for (size_t t = 0; t < m.timers.size(); ++t) {
            const auto& name = m.timers[t].name;
            out << indent << "REQUIRE(" << inst << ".timerStart[" << name << "][0] == "
                << cpp_value(m, s.at(m.start_location(static_cast<int>(t)))) << ");\n";
            out << indent << "REQUIRE(" << inst << ".timerDuration[" << name << "][0] == "
                << cpp_value(m, s.at(m.duration_location(static_cast<int>(t)))) << ");\n";
        }
    };

    for (size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        out << "\nTEST_CASE(\"random trace " << i << "\", \"[random]\")\n{\n";
        out << "    " << m.name << " " << inst << ";\n";
        out << "    " << inst << ".initControlledWithMonitored();\n";
        expect_state(t.states[0], "    ");
        for (size_t k = 0; k < t.inputs.size(); ++k) {
            out << "    // step " << k + 1 << "\n";
            const auto& in = t.inputs[k];
            for (size_t slot = 0; slot < in.monitored.size(); ++slot) {
                if (!in.monitored[slot]) continue;
                out << "    " << inst << "." << m.functions[static_cast<size_t>(m.monitored[slot])].name << " = "
                    << cpp_value(m, *in.monitored[slot]) << ";\n";
            }
            if (m.has_time_library())
                out << "    " << inst << "." << m.functions[static_cast<size_t>(m.clock_function)].name << " = "
                    << seconds_literal(in.clock) << ";\n";
            out << "    " << inst << "." << main_rule << "();\n";
            out << "    " << inst << ".fireUpdateSet();\n";
            expect_state(t.states[k + 1], "    ");
        }
        out << "}\n";
    }
    return out.str();
}

namespace {

class CoverageObserver final : public EvalObserver {
public:
    std::set<int> rules;
    std::set<std::pair<int, bool>> branches;
    void rule_fired(int rule) override { rules.insert(rule); }
    void branch_taken(int node, bool then_arm) override { branches.insert({node, then_arm}); }
};

} // namespace

CoverageReport measure_coverage(const std::vector<Trace>& traces, const MachineDefinition& m)
{
    CoverageObserver obs;
    for (size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        check_shape(t, m, i);
        MachineState s = initial_state(m);
        if (s.controlled != t.states[0].controlled)
            throw Error(ErrorCode::TraceMachineMismatch, "trace " + std::to_string(i) + " does not start in the initial state");
        for (size_t k = 0; k < t.inputs.size(); ++k) {
            s = step(m, s, t.inputs[k], &obs);
            if (s.controlled != t.states[k + 1].controlled)
                throw Error(ErrorCode::TraceMachineMismatch,
                            "trace " + std::to_string(i) + " diverges at step " + std::to_string(k + 1));
        }
    }

    CoverageReport r;
    std::set<int> ifs;
    std::function<void(const Rule&)> walk = [&](const Rule& rule) {
        if (rule.kind == RuleKind::If) ifs.insert(rule.id);
        for (const auto& c : rule.children) walk(*c);
        if (rule.then_rule) walk(*rule.then_rule);
        if (rule.else_rule) walk(*rule.else_rule);
    };
    std::size_t declared = 0, fired = 0;
    for (size_t i = 0; i < m.rules.size(); ++i) {
        const auto& d = m.rules[i];
        if (d.module != m.name) continue;
        ++declared;
        if (obs.rules.count(static_cast<int>(i)))
            ++fired;
        else
            r.rules_missed.push_back(d.name);
        if (d.body) walk(*d.body);
    }
    r.branches_total = 2 * ifs.size();
    for (const auto& [node, arm] : obs.branches)
        if (ifs.count(node)) ++r.branches_taken;
    r.rule_coverage = declared ? static_cast<double>(fired) / static_cast<double>(declared) : 1.0;
    r.branch_coverage = r.branches_total ? static_cast<double>(r.branches_taken) / static_cast<double>(r.branches_total) : 1.0;
    return r;
}

} // namespace asmwb
