// Acceptance report: one PASS/FAIL line per criterion, with the measured
// evidence. Exit status is the number of failing criteria.

#include "asmwb/dsl.hpp"
#include "asmwb/interpreter.hpp"
#include "asmwb/lung.hpp"
#include "asmwb/models.hpp"
#include "asmwb/refine.hpp"
#include "asmwb/scenario.hpp"
#include "asmwb/service.hpp"
#include "asmwb/testgen.hpp"
#include "asmwb/verify.hpp"

#include "closed_loop.hpp"
#include "random_machine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace asmwb;

namespace {

struct Outcome {
    bool pass = false;
    std::string evidence;
};

using Clock = std::chrono::steady_clock;

long long ms_since(Clock::time_point t0)
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
}

InvariantProperty prop(const MachineDefinition& m, const char* text) { return parse_property(text, m); }

std::string at(const MachineDefinition& m, const MachineState& s, const char* loc)
{
    return m.value_to_string(s.at(*m.find_location(loc)));
}

// Level 01 safety properties under freeBoolean.
Outcome valve_safety()
{
    auto m = load(1);
    std::ostringstream ev;
    bool ok = true;
    for (const char* text : {"not f(iValve=oValve)", "g(state=VENTILATIONOFF implies (iValve=CLOSED and oValve=OPEN))"}) {
        const auto t0 = Clock::now();
        auto r = check_invariant(m, prop(m, text));
        const auto ms = ms_since(t0);
        ok = ok && r.verified && ms < 5000;
        ev << "[" << text << ": " << (r.verified ? "verified" : "violated") << ", " << r.states << " states, " << ms << " ms] ";
    }
    return {ok, "level 01 " + ev.str()};
}

// Pause levels: exclusivity breaks in a pause; the pause properties hold.
Outcome pause_properties()
{
    std::ostringstream ev;
    bool ok = true;
    auto m2 = load(2);
    auto r = check_invariant(m2, prop(m2, "not f(iValve=oValve)"));
    if (r.verified || !r.counterexample) {
        ok = false;
        ev << "level 02 exclusivity unexpectedly verified; ";
    } else {
        const auto& cex = *r.counterexample;
        const auto last = at(m2, cex.trace.states.back(), "phase");
        // Replay the concrete trace through the interpreter.
        bool replays = !cex.abstract_only;
        for (size_t i = 0; replays && i + 1 < cex.trace.states.size(); ++i)
            replays = step(m2, cex.trace.states[i], cex.trace.inputs[i]) == cex.trace.states[i + 1];
        const bool in_pause = last == "INPAUSE" || last == "EXPAUSE";
        ok = ok && replays && in_pause;
        ev << "level 02 exclusivity counterexample of " << cex.trace.states.size() - 1 << " steps ending in " << last
           << (replays ? ", replays" : ", does NOT replay") << "; ";
    }
    for (int level = 2; level <= 3; ++level) {
        auto m = load(level);
        for (const auto* file : {"pauses_verbatim.prop", "pauses.prop"}) {
            int verified = 0, total = 0;
            for (const auto& p : load_properties((assets_dir() / "properties" / file).string(), m)) {
                ++total;
                verified += check_invariant(m, p).verified;
            }
            ok = ok && total > 0 && verified == total;
            ev << "level 0" << level << " " << file << " " << verified << "/" << total << "; ";
        }
    }
    return {ok, ev.str()};
}

Outcome refinement_chain()
{
    std::ostringstream ev;
    bool ok = true;
    for (const auto& [pair, glue] : default_glues()) {
        auto res = check_refinement(load(pair.first), load(pair.second), glue);
        ok = ok && res.verified() && res.elapsed.count() < 60000;
        ev << "0" << pair.first << "->0" << pair.second << " " << (res.verified() ? "verified" : "refuted") << " ("
           << res.elapsed.count() << " ms) ";
    }
    return {ok, ev.str()};
}

Outcome bundled_scenario()
{
    const auto sc = load_scenario((assets_dir() / "scenarios" / "pcv_start.avalla").string());
    std::ostringstream ev;
    bool ok = true;
    for (int level = 1; level <= 3; ++level) {
        auto r = run_scenario(load(level, test_config()), sc);
        ok = ok && r.passed();
        ev << "level 0" << level << " " << r.checks_passed << " checks passed";
        if (r.failure) ev << " (failed: " << r.failure->proposition << ", actual " << r.failure->actual << ")";
        ev << "; ";
    }
    return {ok, ev.str()};
}

// Rule coverage of the pinned suite, plus the compiled conformance suites
// built from the same seed.
Outcome codegen_conformance()
{
    std::ostringstream ev;
    TestSuiteSpec spec;
    spec.tests = 50;
    spec.steps = 50;
    spec.seed = ASMWB_TESTGEN_SEED;
    auto m3 = load(3, test_config());
    const auto cov = measure_coverage(generate_traces(m3, spec), m3);
    bool ok = cov.rule_coverage == 1.0;
    ev << "level 03 seed " << spec.seed << " rule coverage " << cov.rule_coverage * 100 << "%, branch coverage "
       << cov.branch_coverage * 100 << "%; compiled suites:";
    for (int level = 0; level < kLevels; ++level) {
        const std::string bin = "conformance_level0" + std::to_string(level);
        const std::string cmd = "\"" ASMWB_CONFORMANCE_DIR "/" + bin + "\" > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        ok = ok && rc == 0;
        ev << " " << bin << (rc == 0 ? " ok" : " FAILED");
    }
    return {ok, ev.str()};
}

// The update-set invariants over random machines against a naive evaluator.
Outcome update_set_semantics()
{
    using namespace randmachine;
    constexpr std::uint64_t kMachines = 1000;
    std::size_t checks = 0, failures = 0, clashes = 0;
    for (std::uint64_t seed = 0; seed < kMachines; ++seed) {
        Gen g(seed);
        const RMachine ref = g.machine();
        const auto m = parse({source(ref), "random"});
        auto permuted = ref;
        std::mt19937_64 rng(seed ^ 0xacce);
        std::function<void(RRule&)> shuffle = [&](RRule& r) {
            if (r.kind == RRule::Par) std::shuffle(r.children.begin(), r.children.end(), rng);
            for (auto& c : r.children) shuffle(c);
        };
        shuffle(permuted.main);
        for (auto& mac : permuted.macros) shuffle(mac);
        const auto pm = parse({source(permuted), "permuted"});

        std::vector<std::string> names;
        for (int l = 0; l < m.user_location_count(); ++l) names.push_back(m.locations[static_cast<size_t>(l)].name);
        auto value_of = [&](const std::string& n, int v) {
            return n == "c" ? Value::literal(*m.find_domain("Color"), v) : Value::boolean(v != 0);
        };
        std::uniform_int_distribution<int> bit(0, 1), col(0, 2);
        for (int k = 0; k < 4; ++k) {
            RefState rs;
            for (const auto& n : names) rs.v[n] = n == "c" ? col(rng) : bit(rng);
            rs.v["m0"] = bit(rng);
            rs.v["m1"] = bit(rng);
            MachineState st = initial_state(m);
            for (const auto& n : names) st.controlled[static_cast<size_t>(*m.find_location(n))] = value_of(n, rs.v[n]);
            Environment env;
            env.clock = Instant{1000};
            env.monitored.resize(m.monitored.size());
            for (const char* n : {"m0", "m1"})
                env.monitored[static_cast<size_t>(*m.find_monitored_slot(n))] = Value::boolean(rs.v[n] != 0);

            std::vector<std::pair<std::string, int>> expected;
            ref_updates(ref, ref.main, rs, expected);
            std::set<std::pair<int, Value>> want, have;
            for (const auto& [n, v] : expected) want.insert({*m.find_location(n), value_of(n, v)});
            const auto got = eval_rule(m, st, env, *m.rules[static_cast<size_t>(m.main_rule)].body);
            for (const auto& u : got.updates()) have.insert({u.location, u.value});
            const auto perm = eval_rule(pm, st, env, *pm.rules[static_cast<size_t>(pm.main_rule)].body);

            std::optional<int> clash_loc;
            for (auto it = want.begin(); it != want.end(); ++it) {
                auto nx = std::next(it);
                if (nx != want.end() && nx->first == it->first) {
                    clash_loc = it->first;
                    break;
                }
            }
            bool ok = want == have && got == perm && got.clash().has_value() == clash_loc.has_value();
            if (clash_loc) {
                ++clashes;
                ok = ok && got.clash() && got.clash()->location == *clash_loc;
            } else if (ok) {
                // frame: unchanged locations keep their value
                const auto next = step(m, st, env);
                for (const auto& n : names) {
                    const int loc = *m.find_location(n);
                    if (!got.value_for(loc)) ok = ok && next.at(loc) == st.at(loc);
                }
            }
            ++checks;
            failures += !ok;
        }
    }
    std::ostringstream ev;
    ev << kMachines << " machines, " << checks << " states (" << clashes << " clashing), " << failures
       << " disagreements with the reference evaluator";
    return {failures == 0 && clashes > 0, ev.str()};
}

Outcome lung_closed_form()
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> rdist(2.0, 50.0), cdist(0.01, 0.1);
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
        LungPatient p;
        p.resistance = rdist(rng);
        p.compliance = cdist(rng);
        p.alveolar_pressure = 5.0;
        VentCircuit c;
        c.inspiratory_open = true;
        c.expiratory_open = false;
        const double tau = p.tau();
        const double dt = tau / 10;
        for (int k = 1; k <= 50; ++k) {
            p = step_lung(p, c, dt).first;
            if (k == 10 || k == 20 || k == 50) {
                const double t = k * dt;
                const double exact = c.pinsp + (5.0 - c.pinsp) * std::exp(-t / tau);
                worst = std::max(worst, std::abs(p.alveolar_pressure - exact) / exact);
            }
        }
    }
    // plateau: both valves closed leaves Palv untouched
    LungPatient p;
    p.alveolar_pressure = 17.25;
    VentCircuit closed;
    closed.expiratory_open = false;
    bool plateau = true;
    for (int k = 0; k < 1000; ++k) {
        auto [next, sample] = step_lung(p, closed, 0.01);
        plateau = plateau && next.alveolar_pressure == 17.25 && sample.flow == 0.0;
        p = next;
    }
    std::ostringstream ev;
    ev << "10 random (R,C) pairs, worst relative error " << worst * 100 << "% at tau/2tau/5tau; plateau "
       << (plateau ? "exact" : "drifts");
    return {worst < 0.01 && plateau, ev.str()};
}

Outcome closed_loop_replay()
{
    Session s("acceptance", closed_loop::manual_settings(3));
    const auto run = closed_loop::scripted_pcv(s);
    const auto report = replay_log(s.log(), closed_loop::manual_settings(3));
    bool apnea = false;
    for (std::size_t i = 0; i < s.sample_count(); ++i) apnea = apnea || s.wait_sample(i, std::chrono::milliseconds(0))->apnea;
    std::ostringstream ev;
    ev << (run.ok ? "script completed" : "script stalled at " + run.failed_stage) << " (" << run.cycles
       << " breaths, pause at step " << run.pause_step << ", off at step " << run.stop_step << "); replay of "
       << report.steps << " steps " << (report.identical() ? "identical" : "DIFFERS: " + report.detail) << "; apnea "
       << (apnea || report.apnea_raised ? "raised" : "never raised");
    return {run.ok && report.identical() && !apnea && !report.apnea_raised, ev.str()};
}

Outcome declaration_counts()
{
    const auto s0 = stats(load(0));
    const auto s3 = stats(load(3));
    std::ostringstream ev;
    ev << "level 00 monitored/controlled/derived " << s0.monitored << "/" << s0.controlled << "/" << s0.derived
       << "; level 03 " << s3.monitored << "/" << s3.controlled << "/" << s3.derived << ", " << s3.rule_declarations
       << " rule declarations (" << s3.rules_including_nested << " rule nodes, not compared)";
    const bool ok = s0.monitored == 5 && s0.controlled == 1 && s0.derived == 0 && s3.monitored == 11 &&
                    s3.controlled == 6 && s3.derived == 0 && s3.rule_declarations == 27;
    return {ok, ev.str()};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"P1 valve safety properties", valve_safety},
        {"P2 pause properties", pause_properties},
        {"P3 refinement chain", refinement_chain},
        {"P4 PCV start scenario", bundled_scenario},
        {"P5 generated code conformance", codegen_conformance},
        {"P6 update-set semantics", update_set_semantics},
        {"P7 lung closed form", lung_closed_form},
        {"P8 closed-loop replay", closed_loop_replay},
        {"P9 declaration counts", declaration_counts},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << ms_since(t0) << " ms): " << o.evidence << std::endl;
    }
    return failed;
}
