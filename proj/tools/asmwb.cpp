// asmwb: command-line front end for the workbench.
//
// Exit codes: 0 success, 1 a check/scenario/refinement failed or the model
// is rejected, 2 usage error.

#include "asmwb/codegen.hpp"
#include "asmwb/dsl.hpp"
#include "asmwb/http.hpp"
#include "asmwb/interpreter.hpp"
#include "asmwb/lung.hpp"
#include "asmwb/models.hpp"
#include "asmwb/refine.hpp"
#include "asmwb/scenario.hpp"
#include "asmwb/service.hpp"
#include "asmwb/testgen.hpp"
#include "asmwb/verify.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace asmwb;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Where a subcommand's machine comes from.
struct ModelArgs {
    int level = -1;
    std::string file;
    std::string config = "default";

    void add_to(CLI::App* app)
    {
        auto* m = app->add_option("-m,--model", level, "Bundled model level (0-3)")->check(CLI::Range(0, kLevels - 1));
        auto* f = app->add_option("-f,--file", file, "Model source file (.asm)")->check(CLI::ExistingFile);
        m->excludes(f);
        f->excludes(m);
        app->add_option("-c,--config", config, "Timing configuration: default, test, or a key=value file")
            ->capture_default_str();
    }

    [[nodiscard]] ControllerConfig controller_config() const
    {
        if (config == "default") return default_config();
        if (config == "test") return test_config();
        if (!fs::exists(config)) throw UsageError("--config: '" + config + "' is neither default, test nor a file");
        return load_config(config);
    }

    [[nodiscard]] MachineDefinition load_machine() const
    {
        if (level >= 0) return load(level, controller_config());
        if (file.empty()) throw UsageError("give --model <level> or --file <path>");
        auto m = parse_file(file);
        bind_config(m, controller_config());
        return m;
    }
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

std::string cell(const MachineDefinition& m, const MachineState& s, const std::string& loc)
{
    auto l = m.find_location(loc);
    return l ? m.value_to_string(s.at(*l)) : "-";
}

// Fixed-width table of selected locations, one row per state.
std::string trace_table(const MachineDefinition& m, const Trace& t, const std::vector<std::string>& columns)
{
    std::vector<std::size_t> width{4};
    for (const auto& c : columns) width.push_back(c.size());
    for (const auto& s : t.states)
        for (std::size_t i = 0; i < columns.size(); ++i) width[i + 1] = std::max(width[i + 1], cell(m, s, columns[i]).size());
    // the last column is not padded
    auto row = [&](std::ostringstream& out, std::size_t i, const std::string& text) {
        out << (i ? "  " : "") << (i < columns.size() ? std::setw(static_cast<int>(width[i])) : std::setw(0)) << text;
    };
    std::ostringstream out;
    out << std::left;
    row(out, 0, "step");
    for (std::size_t i = 0; i < columns.size(); ++i) row(out, i + 1, columns[i]);
    out << "\n";
    for (std::size_t k = 0; k < t.states.size(); ++k) {
        row(out, 0, std::to_string(k));
        for (std::size_t i = 0; i < columns.size(); ++i) row(out, i + 1, cell(m, t.states[k], columns[i]));
        out << "\n";
    }
    return out.str();
}

std::vector<std::string> user_locations(const MachineDefinition& m)
{
    std::vector<std::string> out;
    for (int i = 0; i < m.user_location_count(); ++i) out.push_back(m.locations[static_cast<size_t>(i)].name);
    return out;
}

AbstractionConfig abstraction_from(const std::string& mode, Millis tick, Millis horizon)
{
    if (mode == "free") return AbstractionConfig::free_boolean();
    if (mode == "bounded") return AbstractionConfig::bounded_clock(Duration{tick}, Duration{horizon});
    throw UsageError("--abstraction must be free or bounded");
}

HttpService* g_service = nullptr;

extern "C" void on_signal(int)
{
    if (g_service) g_service->stop();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"asmwb: model, verify, test and generate code for the ventilator controller"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    int rc = kOk;

    // parse
    auto* parse_cmd = app.add_subcommand("parse", "Parse and resolve a model; --print pretty-prints it");
    ModelArgs parse_model;
    parse_model.add_to(parse_cmd);
    bool print_model = false;
    parse_cmd->add_flag("--print", print_model, "Print the normalized model text");
    parse_cmd->callback([&] {
        const auto m = parse_model.load_machine();
        if (print_model)
            std::cout << print(m);
        else
            std::cout << m.name << ": ok (" << m.functions.size() << " functions, " << m.rules.size() << " rules, "
                      << m.locations.size() << " locations)\n";
    });

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Declaration counts");
    ModelArgs stats_model;
    stats_model.add_to(stats_cmd);
    bool stats_json = false;
    stats_cmd->add_flag("--json", stats_json, "JSON output");
    stats_cmd->callback([&] {
        const auto m = stats_model.load_machine();
        const auto s = stats(m);
        if (stats_json) {
            std::cout << nlohmann::ordered_json{{"machine", m.name},
                                                {"monitored", s.monitored},
                                                {"controlled", s.controlled},
                                                {"derived", s.derived},
                                                {"static", s.statics},
                                                {"ruleDeclarations", s.rule_declarations},
                                                {"rulesIncludingNested", s.rules_including_nested}}
                             .dump(2)
                      << "\n";
            return;
        }
        std::cout << m.name << "\n"
                  << "  monitored            " << s.monitored << "\n"
                  << "  controlled           " << s.controlled << "\n"
                  << "  derived              " << s.derived << "\n"
                  << "  static               " << s.statics << "\n"
                  << "  rule declarations    " << s.rule_declarations << "\n"
                  << "  rules incl. nested   " << s.rules_including_nested << "\n";
    });

    // lint
    auto* lint_cmd = app.add_subcommand("lint", "Unused declarations and names shared across namespaces");
    ModelArgs lint_model;
    lint_model.add_to(lint_cmd);
    bool strict = false;
    lint_cmd->add_flag("--strict", strict, "Exit 1 when anything is reported");
    lint_cmd->callback([&] {
        const auto r = lint(lint_model.load_machine());
        for (const auto& n : r.unused_declarations) std::cout << "unused: " << n << "\n";
        for (const auto& n : r.shadowed_names) std::cout << "shadowed: " << n << "\n";
        if (r.clean()) std::cout << "clean\n";
        if (strict && !r.clean()) rc = kFailed;
    });

    // viz
    auto* viz_cmd = app.add_subcommand("viz", "Control-state diagram as Graphviz DOT");
    ModelArgs viz_model;
    viz_model.add_to(viz_cmd);
    std::string viz_out;
    viz_cmd->add_option("-o,--output", viz_out, "Output file (default stdout)");
    viz_cmd->callback([&] {
        const auto m = viz_model.load_machine();
        emit(viz_out, export_state_graph(m).dot(m.name));
    });

    // sim
    auto* sim_cmd = app.add_subcommand("sim", "Simulate: random inputs, or interactive lines `name=value ...` (one step per line)");
    ModelArgs sim_model;
    sim_model.add_to(sim_cmd);
    bool sim_random = false;
    std::size_t sim_steps = 20;
    std::uint64_t sim_seed = 1;
    Millis sim_clock = 1000;
    sim_cmd->add_flag("--random", sim_random, "Uniformly random monitored values");
    sim_cmd->add_option("--steps", sim_steps, "Steps for --random")->capture_default_str();
    sim_cmd->add_option("--seed", sim_seed, "Seed for --random")->capture_default_str();
    sim_cmd->add_option("--clock-step", sim_clock, "Clock advance per step, ms")->capture_default_str()->check(CLI::PositiveNumber);
    sim_cmd->callback([&] {
        const auto m = sim_model.load_machine();
        const auto columns = user_locations(m);
        if (sim_random) {
            RandomInputs inputs(m, sim_seed, Duration{sim_clock});
            std::cout << trace_table(m, run(m, inputs, sim_steps), columns);
            return;
        }
        // Interactive: values persist between lines; `quit` or EOF ends.
        MachineState state = initial_state(m);
        Environment env = default_environment(m, Instant{0});
        std::size_t k = 0;
        std::cout << "step 0:";
        for (const auto& c : columns) std::cout << " " << c << "=" << cell(m, state, c);
        std::cout << "\n";
        for (std::string line; std::getline(std::cin, line);) {
            if (line == "quit" || line == "exit") break;
            std::istringstream words(line);
            std::map<std::string, std::string> assigned;
            for (std::string w; words >> w;) {
                const auto eq = w.find('=');
                if (eq == std::string::npos) {
                    std::cout << "expected name=value, got '" << w << "'\n";
                    continue;
                }
                assigned[w.substr(0, eq)] = w.substr(eq + 1);
            }
            try {
                Environment next = env;
                const auto delta = make_environment(m, assigned, Instant{0});
                for (size_t i = 0; i < next.monitored.size(); ++i)
                    if (delta.monitored[i]) next.monitored[i] = delta.monitored[i];
                next.clock = Instant{static_cast<Millis>(k + 1) * sim_clock};
                state = step(m, state, next);
                env = std::move(next);
                ++k;
            } catch (const Error& e) {
                std::cout << "error: " << e.what() << "\n";  // the step is not taken
                continue;
            }
            std::cout << "step " << k << ":";
            for (const auto& c : columns) std::cout << " " << c << "=" << cell(m, state, c);
            std::cout << "\n";
        }
    });

    // animate
    auto* anim_cmd = app.add_subcommand("animate", "Tabular trace: step, state, phase, iValve, oValve, stopVentilation");
    ModelArgs anim_model;
    anim_model.add_to(anim_cmd);
    std::string anim_scenario;
    std::size_t anim_steps = 20;
    std::uint64_t anim_seed = 1;
    anim_cmd->add_option("-s,--scenario", anim_scenario, "Drive the trace with a scenario file")->check(CLI::ExistingFile);
    anim_cmd->add_option("--steps", anim_steps, "Random steps when no scenario is given")->capture_default_str();
    anim_cmd->add_option("--seed", anim_seed, "Seed for random inputs")->capture_default_str();
    anim_cmd->callback([&] {
        const auto m = anim_model.load_machine();
        Trace t;
        if (!anim_scenario.empty()) {
            const auto result = run_scenario(m, parse_scenario(read_file(anim_scenario), m));
            t = result.trace;
            if (!result.passed()) rc = kFailed;
        } else {
            RandomInputs inputs(m, anim_seed, Duration{1000});
            t = run(m, inputs, anim_steps);
        }
        std::cout << trace_table(m, t, {"state", "phase", "iValve", "oValve", "stopVentilation"});
    });

    // check
    auto* check_cmd = app.add_subcommand("check", "Check invariant properties");
    ModelArgs check_model;
    check_model.add_to(check_cmd);
    std::string props_file;
    std::string abstraction = "free";
    Millis tick = 1000, horizon = 20000;
    std::string cex_dir;
    check_cmd->add_option("-p,--props", props_file, "Properties file")->required()->check(CLI::ExistingFile);
    check_cmd->add_option("--abstraction", abstraction, "free (expiry as free inputs) or bounded (explicit clock)")
        ->capture_default_str()
        ->check(CLI::IsMember({"free", "bounded"}));
    check_cmd->add_option("--tick", tick, "bounded: clock step, ms")->capture_default_str();
    check_cmd->add_option("--horizon", horizon, "bounded: horizon, ms")->capture_default_str();
    check_cmd->add_option("--cex-dir", cex_dir, "Write each counterexample as a scenario file here");
    check_cmd->callback([&] {
        const auto m = check_model.load_machine();
        const auto ts = build_ts(m, abstraction_from(abstraction, tick, horizon));
        std::cout << m.name << ": " << ts.states.size() << " states, " << ts.edges.size() << " edges\n";
        int index = 0;
        for (const auto& prop : load_properties(props_file, m)) {
            ++index;
            const auto r = check_invariant(ts, prop);
            if (r.verified) {
                std::cout << "verified  " << prop.text << "\n";
                continue;
            }
            rc = kFailed;
            std::cout << "VIOLATED  " << prop.text << "\n";
            if (!r.counterexample) continue;
            const auto& cex = *r.counterexample;
            std::cout << "  counterexample (" << cex.violated_at << " steps"
                      << (cex.abstract_only ? ", abstract only: no clock realizes it" : "") << "):\n";
            std::istringstream table(trace_table(m, cex.trace, user_locations(m)));
            for (std::string line; std::getline(table, line);) std::cout << "    " << line << "\n";
            if (!cex_dir.empty()) {
                const auto path = fs::path(cex_dir) / (m.name + "_property" + std::to_string(index) + ".avalla");
                write_file(path, export_scenario(m, cex));
                std::cout << "  scenario: " << path.string() << "\n";
            }
        }
    });

    // refine
    auto* refine_cmd = app.add_subcommand("refine", "Check that one level refines another");
    int from = -1, to = -1;
    std::string glue_arg = "default";
    std::string refine_config = "default";
    refine_cmd->add_option("--from", from, "Abstract level")->required()->check(CLI::Range(0, kLevels - 1));
    refine_cmd->add_option("--to", to, "Refined level")->required()->check(CLI::Range(0, kLevels - 1));
    refine_cmd->add_option("--glue", glue_arg, "default, or a glue file")->capture_default_str();
    refine_cmd->add_option("-c,--config", refine_config, "Timing configuration")->capture_default_str();
    refine_cmd->callback([&] {
        ModelArgs cfg;
        cfg.config = refine_config;
        const auto a = load(from, cfg.controller_config());
        const auto r = load(to, cfg.controller_config());
        const GlueMap glue = glue_arg == "default" ? default_glue(from, to) : load_glue(glue_arg);
        const auto res = check_refinement(a, r, glue);
        std::cout << a.name << " -> " << r.name << " on {";
        for (std::size_t i = 0; i < glue.linked.size(); ++i) std::cout << (i ? ", " : "") << glue.linked[i];
        std::cout << "}: " << (res.verified() ? "verified" : "REFUTED") << " (" << res.abstract_states << " x "
                  << res.refined_states << " states, relation " << res.relation_size << ", " << res.elapsed.count()
                  << " ms)\n";
        if (!res.verified()) {
            rc = kFailed;
            if (res.witness) {
                std::cout << "  refined run the abstract machine cannot follow"
                          << (res.witness_abstract_only ? " (abstract only)" : "") << ":\n";
                std::istringstream table(trace_table(r, *res.witness, user_locations(r)));
                for (std::string line; std::getline(table, line);) std::cout << "    " << line << "\n";
            }
        }
    });

    // scenario
    auto* scen_cmd = app.add_subcommand("scenario", "Run a validation scenario");
    ModelArgs scen_model;
    scen_model.add_to(scen_cmd);
    std::string scen_file;
    scen_cmd->add_option("scenario", scen_file, "Scenario file (.avalla)")->required()->check(CLI::ExistingFile);
    scen_cmd->callback([&] {
        const auto m = scen_model.load_machine();
        const auto result = run_scenario(m, parse_scenario(read_file(scen_file), m));
        if (result.passed()) {
            std::cout << "passed: " << result.checks_passed << " checks, " << result.trace.states.size() - 1 << " steps\n";
            return;
        }
        const auto& f = *result.failure;
        std::cout << "FAILED at command " << f.index << " after step " << f.step << ": check " << f.proposition
                  << " (expected " << f.expected << ", got " << f.actual << ")\n";
        rc = kFailed;
    });

    // testgen
    auto* tg_cmd = app.add_subcommand("testgen", "Random-trace unit tests for the generated C++");
    ModelArgs tg_model;
    tg_model.add_to(tg_cmd);
    TestSuiteSpec spec;
    std::string tg_out;
    bool tg_coverage = false;
    tg_cmd->add_option("--tests", spec.tests, "Number of traces")->capture_default_str()->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--steps", spec.steps, "Steps per trace")->capture_default_str()->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--seed", spec.seed, "Suite seed")->capture_default_str();
    tg_cmd->add_option("--clock-step", spec.clock_step.ms, "Clock advance per step, ms")->capture_default_str()->check(CLI::PositiveNumber);
    tg_cmd->add_option("-o,--output", tg_out, "Test source to write (default stdout)");
    tg_cmd->add_flag("--coverage", tg_coverage, "Report rule and branch coverage on stderr");
    tg_cmd->callback([&] {
        const auto m = tg_model.load_machine();
        const auto traces = generate_traces(m, spec);
        emit(tg_out, emit_tests(traces, m));
        if (tg_coverage) {
            const auto c = measure_coverage(traces, m);
            std::cerr << "rule coverage " << c.rule_coverage * 100 << "%, branch coverage " << c.branch_coverage * 100
                      << "% (" << c.branches_taken << "/" << c.branches_total << ")\n";
            for (const auto& r : c.rules_missed) std::cerr << "  never fired: " << r << "\n";
        }
    });

    // codegen
    auto* cg_cmd = app.add_subcommand("codegen", "Generate C++ from a model");
    cg_cmd->require_subcommand(1);
    auto* cg_source = cg_cmd->add_subcommand("source", "Header and implementation of the machine");
    ModelArgs src_model;
    src_model.add_to(cg_source);
    std::string src_dir = ".";
    cg_source->add_option("-o,--output", src_dir, "Output directory")->capture_default_str();
    cg_source->callback([&] {
        const auto b = generate_source(src_model.load_machine());
        write_file(fs::path(src_dir) / b.header_name, b.header);
        write_file(fs::path(src_dir) / b.implementation_name, b.implementation);
        std::cout << (fs::path(src_dir) / b.header_name).string() << "\n"
                  << (fs::path(src_dir) / b.implementation_name).string() << "\n";
    });
    auto* cg_pins = cg_cmd->add_subcommand("pinconfig", "Pin-binding skeleton (.a2c) to fill in");
    ModelArgs pins_model;
    pins_model.add_to(cg_pins);
    std::string pins_out;
    cg_pins->add_option("-o,--output", pins_out, "Output file (default stdout)");
    cg_pins->callback([&] { emit(pins_out, format_pin_config(generate_pin_config(pins_model.load_machine()))); });
    auto* cg_rt = cg_cmd->add_subcommand("runtime", "Board I/O unit and Arduino sketch from a completed pin file");
    ModelArgs rt_model;
    rt_model.add_to(cg_rt);
    std::string rt_pins, rt_dir = ".";
    cg_rt->add_option("--pins", rt_pins, "Completed pin-binding file")->required()->check(CLI::ExistingFile);
    cg_rt->add_option("-o,--output", rt_dir, "Output directory")->capture_default_str();
    cg_rt->callback([&] {
        const auto m = rt_model.load_machine();
        const auto b = generate_runtime(m, load_pin_config(rt_pins, m));
        write_file(fs::path(rt_dir) / b.hardware_name, b.hardware);
        write_file(fs::path(rt_dir) / b.loop_name, b.loop);
        std::cout << (fs::path(rt_dir) / b.hardware_name).string() << "\n" << (fs::path(rt_dir) / b.loop_name).string() << "\n";
    });

    // lung
    auto* lung_cmd = app.add_subcommand("lung", "Lung waveform with fixed valves, as CSV");
    std::string profile = "adult";
    std::string valves = "inspiration";
    double seconds = 3, dt_ms = 10;
    std::string lung_out;
    lung_cmd->add_option("--patient", profile, "Bundled profile name or profile file")->capture_default_str();
    lung_cmd->add_option("--valves", valves, "inspiration, expiration or pause")
        ->capture_default_str()
        ->check(CLI::IsMember({"inspiration", "expiration", "pause"}));
    lung_cmd->add_option("--seconds", seconds, "Simulated time")->capture_default_str()->check(CLI::PositiveNumber);
    lung_cmd->add_option("--dt", dt_ms, "Step, ms")->capture_default_str()->check(CLI::PositiveNumber);
    lung_cmd->add_option("-o,--output", lung_out, "CSV file (default stdout)");
    lung_cmd->callback([&] {
        const auto p = fs::exists(profile) ? load_lung_profile(profile)
                                           : load_lung_profile(assets_dir() / "patients" / (profile + ".profile"));
        auto circuit = p.circuit;
        circuit.inspiratory_open = valves == "inspiration";
        circuit.expiratory_open = valves == "expiration";
        emit(lung_out, waveform_csv(simulate(p.patient, circuit, seconds, dt_ms / 1000.0)));
    });

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Re-execute a session log and compare it exactly");
    std::string log_file, session_json = "{}";
    replay_cmd->add_option("log", log_file, "Session log (.jsonl)")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--session", session_json, "The session request JSON the log was made with")->capture_default_str();
    replay_cmd->callback([&] {
        nlohmann::json request;
        try {
            request = nlohmann::json::parse(session_json);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("--session: ") + e.what());
        }
        const auto r = replay_log(read_file(log_file), settings_from_json(request));
        std::cout << r.steps << " steps: " << (r.identical() ? "identical" : "DIFFERS: " + r.detail)
                  << (r.apnea_raised ? " (apnea alarm raised)" : "") << "\n";
        if (!r.identical()) rc = kFailed;
    });

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "HTTP session service");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_sessions = 8;
    std::string log_dir;
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port (0 picks one)")->capture_default_str()->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--max-sessions", max_sessions, "Concurrent session limit")->capture_default_str();
    serve_cmd->add_option("--log-dir", log_dir, "Persist session logs here as <id>.jsonl");
    serve_cmd->callback([&] {
        SessionManager sessions(max_sessions, log_dir.empty() ? std::nullopt : std::optional<fs::path>(log_dir));
        HttpService service(sessions);
        const int bound = service.bind(host, port);
        if (bound < 0) throw UsageError("cannot bind " + host + ":" + std::to_string(port));
        g_service = &service;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cout << "listening on http://" << host << ":" << bound << std::endl;
        service.serve();
        g_service = nullptr;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return e.get_exit_code() == 0 ? code : kUsage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
    return rc;
}
