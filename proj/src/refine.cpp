#include "asmwb/refine.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace asmwb {

namespace {

std::string strip(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

GlueMap parse_glue(std::string_view text)
{
    GlueMap g;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto c = line.find('#'); c != std::string::npos) line.resize(c);
        line = strip(line);
        if (line.empty()) continue;
        if (!header) {
            std::istringstream h(line);
            std::string kw, a, arrow, r;
            h >> kw >> a >> arrow >> r;
            if (kw != "glue" || arrow != "->" || a.empty() || r.empty())
                throw SyntaxError(lineno, 1, "'glue <abstract> -> <refined>'", line);
            g.abstract_name = a;
            g.refined_name = r;
            header = true;
            continue;
        }
        if (line.find_first_of(" \t") != std::string::npos) throw SyntaxError(lineno, 1, "one location name", line);
        g.linked.push_back(line);
    }
    if (!header) throw SyntaxError(1, 1, "'glue <abstract> -> <refined>'", "end of input");
    return g;
}

GlueMap load_glue(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CorruptedAsset, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_glue(ss.str());
}

std::string format_glue(const GlueMap& g)
{
    std::string out = "glue " + g.abstract_name + " -> " + g.refined_name + "\n";
    for (const auto& l : g.linked) out += l + "\n";
    return out;
}

std::map<std::pair<int, int>, GlueMap> default_glues()
{
    auto name = [](int l) { return "MVMController0" + std::to_string(l); };
    std::map<std::pair<int, int>, GlueMap> out;
    out[{0, 1}] = {name(0), name(1), {"state"}};
    out[{1, 2}] = {name(1), name(2), {"state"}};
    out[{2, 3}] = {name(2), name(3), {"state", "phase", "iValve", "oValve"}};
    out[{0, 2}] = {name(0), name(2), {"state"}};
    return out;
}

GlueMap default_glue(int from, int to)
{
    const auto all = default_glues();
    auto it = all.find({from, to});
    if (it == all.end())
        throw Error(ErrorCode::InvalidConfig, "no default glue for levels " + std::to_string(from) + " -> " + std::to_string(to));
    return it->second;
}

GlueMap full_glue(const MachineDefinition& m)
{
    GlueMap g{m.name, m.name, {}};
    for (int l = 0; l < m.user_location_count(); ++l) g.linked.push_back(m.locations[static_cast<size_t>(l)].name);
    return g;
}

namespace {

constexpr int kUnshared = -1;

/// Per linked location: location index and a value -> shared code table.
struct Side {
    std::vector<int> locations;
    std::vector<std::map<Value, int>> codes;
};

std::pair<Side, Side> link(const MachineDefinition& a, const MachineDefinition& r, const GlueMap& glue)
{
    if (glue.linked.empty()) throw Error(ErrorCode::EmptyGlue, "glue links no locations");
    Side sa, sr;
    for (const auto& name : glue.linked) {
        auto la = a.find_location(name);
        auto lr = r.find_location(name);
        if (!la || *la >= a.user_location_count())
            throw Error(ErrorCode::UnresolvedSymbol, "glue location '" + name + "' is not controlled in " + a.name);
        if (!lr || *lr >= r.user_location_count())
            throw Error(ErrorCode::UnresolvedSymbol, "glue location '" + name + "' is not controlled in " + r.name);
        const Type ta = a.locations[static_cast<size_t>(*la)].type;
        const Type tr = r.locations[static_cast<size_t>(*lr)].type;
        if (ta.kind != tr.kind) throw Error(ErrorCode::TypeMismatch, "glue location '" + name + "' has different types");
        std::map<Value, int> ca, cr;
        if (ta.kind == Type::Kind::Boolean) {
            for (int b = 0; b < 2; ++b) {
                ca[Value::boolean(b)] = b;
                cr[Value::boolean(b)] = b;
            }
        } else {
            const auto& da = a.domains[static_cast<size_t>(ta.domain)].literals;
            const auto& dr = r.domains[static_cast<size_t>(tr.domain)].literals;
            int code = 0;
            for (size_t i = 0; i < da.size(); ++i) {
                auto it = std::find(dr.begin(), dr.end(), da[i]);
                if (it == dr.end()) continue;
                ca[Value::literal(ta.domain, static_cast<int>(i))] = code;
                cr[Value::literal(tr.domain, static_cast<int>(it - dr.begin()))] = code;
                ++code;
            }
            if (code == 0) throw Error(ErrorCode::EmptyGlue, "glue location '" + name + "' shares no literals");
        }
        sa.locations.push_back(*la);
        sr.locations.push_back(*lr);
        sa.codes.push_back(std::move(ca));
        sr.codes.push_back(std::move(cr));
    }
    return {sa, sr};
}

std::vector<std::vector<int>> project(const TransitionSystem& ts, const Side& side)
{
    std::vector<std::vector<int>> out(ts.states.size());
    for (size_t s = 0; s < ts.states.size(); ++s) {
        for (size_t k = 0; k < side.locations.size(); ++k) {
            const auto& v = ts.value(static_cast<int>(s), side.locations[k]);
            auto it = side.codes[k].find(v);
            out[s].push_back(it == side.codes[k].end() ? kUnshared : it->second);
        }
    }
    return out;
}

/// Unshared literals are not compared.
bool match(const std::vector<int>& x, const std::vector<int>& y)
{
    for (size_t k = 0; k < x.size(); ++k)
        if (x[k] != y[k] && x[k] != kUnshared && y[k] != kUnshared) return false;
    return true;
}

} // namespace

RefinementResult check_refinement(const MachineDefinition& am, const MachineDefinition& rm, const GlueMap& glue,
                                  const AbstractionConfig& abstraction)
{
    const auto start = std::chrono::steady_clock::now();
    const auto [side_a, side_r] = link(am, rm, glue);
    const TransitionSystem A = build_ts(am, abstraction);
    const TransitionSystem R = build_ts(rm, abstraction);
    const auto pa = project(A, side_a);
    const auto pr = project(R, side_r);
    const size_t na = A.states.size();
    const size_t nr = R.states.size();

    // Successor lists without duplicate targets.
    auto succ = [](const TransitionSystem& ts) {
        std::vector<std::vector<int>> out(ts.states.size());
        for (const auto& e : ts.edges) out[static_cast<size_t>(e.from)].push_back(e.to);
        for (auto& v : out) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        return out;
    };
    const auto sa = succ(A);
    const auto sr = succ(R);

    std::vector<char> rel(na * nr, 0);
    auto at = [&](size_t a, size_t r) -> char& { return rel[a * nr + r]; };
    for (size_t a = 0; a < na; ++a)
        for (size_t r = 0; r < nr; ++r) at(a, r) = match(pa[a], pr[r]);

    // Greatest fixpoint: drop pairs with an unmatched refined step.
    for (bool changed = true; changed;) {
        changed = false;
        for (size_t a = 0; a < na; ++a) {
            for (size_t r = 0; r < nr; ++r) {
                if (!at(a, r)) continue;
                for (int r2 : sr[r]) {
                    const auto r2u = static_cast<size_t>(r2);
                    bool ok = match(pr[r], pr[r2u]) && at(a, r2u);
                    for (size_t i = 0; !ok && i < sa[a].size(); ++i) {
                        const auto a2 = static_cast<size_t>(sa[a][i]);
                        ok = match(pa[a2], pr[r2u]) && at(a2, r2u);
                    }
                    if (!ok) {
                        at(a, r) = 0;
                        changed = true;
                        break;
                    }
                }
            }
        }
    }

    RefinementResult result;
    result.abstract_states = na;
    result.refined_states = nr;
    result.relation_size = static_cast<size_t>(std::count(rel.begin(), rel.end(), 1));
    result.verdict = at(0, 0) ? RefinementResult::Verdict::Verified : RefinementResult::Verdict::Refuted;

    if (!result.verified()) {
        // Trace inclusion search: track every abstract state that can mirror
        // the refined prefix, closed under abstract steps the glue cannot see.
        auto close = [&](std::vector<char> set, const std::vector<int>& proj) {
            std::deque<size_t> work;
            for (size_t a = 0; a < na; ++a)
                if (set[a]) work.push_back(a);
            while (!work.empty()) {
                const size_t a = work.front();
                work.pop_front();
                for (int a2 : sa[a]) {
                    const auto a2u = static_cast<size_t>(a2);
                    if (!set[a2u] && match(pa[a2u], proj)) {
                        set[a2u] = 1;
                        work.push_back(a2u);
                    }
                }
            }
            return set;
        };
        using Node = std::pair<int, std::vector<char>>;
        std::vector<char> init(na, 0);
        if (match(pa[0], pr[0])) init[0] = 1;
        init = close(init, pr[0]);
        std::set<Node> seen;
        std::deque<std::pair<Node, std::vector<int>>> queue;
        seen.insert({0, init});
        queue.push_back({{0, init}, {}});
        if (std::find(init.begin(), init.end(), 1) == init.end()) queue.clear();  // initial states already differ
        while (!queue.empty() && !result.witness_path.size()) {
            auto [node, path] = std::move(queue.front());
            queue.pop_front();
            for (int ei : R.out[static_cast<size_t>(node.first)]) {
                const auto& e = R.edges[static_cast<size_t>(ei)];
                const auto& p2 = pr[static_cast<size_t>(e.to)];
                std::vector<char> next(na, 0);
                bool any = false;
                for (size_t a = 0; a < na; ++a) {
                    if (!node.second[a]) continue;
                    if (match(pa[a], p2)) next[a] = 1;
                    for (int a2 : sa[a])
                        if (match(pa[static_cast<size_t>(a2)], p2)) next[static_cast<size_t>(a2)] = 1;
                }
                next = close(next, p2);
                any = std::find(next.begin(), next.end(), 1) != next.end();
                auto p = path;
                p.push_back(ei);
                if (!any) {
                    result.witness_path = p;
                    break;
                }
                Node n{e.to, next};
                if (seen.insert(n).second) queue.push_back({std::move(n), std::move(p)});
            }
        }
        if (!result.witness_path.empty() || !match(pa[0], pr[0])) {
            if (auto trace = concretize(R, result.witness_path)) {
                result.witness = std::move(*trace);
            } else {
                result.witness_abstract_only = true;
                Trace t;
                t.states.push_back(R.concrete(0));
                for (int ei : result.witness_path) t.states.push_back(R.concrete(R.edges[static_cast<size_t>(ei)].to));
                result.witness = std::move(t);
            }
        }
    }
    result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return result;
}

} // namespace asmwb
