#pragma once

// Stuttering simulation between two machines over their freeBoolean
// transition systems, compared through a glue map of shared locations.

#include "asmwb/verify.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace asmwb {

struct GlueMap {
    std::string abstract_name;
    std::string refined_name;
    std::vector<std::string> linked;

    bool operator==(const GlueMap&) const = default;
};

/// Text form: a `glue <abstract> -> <refined>` header, then one location per
/// line; `#` starts a comment.
GlueMap parse_glue(std::string_view text);
GlueMap load_glue(const std::string& path);
std::string format_glue(const GlueMap& glue);

/// Glues for the bundled level pairs (0,1), (1,2), (2,3) and (0,2).
std::map<std::pair<int, int>, GlueMap> default_glues();
GlueMap default_glue(int from, int to);

/// Every controlled location of `machine` (identity refinement glue).
GlueMap full_glue(const MachineDefinition& machine);

struct RefinementResult {
    enum class Verdict { Verified, Refuted };
    Verdict verdict = Verdict::Refuted;
    /// Refined run whose glue projection no abstract run can follow. Only
    /// present for refuted pairs where trace inclusion fails as well.
    std::optional<Trace> witness;
    std::vector<int> witness_path;  // edge indices in the refined system
    bool witness_abstract_only = false;
    std::size_t abstract_states = 0;
    std::size_t refined_states = 0;
    std::size_t relation_size = 0;
    std::chrono::milliseconds elapsed{0};

    [[nodiscard]] bool verified() const { return verdict == Verdict::Verified; }
};

/// Verified iff a stuttering simulation contains the pair of initial states:
/// each refined step from a related pair (a, r) either keeps the glue
/// projection with (a, r') related, or is matched by an abstract step a -> a'
/// with the same projection and (a', r') related. Linked enum locations are
/// compared on the literals both domains share. Throws EmptyGlue,
/// UnresolvedSymbol, TypeMismatch, StateSpaceBudgetExceeded.
RefinementResult check_refinement(const MachineDefinition& abstract_machine, const MachineDefinition& refined_machine,
                                  const GlueMap& glue, const AbstractionConfig& abstraction = {});

} // namespace asmwb
