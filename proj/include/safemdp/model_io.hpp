#pragma once

#include "safemdp/core.hpp"
#include "safemdp/uncertainty.hpp"

#include <optional>
#include <string>

namespace safemdp {

/// JSON model document: the MDP plus optional sample counts and an optional
/// inline error function. Numbers round-trip exactly.
struct ModelDocument {
    Mdp mdp;
    std::optional<CountTable> counts;
    std::optional<ErrorFunction> error;
};

ModelDocument load_model(const std::string& path);
ModelDocument parse_model(const std::string& text);
void save_model(const ModelDocument& doc, const std::string& path);
std::string serialize_model(const ModelDocument& doc);

/// Policy document: either {"actions": [...]} (deterministic) or
/// {"action_dist": [[...]]} (stochastic); n_actions required.
Policy load_policy(const std::string& path, int n_states, int n_actions);
Policy parse_policy(const std::string& text, int n_states, int n_actions);

} // namespace safemdp
