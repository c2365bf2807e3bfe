#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "abc/error.hpp"

namespace abc {

/// Observed state of an agent at one step: a JSON-expressible nested map.
using StateDict = nlohmann::json;

struct ActionRecord {
  std::string label;
  StateDict payload = StateDict::object();

  bool operator==(const ActionRecord&) const = default;
};

/// tau = (s_0, a_0, s_1, ..., a_{T-1}, s_T). `stage_ends` is only used by
/// composed pipeline traces and marks the handoff step of each stage.
struct ExecutionTrace {
  std::vector<StateDict> states;
  std::vector<ActionRecord> actions;
  std::vector<std::size_t> stage_ends;

  std::size_t length() const { return actions.size(); }

  void validate() const {
    if (states.size() != actions.size() + 1)
      throw FormatError("trace must contain exactly one more state than actions (got " +
                        std::to_string(states.size()) + " states, " + std::to_string(actions.size()) +
                        " actions)");
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i].label.empty()) throw FormatError("action " + std::to_string(i) + " has an empty label");
    for (const auto& s : states)
      if (!s.is_object()) throw FormatError("every state must be a JSON object");
  }

  bool operator==(const ExecutionTrace&) const = default;
};

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto dot = path.find('.', start);
    if (dot == std::string_view::npos) dot = path.size();
    parts.emplace_back(path.substr(start, dot - start));
    start = dot + 1;
  }
  return parts;
}

/// Walks `parts[first..]` from `root`. Numeric segments index into lists.
inline const nlohmann::json* walk(const nlohmann::json& root, const std::vector<std::string>& parts,
                                  std::size_t first = 0) {
  const nlohmann::json* node = &root;
  for (std::size_t i = first; i < parts.size(); ++i) {
    const auto& key = parts[i];
    if (node->is_object()) {
      auto it = node->find(key);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else if (node->is_array()) {
      if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos) return nullptr;
      auto idx = std::stoull(key);
      if (idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else {
      return nullptr;
    }
  }
  return node;
}

/// Sets `path` inside `root`, creating intermediate maps.
inline void assign_path(nlohmann::json& root, std::string_view path, nlohmann::json value) {
  auto parts = split_path(path);
  nlohmann::json* node = &root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) *node = nlohmann::json::object();
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) *node = nlohmann::json::object();
  (*node)[parts.back()] = std::move(value);
}

/// Merged lookup view used by every predicate: `state.x` and bare `x` read
/// the state, `action.label` is the action label, `action.x` reads the
/// action payload.
class EvalView {
 public:
  EvalView(const StateDict& state, const ActionRecord* action) : state_(&state), action_(action) {
    if (action_) label_ = action_->label;
  }

  const nlohmann::json* resolve(std::string_view path) const {
    auto parts = split_path(path);
    if (parts.empty()) return nullptr;
    if (parts[0] == "action" && parts.size() > 1) {
      if (!action_) return nullptr;
      if (parts.size() == 2 && parts[1] == "label") return &label_;
      return walk(action_->payload, parts, 1);
    }
    if (parts[0] == "state" && parts.size() > 1) return walk(*state_, parts, 1);
    return walk(*state_, parts, 0);
  }

  const StateDict& state() const { return *state_; }
  const ActionRecord* action() const { return action_; }

 private:
  const StateDict* state_;
  const ActionRecord* action_;
  nlohmann::json label_;
};

}  // namespace abc
