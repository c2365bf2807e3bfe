#pragma once

// ContractSpec YAML documents -> Contract / PipelineSpec, and back.
// yaml-cpp handles the YAML syntax; everything schema-level lives here.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "abc/composition.hpp"
#include "abc/core.hpp"

namespace abc {

struct Diagnostic {
  std::string kind;  // SyntaxError, SchemaError, SemanticError
  std::string message;
  SourceSpan span;
  std::string element;

  bool operator==(const Diagnostic&) const = default;
};

inline nlohmann::json to_json(const Diagnostic& d) {
  return {{"kind", d.kind},
          {"message", d.message},
          {"element", d.element},
          {"line", d.span.line},
          {"column", d.span.column},
          {"length", d.span.length}};
}

[[noreturn]] inline void raise(const Diagnostic& d) {
  if (d.kind == "SyntaxError") throw SyntaxError(d.message, d.span);
  if (d.kind == "SemanticError") throw SemanticError(d.message, d.span);
  throw SchemaError(d.message, d.span);
}

namespace detail {

inline constexpr std::size_t kMaxValueDepth = 64;
inline constexpr std::size_t kMaxValueNodes = 100000;

inline SourceSpan span_of(const YAML::Node& n, std::size_t length = 0) {
  if (!n.IsDefined()) return {};
  const auto m = n.Mark();
  if (m.is_null() || m.line < 0) return {};
  if (!length && n.IsScalar()) length = n.Scalar().size();
  return {static_cast<std::size_t>(m.line) + 1, static_cast<std::size_t>(m.column) + 1, length};
}

inline const std::regex& identifier_re() {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_.-]*");
  return re;
}

inline const std::regex& int_re() {
  static const std::regex re("[-+]?[0-9]+");
  return re;
}

inline const std::regex& float_re() {
  static const std::regex re("[-+]?(\\.[0-9]+|[0-9]+(\\.[0-9]*)?)([eE][-+]?[0-9]+)?");
  return re;
}

class Reader {
 public:
  [[noreturn]] void schema(const std::string& msg, const YAML::Node& at, const SourceSpan& fallback = {}) const {
    auto sp = span_of(at);
    throw SchemaError(msg, sp.valid() ? sp : fallback);
  }

  static bool quoted(const YAML::Node& n) { return n.Tag() == "!"; }

  nlohmann::json value(const YAML::Node& n, std::size_t depth = 0) {
    if (depth > kMaxValueDepth) schema("value nests deeper than " + std::to_string(kMaxValueDepth) + " levels", n);
    if (++nodes_ > kMaxValueNodes) schema("value has too many nodes", n);
    switch (n.Type()) {
      case YAML::NodeType::Undefined:
      case YAML::NodeType::Null: return nullptr;
      case YAML::NodeType::Scalar: return scalar(n);
      case YAML::NodeType::Sequence: {
        auto out = nlohmann::json::array();
        for (const auto& x : n) out.push_back(value(x, depth + 1));
        return out;
      }
      case YAML::NodeType::Map: {
        auto out = nlohmann::json::object();
        for (const auto& kv : n) {
          if (!kv.first.IsScalar()) schema("mapping keys must be scalars", kv.first);
          out[kv.first.Scalar()] = value(kv.second, depth + 1);
        }
        return out;
      }
    }
    return nullptr;
  }

  static nlohmann::json scalar(const YAML::Node& n) {
    const std::string& s = n.Scalar();
    if (quoted(n)) return s;
    if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    if (std::regex_match(s, int_re())) {
      try {
        return std::stoll(s);
      } catch (const std::out_of_range&) {
        return std::stod(s);
      }
    }
    if (std::regex_match(s, float_re())) {
      try {
        return std::stod(s);
      } catch (const std::out_of_range&) {
        return s;
      }
    }
    if (s == ".inf" || s == "+.inf" || s == ".Inf") return std::numeric_limits<double>::infinity();
    if (s == "-.inf" || s == "-.Inf") return -std::numeric_limits<double>::infinity();
    return s;
  }

  void expect_map(const YAML::Node& n, const std::string& what, const YAML::Node& parent) const {
    if (!n.IsMap()) schema(what + " must be a mapping", n.IsDefined() && !n.IsNull() ? n : parent);
  }

  void expect_seq(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) schema(what + " must be a list", n);
  }

  /// Rejects duplicate and unknown keys.
  void keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) const {
    std::set<std::string> seen;
    for (const auto& kv : map) {
      if (!kv.first.IsScalar()) schema("keys in " + where + " must be scalars", kv.first);
      const auto& k = kv.first.Scalar();
      if (!seen.insert(k).second) schema("duplicate key '" + k + "' in " + where, kv.first);
      if (!allowed.count(k)) schema("unknown field '" + k + "' in " + where, kv.first);
    }
  }

  void require(const YAML::Node& map, const std::string& key, const std::string& where) const {
    if (!map[key].IsDefined()) schema("missing required field '" + key + "' in " + where, map);
  }

  std::string str(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) schema(what + " must be a string", n);
    return n.Scalar();
  }

  std::string identifier(const YAML::Node& n, const std::string& what) const {
    auto s = str(n, what);
    if (!std::regex_match(s, identifier_re())) schema(what + " '" + s + "' is not a valid identifier", n);
    return s;
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) schema(what + " must be a number", n);
    auto v = scalar(n);
    if (!v.is_number()) schema(what + " must be a number", n);
    return v.get<double>();
  }

  long long integer(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) schema(what + " must be an integer", n);
    auto v = scalar(n);
    if (!v.is_number_integer()) schema(what + " must be an integer", n);
    return v.get<long long>();
  }

  bool boolean(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) schema(what + " must be true or false", n);
    auto v = scalar(n);
    if (!v.is_boolean()) schema(what + " must be true or false", n);
    return v.get<bool>();
  }

  double probability(const YAML::Node& n, const std::string& what) const {
    double x = number(n, what);
    if (!(x >= 0.0 && x <= 1.0)) schema(what + " out of [0,1]", n);
    return x;
  }

  Constraint constraint(const YAML::Node& n, Section section, Severity sev, const std::string& where) {
    expect_map(n, "constraint entry in " + where, n);
    keys(n, {"name", "category", "weight", "check", "recovery", "on_missing", "description"}, "constraint");
    require(n, "name", where);
    require(n, "check", where);
    Constraint c;
    c.name = identifier(n["name"], "constraint name");
    spans[c.name] = span_of(n["name"]);
    c.section = section;
    c.severity = sev;
    if (n["category"]) c.category = str(n["category"], "category");
    if (n["description"]) c.description = str(n["description"], "description");
    if (n["weight"]) {
      c.weight = number(n["weight"], "weight");
      if (!(c.weight > 0.0) || !std::isfinite(c.weight)) schema("weight must be a positive finite number", n["weight"]);
    }
    if (n["recovery"]) c.recovery = identifier(n["recovery"], "recovery reference");
    if (n["on_missing"]) {
      auto m = on_missing_from_string(str(n["on_missing"], "on_missing"));
      if (!m) schema("on_missing must be one of violate, satisfy, skip", n["on_missing"]);
      c.on_missing = *m;
    }
    c.check = predicate(n["check"], n);
    return c;
  }

  Predicate predicate(const YAML::Node& n, const YAML::Node& parent) {
    expect_map(n, "check", parent);
    keys(n, {"field", "operator", "value", "expr"}, "check");
    if (n["expr"]) {
      if (n["field"] || n["operator"] || n["value"]) schema("check takes either 'expr' or 'field'/'operator'/'value'", n);
      const auto src = str(n["expr"], "expr");
      try {
        return Predicate::expression(src);
      } catch (const ExprError& e) {
        auto sp = span_of(n["expr"]);
        if (sp.valid() && !quoted(n["expr"])) sp.column += e.column();
        throw SchemaError(std::string("invalid expression: ") + e.what(), sp);
      }
    }
    require(n, "field", "check");
    require(n, "operator", "check");
    const auto field = str(n["field"], "check.field");
    if (field.empty()) schema("check.field must not be empty", n["field"]);
    auto op = operator_from_string(str(n["operator"], "check.operator"));
    if (!op) schema("unknown operator '" + n["operator"].Scalar() + "'", n["operator"]);
    nlohmann::json operand = nullptr;
    if (n["value"]) operand = value(n["value"]);
    else if (*op != Operator::exists) schema("operator '" + n["operator"].Scalar() + "' needs a value", n);
    const auto& at = n["value"].IsDefined() ? n["value"] : n;
    switch (*op) {
      case Operator::range:
        if (!operand.is_array() || operand.size() != 2 || !operand[0].is_number() || !operand[1].is_number())
          schema("range value must be [lo, hi]", at);
        if (operand[0].get<double>() > operand[1].get<double>()) schema("range lower bound exceeds upper bound", at);
        break;
      case Operator::in:
      case Operator::not_in:
        if (!operand.is_array()) schema("in/not_in value must be a list", at);
        break;
      case Operator::lt:
      case Operator::le:
      case Operator::gt:
      case Operator::ge:
        if (!operand.is_number()) schema("ordering operators compare against numbers", at);
        break;
      case Operator::matches:
        if (!operand.is_string()) schema("matches value must be a string pattern", at);
        break;
      case Operator::exists:
        if (!operand.is_null() && !operand.is_boolean()) schema("exists takes true or false", at);
        break;
      default: break;
    }
    try {
      return Predicate::field(field, *op, operand);
    } catch (const std::regex_error& e) {
      schema(std::string("invalid regular expression: ") + e.what(), at);
    }
  }

  std::vector<Constraint> constraint_list(const YAML::Node& n, Section section, Severity sev, const std::string& where) {
    std::vector<Constraint> out;
    if (!n.IsDefined() || n.IsNull()) return out;
    expect_seq(n, where);
    for (const auto& e : n) out.push_back(constraint(e, section, sev, where));
    return out;
  }

  void split_section(const YAML::Node& n, const YAML::Node& parent, Section section, std::vector<Constraint>& hard,
                     std::vector<Constraint>& soft, const std::string& where) {
    if (!n.IsDefined() || n.IsNull()) return;
    expect_map(n, where, parent);
    keys(n, {"hard", "soft"}, where);
    hard = constraint_list(n["hard"], section, Severity::hard, where + ".hard");
    soft = constraint_list(n["soft"], section, Severity::soft, where + ".soft");
  }

  RecoveryStrategy strategy(const YAML::Node& n) {
    expect_map(n, "recovery strategy", n);
    keys(n, {"name", "type", "action", "max_attempts", "fallback", "description"}, "recovery strategy");
    require(n, "name", "recovery strategy");
    require(n, "type", "recovery strategy");
    RecoveryStrategy s;
    s.name = identifier(n["name"], "strategy name");
    spans["strategy:" + s.name] = span_of(n["name"]);
    auto t = strategy_type_from_string(str(n["type"], "strategy type"));
    if (!t) schema("unknown strategy type '" + n["type"].Scalar() + "'", n["type"]);
    s.type = *t;
    if (n["action"]) s.action = value(n["action"]);
    if (n["max_attempts"]) {
      auto m = integer(n["max_attempts"], "max_attempts");
      if (m < 1 || m > 1000000) schema("max_attempts must be at least 1", n["max_attempts"]);
      s.max_attempts = static_cast<int>(m);
    }
    if (n["fallback"]) s.fallback = identifier(n["fallback"], "fallback reference");
    return s;
  }

  SatisfactionParams satisfaction(const YAML::Node& n, const YAML::Node& parent) {
    SatisfactionParams sp;
    expect_map(n, "satisfaction", parent);
    keys(n, {"p", "delta", "k", "T"}, "satisfaction");
    if (n["p"]) sp.p = probability(n["p"], "p");
    if (n["delta"]) sp.delta = probability(n["delta"], "delta");
    if (n["k"]) {
      auto k = integer(n["k"], "k");
      if (k < 0) schema("k must be a non-negative integer", n["k"]);
      sp.k = static_cast<std::size_t>(k);
    }
    if (n["T"]) {
      auto T = integer(n["T"], "T");
      if (T < 0) schema("T must be a non-negative integer", n["T"]);
      sp.horizon = static_cast<std::size_t>(T);
    }
    return sp;
  }

  DriftConfig drift(const YAML::Node& n, const YAML::Node& parent) {
    DriftConfig d;
    expect_map(n, "drift", parent);
    keys(n, {"w_c", "w_d", "window", "vocabulary", "reference", "theta1", "theta2"}, "drift");
    if (n["w_c"]) d.w_c = probability(n["w_c"], "w_c");
    if (n["w_d"]) d.w_d = probability(n["w_d"], "w_d");
    if (n["w_c"] && !n["w_d"]) d.w_d = 1.0 - d.w_c;
    if (n["w_d"] && !n["w_c"]) d.w_c = 1.0 - d.w_d;
    if (std::fabs(d.w_c + d.w_d - 1.0) > 1e-12) schema("w_c + w_d must equal 1", n["w_c"] ? n["w_c"] : n);
    if (n["window"]) {
      auto w = integer(n["window"], "window");
      if (w < 1) schema("window must be a positive integer", n["window"]);
      d.window = static_cast<std::size_t>(w);
    }
    if (n["vocabulary"]) {
      expect_seq(n["vocabulary"], "vocabulary");
      std::set<std::string> seen;
      for (const auto& v : n["vocabulary"]) {
        auto label = str(v, "vocabulary label");
        if (label.empty()) schema("vocabulary labels must be non-empty", v);
        if (!seen.insert(label).second) schema("vocabulary label '" + label + "' repeats", v);
        d.vocabulary.push_back(label);
      }
    }
    if (n["reference"]) {
      expect_map(n["reference"], "reference", n);
      double sum = 0.0;
      for (const auto& kv : n["reference"]) {
        auto label = str(kv.first, "reference label");
        if (std::find(d.vocabulary.begin(), d.vocabulary.end(), label) == d.vocabulary.end())
          schema("reference label '" + label + "' is not in the vocabulary", kv.first);
        double m = probability(kv.second, "reference mass");
        d.reference[label] = m;
        sum += m;
      }
      if (std::fabs(sum - 1.0) > 1e-9) schema("reference distribution must sum to 1", n["reference"]);
    }
    if (n["theta1"]) d.theta1 = probability(n["theta1"], "theta1");
    if (n["theta2"]) d.theta2 = probability(n["theta2"], "theta2");
    if (!(d.theta1 < d.theta2)) schema("theta1 must be below theta2", n["theta1"] ? n["theta1"] : n);
    return d;
  }

  ReliabilityWeights reliability(const YAML::Node& n, const YAML::Node& parent) {
    ReliabilityWeights r;
    expect_map(n, "reliability", parent);
    keys(n, {"a1", "a2", "a3", "a4"}, "reliability");
    if (n["a1"]) r.a1 = probability(n["a1"], "a1");
    if (n["a2"]) r.a2 = probability(n["a2"], "a2");
    if (n["a3"]) r.a3 = probability(n["a3"], "a3");
    if (n["a4"]) r.a4 = probability(n["a4"], "a4");
    if (std::fabs(r.a1 + r.a2 + r.a3 + r.a4 - 1.0) > 1e-12) schema("a1 + a2 + a3 + a4 must equal 1", n);
    return r;
  }

  std::string version(const YAML::Node& n) const {
    if (!n.IsScalar() || n.Scalar().empty()) schema("contractspec must be a version string", n);
    return n.Scalar();
  }

  std::map<std::string, SourceSpan> spans;

 private:
  std::size_t nodes_ = 0;
};

inline YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    SourceSpan sp;
    if (!e.mark.is_null() && e.mark.line >= 0)
      sp = {static_cast<std::size_t>(e.mark.line) + 1, static_cast<std::size_t>(e.mark.column) + 1, 0};
    throw SyntaxError(e.msg.empty() ? std::string("malformed YAML") : e.msg, sp);
  }
}

inline const std::set<std::string>& agent_keys() {
  static const std::set<std::string> k = {"contractspec", "kind", "name", "description", "preconditions", "invariants",
                                          "governance", "recovery", "satisfaction", "drift", "reliability"};
  return k;
}

// Semantic rules raise SemanticError; every other structural issue is a
// schema-level problem.
inline bool semantic_rule(const std::string& rule) {
  static const std::set<std::string> rules = {"duplicate constraint name", "duplicate strategy name",
                                              "hard constraint carries recovery", "unresolved recovery reference",
                                              "unresolved fallback reference", "cyclic fallback chain"};
  return rules.count(rule) > 0;
}

inline Contract parse_agent(Reader& r, const YAML::Node& root) {
  Contract c;
  r.keys(root, agent_keys(), "contract");
  c.version = r.version(root["contractspec"]);
  c.kind = ContractKind::agent;
  c.name = r.identifier(root["name"], "contract name");
  if (root["description"]) c.description = r.str(root["description"], "description");
  c.preconditions = r.constraint_list(root["preconditions"], Section::precondition, Severity::hard, "preconditions");
  r.split_section(root["invariants"], root, Section::invariant, c.invariants_hard, c.invariants_soft, "invariants");
  r.split_section(root["governance"], root, Section::governance, c.governance_hard, c.governance_soft, "governance");
  if (root["recovery"]) {
    r.expect_map(root["recovery"], "recovery", root);
    r.keys(root["recovery"], {"strategies"}, "recovery");
    const auto& s = root["recovery"]["strategies"];
    if (s.IsDefined() && !s.IsNull()) {
      r.expect_seq(s, "recovery.strategies");
      for (const auto& e : s) c.recovery_strategies.push_back(r.strategy(e));
    }
  }
  if (root["satisfaction"]) c.satisfaction = r.satisfaction(root["satisfaction"], root);
  if (root["drift"]) c.drift = r.drift(root["drift"], root);
  if (root["reliability"]) c.reliability = r.reliability(root["reliability"], root);
  return c;
}

inline std::vector<Diagnostic> semantic_diagnostics(const Contract& c, const std::map<std::string, SourceSpan>& spans) {
  std::vector<Diagnostic> out;
  for (const auto& issue : validate_contract(c)) {
    SourceSpan sp;
    if (auto it = spans.find(issue.element); it != spans.end()) sp = it->second;
    else if (auto it2 = spans.find("strategy:" + issue.element); it2 != spans.end()) sp = it2->second;
    out.push_back({semantic_rule(issue.rule) ? "SemanticError" : "SchemaError", issue.rule + ": " + issue.message, sp,
                   issue.element});
  }
  return out;
}

inline YAML::Node document_root(const std::string& text) {
  auto root = load_yaml(text);
  if (!root.IsMap()) throw SchemaError("document must be a mapping with contractspec, kind and name", detail::span_of(root));
  return root;
}

}  // namespace detail

/// Parses, reporting every diagnostic instead of stopping at the first.
/// Syntax and schema problems stop the parse; semantic problems are all
/// collected.
struct ParseResult {
  std::optional<Contract> contract;
  std::vector<Diagnostic> diagnostics;
  std::vector<StructuralIssue> warnings;

  bool ok() const { return contract && diagnostics.empty(); }
};

inline ParseResult parse_contract_diagnostics(const std::string& text) {
  ParseResult out;
  try {
    auto root = detail::document_root(text);
    detail::Reader r;
    for (const char* k : {"contractspec", "kind", "name"}) r.require(root, k, "contract");
    const auto kind = r.str(root["kind"], "kind");
    if (kind == "pipeline") r.schema("pipeline documents are loaded as pipelines, not agent contracts", root["kind"]);
    if (kind != "agent") r.schema("kind must be 'agent' or 'pipeline'", root["kind"]);
    auto c = detail::parse_agent(r, root);
    out.diagnostics = detail::semantic_diagnostics(c, r.spans);
    out.warnings = contract_warnings(c);
    out.contract = std::move(c);
  } catch (const ParseError& e) {
    out.diagnostics.push_back({e.kind(), e.message(), e.span(), ""});
  } catch (const YAML::Exception& e) {
    out.diagnostics.push_back({"SchemaError", e.msg, {}, ""});
  } catch (const std::exception& e) {
    out.diagnostics.push_back({"SchemaError", e.what(), {}, ""});
  }
  return out;
}

/// Throws SyntaxError, SchemaError or SemanticError for the first problem.
inline Contract parse_contract(const std::string& text) {
  auto res = parse_contract_diagnostics(text);
  if (!res.diagnostics.empty()) raise(res.diagnostics.front());
  return std::move(*res.contract);
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Contract load_contract_file(const std::filesystem::path& p) { return parse_contract(read_text_file(p)); }

// ---------------------------------------------------------------------------
// Pipelines

inline PipelineSpec parse_pipeline(const std::string& text, const std::filesystem::path& base_dir = ".") {
  auto root = detail::document_root(text);
  detail::Reader r;
  for (const char* k : {"contractspec", "kind", "name", "stages"}) r.require(root, k, "pipeline");
  if (r.str(root["kind"], "kind") != "pipeline") r.schema("kind must be 'pipeline'", root["kind"]);
  r.keys(root, {"contractspec", "kind", "name", "description", "stages", "handoffs", "governance", "coordination",
                "satisfaction", "conditional_independence"},
         "pipeline");
  r.version(root["contractspec"]);
  PipelineSpec p;
  p.name = r.identifier(root["name"], "pipeline name");
  if (root["description"]) p.description = r.str(root["description"], "description");

  r.expect_seq(root["stages"], "stages");
  std::set<std::string> stage_names;
  for (const auto& s : root["stages"]) {
    r.expect_map(s, "stage", root["stages"]);
    r.keys(s, {"name", "contract"}, "stage");
    r.require(s, "name", "stage");
    r.require(s, "contract", "stage");
    PipelineStage st;
    st.name = r.identifier(s["name"], "stage name");
    if (!stage_names.insert(st.name).second) throw SemanticError("duplicate stage '" + st.name + "'", detail::span_of(s["name"]));
    st.contract_path = r.str(s["contract"], "stage contract");
    auto path = std::filesystem::path(st.contract_path);
    if (path.is_relative()) path = base_dir / path;
    st.contract = load_contract_file(path);
    p.stages.push_back(std::move(st));
  }
  if (p.stages.empty()) r.schema("a pipeline needs at least one stage", root["stages"]);

  if (root["handoffs"] && !root["handoffs"].IsNull()) {
    r.expect_seq(root["handoffs"], "handoffs");
    for (const auto& h : root["handoffs"]) {
      r.expect_map(h, "handoff", root["handoffs"]);
      r.keys(h, {"from", "to", "p", "delta", "fields", "produces", "invariants"}, "handoff");
      r.require(h, "from", "handoff");
      r.require(h, "to", "handoff");
      PipelineHandoff ph;
      ph.from = r.identifier(h["from"], "handoff source");
      ph.to = r.identifier(h["to"], "handoff target");
      const std::size_t i = p.handoffs.size();
      if (i + 1 >= p.stages.size() || p.stages[i].name != ph.from || p.stages[i + 1].name != ph.to)
        throw SemanticError("handoff " + ph.from + " -> " + ph.to + " does not join adjacent stages in order",
                            detail::span_of(h["from"]));
      if (h["p"]) ph.spec.p_h = r.probability(h["p"], "handoff p");
      if (h["delta"]) ph.spec.delta_h = r.probability(h["delta"], "handoff delta");
      if (h["produces"] && !h["produces"].IsNull()) {
        r.expect_map(h["produces"], "produces", h);
        for (const auto& kv : h["produces"]) {
          auto kind = r.str(kv.second, "field kind");
          if (!known_kind(kind)) r.schema("unknown field kind '" + kind + "'", kv.second);
          ph.spec.produces[r.str(kv.first, "produced field")] = kind;
        }
      }
      if (h["fields"] && !h["fields"].IsNull()) {
        r.expect_seq(h["fields"], "fields");
        for (const auto& f : h["fields"]) {
          r.expect_map(f, "field mapping", h["fields"]);
          r.keys(f, {"from", "to", "type"}, "field mapping");
          r.require(f, "from", "field mapping");
          FieldMapping m;
          m.upstream = r.str(f["from"], "mapping source");
          m.downstream = f["to"] ? r.str(f["to"], "mapping target") : m.upstream;
          if (f["type"]) {
            m.kind = r.str(f["type"], "mapping type");
            if (!known_kind(m.kind)) r.schema("unknown field kind '" + m.kind + "'", f["type"]);
          }
          ph.spec.type_map.push_back(std::move(m));
        }
      }
      ph.spec.invariants = r.constraint_list(h["invariants"], Section::invariant, Severity::hard, "handoff invariants");
      p.handoffs.push_back(std::move(ph));
    }
  }
  if (p.handoffs.size() + 1 != p.stages.size())
    throw SemanticError("a pipeline of " + std::to_string(p.stages.size()) + " stages needs " +
                            std::to_string(p.stages.size() - 1) + " handoffs",
                        detail::span_of(root["stages"]));

  r.split_section(root["governance"], root, Section::governance, p.governance_hard, p.governance_soft, "governance");
  if (root["coordination"]) {
    p.coordination = r.str(root["coordination"], "coordination");
    if (p.coordination != "cascade" && p.coordination != "local")
      r.schema("coordination must be 'cascade' or 'local'", root["coordination"]);
  }
  if (root["satisfaction"]) p.satisfaction = r.satisfaction(root["satisfaction"], root);
  if (root["conditional_independence"])
    p.conditional_independence_assumed = r.boolean(root["conditional_independence"], "conditional_independence");

  auto composed = compose_pipeline(p);
  auto issues = validate_contract(composed);
  if (!issues.empty()) throw SemanticError("composed pipeline: " + issues.front().rule + ": " + issues.front().message, {});
  return p;
}

inline PipelineSpec load_pipeline_file(const std::filesystem::path& p) {
  return parse_pipeline(read_text_file(p), p.has_parent_path() ? p.parent_path() : std::filesystem::path("."));
}

/// Reads the `kind:` of a document without parsing the rest.
inline std::string document_kind(const std::string& text) {
  auto root = detail::document_root(text);
  if (!root["kind"].IsDefined() || !root["kind"].IsScalar()) throw SchemaError("missing required field 'kind'", detail::span_of(root));
  return root["kind"].Scalar();
}

// ---------------------------------------------------------------------------
// Emission. Scalars are written as JSON literals (valid YAML flow scalars),
// strings always quoted and doubles at round-trip precision.

namespace detail {

inline std::string lit(const nlohmann::json& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }
inline std::string qs(const std::string& s) { return lit(nlohmann::json(s)); }

inline void emit_constraints(std::ostringstream& os, const std::vector<Constraint>& cs, const std::string& indent) {
  for (const auto& c : cs) {
    os << indent << "- name: " << qs(c.name) << "\n";
    if (!c.category.empty()) os << indent << "  category: " << qs(c.category) << "\n";
    if (!c.description.empty()) os << indent << "  description: " << qs(c.description) << "\n";
    os << indent << "  weight: " << lit(c.weight) << "\n";
    if (const auto* f = c.check.as_field()) {
      os << indent << "  check: {field: " << qs(f->field) << ", operator: " << to_string(f->op);
      if (!f->operand.is_null()) os << ", value: " << lit(f->operand);
      os << "}\n";
    } else {
      os << indent << "  check: {expr: " << qs(c.check.as_expression()->source) << "}\n";
    }
    if (c.recovery) os << indent << "  recovery: " << qs(*c.recovery) << "\n";
    os << indent << "  on_missing: " << to_string(c.on_missing) << "\n";
  }
}

}  // namespace detail

inline std::string to_yaml(const Contract& c) {
  using detail::lit;
  using detail::qs;
  std::ostringstream os;
  os << "contractspec: " << qs(c.version) << "\n";
  os << "kind: " << to_string(c.kind) << "\n";
  os << "name: " << qs(c.name) << "\n";
  if (!c.description.empty()) os << "description: " << qs(c.description) << "\n";
  if (!c.preconditions.empty()) {
    os << "preconditions:\n";
    detail::emit_constraints(os, c.preconditions, "  ");
  }
  auto section = [&](const char* key, const std::vector<Constraint>& hard, const std::vector<Constraint>& soft) {
    if (hard.empty() && soft.empty()) return;
    os << key << ":\n";
    if (!hard.empty()) {
      os << "  hard:\n";
      detail::emit_constraints(os, hard, "    ");
    }
    if (!soft.empty()) {
      os << "  soft:\n";
      detail::emit_constraints(os, soft, "    ");
    }
  };
  section("invariants", c.invariants_hard, c.invariants_soft);
  section("governance", c.governance_hard, c.governance_soft);
  if (!c.recovery_strategies.empty()) {
    os << "recovery:\n  strategies:\n";
    for (const auto& s : c.recovery_strategies) {
      os << "    - name: " << qs(s.name) << "\n";
      os << "      type: " << to_string(s.type) << "\n";
      if (!s.action.is_null()) os << "      action: " << lit(s.action) << "\n";
      os << "      max_attempts: " << s.max_attempts << "\n";
      if (s.fallback) os << "      fallback: " << qs(*s.fallback) << "\n";
    }
  }
  const auto& sp = c.satisfaction;
  os << "satisfaction:\n  p: " << lit(sp.p) << "\n  delta: " << lit(sp.delta) << "\n  k: " << sp.k << "\n";
  if (sp.horizon) os << "  T: " << *sp.horizon << "\n";
  const auto& d = c.drift;
  os << "drift:\n  w_c: " << lit(d.w_c) << "\n  w_d: " << lit(d.w_d) << "\n  window: " << d.window << "\n";
  if (!d.vocabulary.empty()) os << "  vocabulary: " << lit(d.vocabulary) << "\n";
  if (!d.reference.empty()) os << "  reference: " << lit(d.reference) << "\n";
  os << "  theta1: " << lit(d.theta1) << "\n  theta2: " << lit(d.theta2) << "\n";
  const auto& r = c.reliability;
  os << "reliability:\n  a1: " << lit(r.a1) << "\n  a2: " << lit(r.a2) << "\n  a3: " << lit(r.a3) << "\n  a4: " << lit(r.a4)
     << "\n";
  return os.str();
}

}  // namespace abc
