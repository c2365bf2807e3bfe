// Contract model, expression language, YAML parser and JSON round trips.

#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"

using namespace abc;
using fx::json;

namespace {

Contract minimal() {
  auto c = fx::agent("minimal");
  c.invariants_hard.push_back(fx::inv("floor", Severity::hard, "x", 0.0));
  return c;
}

std::vector<std::string> rules(const std::vector<StructuralIssue>& v) {
  std::vector<std::string> out;
  for (const auto& i : v) out.push_back(i.rule);
  return out;
}

}  // namespace

TEST(ValidateContract, MinimalContractHasNoIssues) { EXPECT_TRUE(validate_contract(minimal()).empty()); }

TEST(ValidateContract, UnresolvedRecoveryReference) {
  auto c = minimal();
  c.invariants_soft.push_back(fx::inv("tone", Severity::soft, "tone", 0.5, "fix-tone"));
  auto issues = validate_contract(c);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].rule, "unresolved recovery reference");
  EXPECT_EQ(issues[0].element, "tone");
}

TEST(ValidateContract, CyclicFallbackReportedOnce) {
  auto c = minimal();
  c.recovery_strategies.push_back({"A", StrategyType::re_prompt, {}, 1, "B"});
  c.recovery_strategies.push_back({"B", StrategyType::re_prompt, {}, 1, "A"});
  c.invariants_soft.push_back(fx::inv("tone", Severity::soft, "tone", 0.5, "A"));
  auto issues = validate_contract(c);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].rule, "cyclic fallback chain");
}

TEST(ValidateContract, DeterministicSortedOrder) {
  auto c = minimal();
  c.invariants_hard.push_back(fx::inv("zeta", Severity::hard, "z", 0.0));
  c.invariants_hard.back().weight = -1;
  c.invariants_hard.push_back(fx::inv("alpha", Severity::hard, "a", 0.0));
  c.invariants_hard.back().weight = 0;
  c.satisfaction.p = 2.0;
  auto a = validate_contract(c), b = validate_contract(c);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(a.front().element, "alpha");
}

TEST(ValidateContract, HardConstraintCannotCarryRecovery) {
  auto c = minimal();
  c.recovery_strategies.push_back({"r", StrategyType::re_prompt, {}, 1, std::nullopt});
  c.invariants_hard[0].recovery = "r";
  EXPECT_EQ(rules(validate_contract(c)), std::vector<std::string>{"hard constraint carries recovery"});
}

TEST(ValidateContract, DriftAndReliabilityWeightsMustSumToOne) {
  auto c = minimal();
  c.drift.w_c = 0.5;
  c.reliability.a1 = 0.5;
  auto r = rules(validate_contract(c));
  EXPECT_EQ(std::count(r.begin(), r.end(), "weights do not sum to 1"), 2);
}

TEST(ValidateContract, UnreferencedStrategyIsOnlyAWarning) {
  auto c = minimal();
  c.recovery_strategies.push_back({"spare", StrategyType::emit_event, {}, 3, std::nullopt});
  EXPECT_TRUE(validate_contract(c).empty());
  EXPECT_EQ(rules(contract_warnings(c)), std::vector<std::string>{"unreferenced strategy"});
}

TEST(ChainBudget, SumsAttemptsAlongFallbacks) {
  auto c = minimal();
  c.recovery_strategies.push_back({"A", StrategyType::re_prompt, {}, 2, "B"});
  c.recovery_strategies.push_back({"B", StrategyType::escalate_human, {}, 1, std::nullopt});
  EXPECT_EQ(c.chain_budget("A"), 3);
  EXPECT_EQ(c.chain_budget("B"), 1);
}

// ---------------------------------------------------------------------------

TEST(Expression, ComparisonAst) {
  EXPECT_EQ(to_sexpr(compile_expression("output.confidence >= 0.7")), "(ge output.confidence 0.7)");
}

TEST(Expression, CrossFieldAst) {
  auto ast = compile_expression("cost.total <= budget.limit * 1.1");
  EXPECT_EQ(to_sexpr(ast), "(le cost.total (* budget.limit 1.1))");
  auto f = referenced_fields(ast);
  std::sort(f.begin(), f.end());
  EXPECT_EQ(f, (std::vector<std::string>{"budget.limit", "cost.total"}));
}

TEST(Expression, ForbiddenConstructs) {
  EXPECT_THROW(compile_expression("__import__('os')"), ForbiddenConstruct);
  EXPECT_THROW(compile_expression("exec('x')"), ExprError);
  EXPECT_THROW(compile_expression("while x"), ExprError);
  EXPECT_THROW(compile_expression("lambda: 1"), ExprError);
}

TEST(Expression, SyntaxErrors) {
  EXPECT_THROW(compile_expression("x >"), ExprSyntaxError);
  EXPECT_THROW(compile_expression("(x > 1"), ExprSyntaxError);
  EXPECT_THROW(compile_expression(""), ExprSyntaxError);
}

TEST(Expression, DepthCap) {
  std::string deep(100, '(');
  deep += "1";
  deep += std::string(100, ')');
  EXPECT_THROW(compile_expression(deep), ExprError);
  std::string ok(20, '(');
  ok += "1";
  ok += std::string(20, ')');
  EXPECT_NO_THROW(compile_expression(ok + " == 1"));
}

TEST(Expression, Evaluation) {
  auto gt = compile_expression("x > 1");
  EXPECT_TRUE(eval_expression(gt, json{{"x", 2}}));
  EXPECT_FALSE(eval_expression(gt, json{{"x", 1}}));
  EXPECT_THROW(eval_expression(gt, json::object()), FieldResolutionError);
  EXPECT_TRUE(eval_expression(compile_expression("len(items) == 3"), json{{"items", {"a", "b", "c"}}}));
  EXPECT_TRUE(eval_expression(compile_expression("abs(-2) + min(1, 4) * max(2, 3) == 5"), json::object()));
  EXPECT_TRUE(eval_expression(compile_expression("not (a and b) or c"), json{{"a", true}, {"b", false}, {"c", false}}));
  EXPECT_TRUE(eval_expression(compile_expression("'x' in tags"), json{{"tags", {"x", "y"}}}));
}

TEST(Expression, ActionAndStateViews) {
  ActionRecord a{"recommend", {{"amount", 50}}};
  json s = {{"limit", 100}};
  EXPECT_TRUE(eval_expression(compile_expression("action.amount <= state.limit"), s, &a));
  EXPECT_TRUE(eval_expression(compile_expression("action.label == 'recommend'"), s, &a));
  EXPECT_TRUE(eval_expression(compile_expression("action.amount < limit"), s, &a));
}

TEST(Expression, TypeMismatch) {
  EXPECT_THROW(eval_expression(compile_expression("name < 3"), json{{"name", "bob"}}), TypeMismatch);
  EXPECT_THROW(eval_expression(compile_expression("a < b"), json{{"a", "x"}, {"b", "y"}}), TypeMismatch);
}

TEST(Expression, MissingFieldFailsClosed) {
  auto c = fx::make("e", Section::invariant, Severity::hard, Predicate::expression("x > 1"));
  json empty = json::object();
  auto r = evaluate_constraint(c, EvalView(empty, nullptr));
  EXPECT_FALSE(r.satisfied);
  EXPECT_FALSE(r.skipped);
  ASSERT_TRUE(r.detail);
  EXPECT_NE(r.detail->find("missing field"), std::string::npos);

  c.on_missing = OnMissing::skip;
  EXPECT_TRUE(evaluate_constraint(c, EvalView(empty, nullptr)).skipped);
  c.on_missing = OnMissing::satisfy;
  EXPECT_TRUE(evaluate_constraint(c, EvalView(empty, nullptr)).satisfied);
}

TEST(FieldCheck, OperatorSemantics) {
  json s = {{"n", 5}, {"s", "hello world"}, {"l", "a"}};
  auto chk = [&](Operator op, json v, std::string f = "n") {
    return evaluate_constraint(fx::make("c", Section::invariant, Severity::hard, Predicate::field(f, op, v)), EvalView(s, nullptr))
        .satisfied;
  };
  EXPECT_TRUE(chk(Operator::eq, 5));
  EXPECT_TRUE(chk(Operator::ne, 4));
  EXPECT_TRUE(chk(Operator::lt, 6));
  EXPECT_TRUE(chk(Operator::le, 5));
  EXPECT_TRUE(chk(Operator::gt, 4));
  EXPECT_TRUE(chk(Operator::ge, 5));
  EXPECT_TRUE(chk(Operator::range, {5, 6}));
  EXPECT_FALSE(chk(Operator::range, {6, 7}));
  EXPECT_TRUE(chk(Operator::in, {"a", "b"}, "l"));
  EXPECT_TRUE(chk(Operator::not_in, {"b"}, "l"));
  EXPECT_TRUE(chk(Operator::matches, "o w", "s"));  // search, not full match
  EXPECT_FALSE(chk(Operator::matches, "^world", "s"));
  EXPECT_TRUE(chk(Operator::exists, true));
  EXPECT_TRUE(chk(Operator::exists, false, "missing"));
}

// ---------------------------------------------------------------------------

TEST(Parser, FinancialAdvisorDocument) {
  auto c = load_contract_file(fx::data_dir() / "contracts/financial_advisor.yaml");
  EXPECT_EQ(c.kind, ContractKind::agent);
  EXPECT_EQ(c.preconditions.size(), 1u);
  EXPECT_GE(c.invariants_hard.size(), 1u);
  ASSERT_GE(c.invariants_soft.size(), 1u);
  EXPECT_TRUE(c.invariants_soft[0].recovery.has_value());
  EXPECT_GE(c.governance_hard.size(), 1u);
  EXPECT_TRUE(validate_contract(c).empty());
  EXPECT_EQ(c.satisfaction.k, 3u);
  EXPECT_DOUBLE_EQ(c.drift.w_c, 0.6);
  EXPECT_EQ(c.chain_budget("re_ask_model"), 3);
}

TEST(Parser, MissingKindIsSchemaError) {
  try {
    parse_contract("contractspec: '1.0'\nname: x\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("kind"), std::string::npos);
  }
}

TEST(Parser, ProbabilityOutOfRange) {
  try {
    parse_contract("contractspec: '1.0'\nkind: agent\nname: x\nsatisfaction: {p: 1.3}\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("p out of [0,1]"), std::string::npos);
    EXPECT_EQ(e.span().line, 4u);
  }
}

TEST(Parser, SyntaxAndSemanticErrors) {
  EXPECT_THROW(parse_contract("a: [1, 2\n"), SyntaxError);
  const std::string dangling = R"(contractspec: "1.0"
kind: agent
name: x
invariants:
  soft:
    - name: tone
      check: {field: tone, operator: ge, value: 0.5}
      recovery: fix-tone
)";
  EXPECT_THROW(parse_contract(dangling), SemanticError);
  auto res = parse_contract_diagnostics(dangling);
  ASSERT_EQ(res.diagnostics.size(), 1u);
  EXPECT_EQ(res.diagnostics[0].kind, "SemanticError");
  EXPECT_EQ(res.diagnostics[0].span.line, 6u);
}

TEST(Parser, UnknownKeyIsSchemaError) {
  EXPECT_THROW(parse_contract("contractspec: '1.0'\nkind: agent\nname: x\nbogus: 1\n"), SchemaError);
  EXPECT_THROW(parse_contract("contractspec: '1.0'\nkind: agent\nname: x\ninvariants:\n  hard:\n    - name: a\n      check: {field: x, operator: approx, value: 1}\n"),
               SchemaError);
}

TEST(Parser, DeterministicAndRoundTrips) {
  const auto text = read_text_file(fx::data_dir() / "contracts/financial_advisor.yaml");
  auto a = parse_contract(text), b = parse_contract(text);
  EXPECT_EQ(a, b);
  auto again = parse_contract(to_yaml(a));
  EXPECT_EQ(a, again);
}

TEST(Parser, RoundTripsGeneratedContracts) {
  for (const auto& entry : std::filesystem::directory_iterator(fx::data_dir() / "bench/contracts")) {
    const auto text = read_text_file(entry.path());
    if (document_kind(text) != "agent") continue;
    auto c = parse_contract(text);
    EXPECT_EQ(c, parse_contract(to_yaml(c))) << entry.path();
  }
}

TEST(Parser, FuzzedInputsNeverCrash) {
  const auto seed = read_text_file(fx::data_dir() / "contracts/financial_advisor.yaml");
  std::mt19937_64 rng(7);
  int parsed = 0, rejected = 0;
  for (int i = 0; i < 300; ++i) {
    std::string s = seed;
    std::uniform_int_distribution<std::size_t> pos(0, s.size() - 1);
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits; ++e) {
      switch (rng() % 3) {
        case 0: s[pos(rng)] = static_cast<char>(rng() % 256); break;
        case 1: s.erase(pos(rng) % s.size(), 1 + rng() % 10); break;
        default: s.insert(pos(rng) % s.size(), std::string(1 + rng() % 4, "[{:-'\"\n#&*!|>"[rng() % 14])); break;
      }
    }
    try {
      parse_contract(s);
      ++parsed;
    } catch (const ParseError&) {
      ++rejected;
    }
  }
  EXPECT_EQ(parsed + rejected, 300);
  // pathological nesting hits the depth cap instead of the stack
  std::string deep = "contractspec: '1.0'\nkind: agent\nname: x\ndescription: " + std::string(5000, '[') + "\n";
  EXPECT_THROW(parse_contract(deep), ParseError);
}

TEST(Parser, PipelineDocuments) {
  auto p = load_pipeline_file(fx::data_dir() / "bench/pipelines/loan_pipeline.yaml");
  EXPECT_EQ(p.stages.size(), 3u);
  EXPECT_EQ(p.handoffs.size(), 2u);
  EXPECT_EQ(p.stages[0].name, "intake");
  EXPECT_FALSE(p.governance_hard.empty());
  EXPECT_THROW(parse_contract(read_text_file(fx::data_dir() / "bench/pipelines/loan_pipeline.yaml")), SchemaError);
}

// ---------------------------------------------------------------------------

TEST(JsonIo, TraceRoundTrip) {
  auto tr = load_trace_file(fx::data_dir() / "traces/financial_soft_recovered.json");
  EXPECT_EQ(tr.length(), 6u);
  json j = tr;
  EXPECT_EQ(trace_from_json(j), tr);
  EXPECT_THROW(trace_from_json(json{{"states", {json::object()}}, {"actions", {"a"}}}), FormatError);
}

TEST(JsonIo, SessionReportRoundTrip) {
  auto c = load_contract_file(fx::data_dir() / "contracts/financial_advisor.yaml");
  auto tr = load_trace_file(fx::data_dir() / "traces/financial_hard_breach.json");
  auto rep = run_session(c, tr);
  json j = rep;
  SessionReport back = j.get<SessionReport>();
  EXPECT_EQ(json(back), j);
  EXPECT_EQ(back.outcome, rep.outcome);
  EXPECT_EQ(back.metrics, rep.metrics);
  EXPECT_EQ(back.events, rep.events);
  for (const char* k : {"contract", "steps", "events", "metrics", "verdicts"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(JsonIo, SprtStateRoundTrip) {
  SprtConfig cfg;
  auto s = sprt_update(sprt_start(cfg), cfg, true);
  json j = s;
  for (const char* k : {"n", "log_lambda", "decision", "boundaries"}) EXPECT_TRUE(j.contains(k));
  EXPECT_EQ(j.get<SprtState>(), s);
}
