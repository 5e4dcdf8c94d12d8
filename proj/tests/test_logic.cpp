#include "oracles/stl_oracle.hpp"
#include "support/generators.hpp"

#include "svmstl/logic.hpp"

#include <gtest/gtest.h>

#include <cfloat>

using namespace svmstl;

namespace {

StSignal two_dim() {
  return StSignal::from_rows({{0.0, 1.0}, {1.0, 0.5}, {3.0, -1.0}, {2.0, -2.0}, {-1.0, 0.0}});
}

} // namespace

TEST(LogicParse, AtomsAndOperators) {
  const Formula f = parse_formula("G[0,2](h1 > 0.5) & !F[1,3](h2 <= -1)");
  ASSERT_EQ(f.kind, NodeKind::conjunction);
  ASSERT_EQ(f.children.size(), 2u);
  EXPECT_EQ(f.children[0].kind, NodeKind::always);
  EXPECT_EQ(f.children[0].lo, 0u);
  EXPECT_EQ(f.children[0].hi, 2u);
  EXPECT_EQ(f.children[0].children[0].predicate, 1u);
  EXPECT_EQ(f.children[0].children[0].comparison, Comparison::greater);
  EXPECT_DOUBLE_EQ(f.children[0].children[0].threshold, 0.5);
  EXPECT_EQ(f.children[1].kind, NodeKind::negation);
  EXPECT_EQ(f.children[1].children[0].kind, NodeKind::eventually);
}

TEST(LogicParse, PrecedenceAndBindsTighterThanOr) {
  const Formula f = parse_formula("h1 > 0 | h2 > 0 & h3 <= 1");
  ASSERT_EQ(f.kind, NodeKind::disjunction);
  EXPECT_EQ(f.children[1].kind, NodeKind::conjunction);
}

TEST(LogicParse, HalfOpenWindowIsClosedOneShorter) {
  const Formula f = parse_formula("F[2,6)(h1 > 0)");
  EXPECT_EQ(f.lo, 2u);
  EXPECT_EQ(f.hi, 5u);
}

TEST(LogicParse, RejectsUnsupportedComparisons) {
  EXPECT_THROW(parse_formula("h1 < 0"), ParseError);
  EXPECT_THROW(parse_formula("h1 >= 0"), ParseError);
}

TEST(LogicParse, RejectsEmptyWindowAndBadSyntax) {
  EXPECT_THROW(parse_formula("G[5,3](h1 > 0)"), ParseError);
  EXPECT_THROW(parse_formula("G[0,3](h1 > 0"), ParseError);
  EXPECT_THROW(parse_formula("h0 > 1"), ParseError);
  EXPECT_THROW(parse_formula(""), ParseError);
  EXPECT_THROW(parse_formula("h1 > $r"), ParseError);
}

TEST(LogicParse, ErrorReportsPosition) {
  try {
    parse_formula("G[0,2](h1 > 0) & ?");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("position"), std::string::npos);
  }
}

TEST(LogicParse, UnparseRoundTripsRandomFormulas) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Formula f = gen::formula(rng, 3, 3, 10, true);
    const std::string text = unparse(f);
    EXPECT_EQ(parse_formula(text), f) << text;
    EXPECT_EQ(unparse(parse_formula(text)), text);
  }
}

TEST(LogicParse, WeightedOperators) {
  const Formula f = parse_formula("AND{1,3}(h1 > 0; G[0,1](h2 <= 1))");
  ASSERT_EQ(f.kind, NodeKind::weighted_and);
  EXPECT_EQ(f.weights, (std::vector<double>{1, 3}));
  EXPECT_TRUE(is_weighted(f));
  EXPECT_THROW(parse_formula("AND{1}(h1 > 0; h2 > 0)"), ParseError);
  EXPECT_THROW(parse_formula("OR{-1,1}(h1 > 0; h2 > 0)"), ParseError);
}

TEST(LogicStructure, HorizonAndMaxPredicate) {
  const Formula f = parse_formula("G[1,3](F[0,2](h2 > 0)) | h4 <= 1");
  EXPECT_EQ(horizon(f), 5u);
  EXPECT_EQ(max_predicate(f), 4u);
}

TEST(LogicTemplates, InstantiatePrimitive) {
  const auto tpl = primitive_template(PrimitiveKind::always);
  Valuation theta{{"a", 19.0}, {"b", 49.0}, {"j", 1.0}, {"cmp", Comparison::less_equal}, {"r", -4.0}};
  EXPECT_EQ(unparse(instantiate(tpl, theta)), "G[19,49](h1 <= -4)");
}

TEST(LogicTemplates, UnboundAndInvalidParameters) {
  const auto tpl = primitive_template(PrimitiveKind::eventually);
  Valuation theta{{"a", 0.0}, {"b", 3.0}, {"j", 1.0}, {"cmp", Comparison::greater}};
  try {
    instantiate(tpl, theta);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'r'"), std::string::npos);
  }
  theta["r"] = 0.5;
  theta["a"] = 4.0;
  EXPECT_THROW(instantiate(tpl, theta), ConfigError);
  theta["a"] = 1.5;
  EXPECT_THROW(instantiate(tpl, theta), ConfigError);
}

TEST(LogicSemantics, HandComputedValues) {
  const StSignal s = two_dim();
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("h1 > 0.5"), 1), 0.5);
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("h2 <= 0"), 0), -1.0);
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("F[0,3](h1 > 2)"), 0), 1.0);
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("G[1,3](h1 > 0.5)"), 0), 0.5);
  EXPECT_TRUE(satisfies(s, parse_formula("G[1,3](h1 > 0.5)"), 0));
  EXPECT_FALSE(satisfies(s, parse_formula("G[0,3](h1 > 0.5)"), 0));
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("TRUE"), 0), DBL_MAX);
  EXPECT_DOUBLE_EQ(robustness(s, parse_formula("FALSE"), 0), -DBL_MAX);
}

TEST(LogicSemantics, StrictAndNonStrictBoundaries) {
  const StSignal s = StSignal::from_rows({{1.0}});
  EXPECT_FALSE(satisfies(s, parse_formula("h1 > 1"), 0));
  EXPECT_TRUE(satisfies(s, parse_formula("h1 <= 1"), 0));
  EXPECT_EQ(robustness(s, parse_formula("h1 > 1"), 0), 0.0);
}

TEST(LogicSemantics, HorizonAndShapeErrors) {
  const StSignal s = two_dim();
  EXPECT_THROW(robustness(s, parse_formula("G[0,5](h1 > 0)"), 0), HorizonError);
  EXPECT_THROW(satisfies(s, parse_formula("G[0,2](h1 > 0)"), 3), HorizonError);
  EXPECT_THROW(robustness(s, parse_formula("h3 > 0"), 0), ShapeError);
  EXPECT_NO_THROW(robustness(s, parse_formula("G[0,4](h1 > 0)"), 0));
}

TEST(LogicSemantics, AgreesWithRecursiveOracle) {
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const Formula f = gen::formula(rng, 3, 2, 10, true);
    const std::size_t H = horizon(f);
    const std::size_t T = H + rng.index(10 - H + 1);
    const StSignal s = gen::signal(rng, T + 1, 2, i % 2 == 0);
    const auto trace = robustness_trace(s, f);
    for (std::size_t k = 0; k + H <= T; ++k) {
      const double expected = oracle::rho(s, f, k);
      EXPECT_NEAR(trace[k], expected, 1e-12) << unparse(f);
      EXPECT_EQ(satisfies(s, f, k), oracle::sat(s, f, k)) << unparse(f);
      EXPECT_NEAR(robustness_weighted(s, f, k), oracle::rho(s, f, k, true), 1e-12) << unparse(f);
    }
  }
}

TEST(LogicSemantics, RobustnessSignMatchesSatisfaction) {
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    const Formula f = gen::formula(rng, 3, 2, 8);
    const StSignal s = gen::signal(rng, 9, 2, true);
    const double r = robustness(s, f, 0);
    if (r > 1e-9) {
      EXPECT_TRUE(satisfies(s, f, 0)) << unparse(f);
    } else if (r < -1e-9) {
      EXPECT_FALSE(satisfies(s, f, 0)) << unparse(f);
    }
  }
}

TEST(LogicSemantics, NegationFlipsRobustness) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Formula f = gen::formula(rng, 2, 2, 6);
    const StSignal s = gen::signal(rng, 7, 2, true);
    EXPECT_EQ(robustness(s, Formula::negation(f), 0), -robustness(s, f, 0));
  }
}

TEST(LogicSemantics, WeightedUnitWeightsMatchUnweighted) {
  const StSignal s = two_dim();
  const Formula w = parse_formula("AND{2,2}(h1 > 0; h2 <= 0.75)");
  const Formula u = parse_formula("h1 > 0 & h2 <= 0.75");
  EXPECT_DOUBLE_EQ(robustness_weighted(s, w, 1), robustness(s, u, 1));
  // Weights rescale to mean 1: AND{1,3} -> (0.5, 1.5).
  const Formula w2 = parse_formula("AND{1,3}(h1 > 0; h2 <= 0.75)");
  EXPECT_DOUBLE_EQ(robustness_weighted(s, w2, 1), std::min(0.5 * 1.0, 1.5 * 0.25));
}
