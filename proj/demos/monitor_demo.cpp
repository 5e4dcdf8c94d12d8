// Builds a small two-predicate signal, then monitors a formula on it and
// prints satisfaction and robustness at every time step.

#include "svmstl/logic.hpp"

#include <iostream>

int main() {
  const svmstl::StSignal s = svmstl::StSignal::from_rows({
      {-1.0, 0.5},
      {0.2, 0.1},
      {1.5, -0.3},
      {2.0, -0.8},
      {0.7, -1.2},
      {-0.4, -0.9},
  });
  const auto phi = svmstl::parse_formula("F[0,2](h1 > 1) & G[0,3](h2 <= 0.5)");
  std::cout << "formula: " << svmstl::unparse(phi) << "\n";
  for (std::size_t k = 0; k + svmstl::horizon(phi) < s.steps(); ++k) {
    std::cout << "k=" << k << " satisfied=" << (svmstl::satisfies(s, phi, k) ? "true" : "false")
              << " robustness=" << svmstl::robustness(s, phi, k) << "\n";
  }
}
