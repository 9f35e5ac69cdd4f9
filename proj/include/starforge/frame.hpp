#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/matrix.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// Up to n = 4, i.e. eight fiber and eight base variables.
inline constexpr int kMaxVars = 8;

using MultiIndex = std::array<std::uint8_t, kMaxVars>;

inline int order(const MultiIndex& a) {
  int s = 0;
  for (auto x : a) s += x;
  return s;
}

enum class LambdaConvention { def41, appendix62, explicit_matrix };

inline std::string to_string(LambdaConvention c) {
  switch (c) {
    case LambdaConvention::def41: return "def41";
    case LambdaConvention::appendix62: return "appendix62";
    default: return "explicit";
  }
}

// One term c * xi^alpha * eta^beta of (Lambda^{ij} xi_i eta_j)^k / k!.
struct BidiffTerm {
  MultiIndex alpha{};
  MultiIndex beta{};
  Rational coeff;
};

// Constant Poisson matrix Lambda of the fiber CCR together with omega = Lambda^{-1}.
class SymplecticFrame {
 public:
  static SymplecticFrame def41(int n) {
    RatMatrix l(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
      l(i, n + i) = -1;
      l(n + i, i) = 1;
    }
    return SymplecticFrame(n, std::move(l), LambdaConvention::def41);
  }

  static SymplecticFrame appendix62(int n) {
    RatMatrix l(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
      l(i, n + i) = 1;
      l(n + i, i) = -1;
    }
    return SymplecticFrame(n, std::move(l), LambdaConvention::appendix62);
  }

  static SymplecticFrame from_lambda(const RatMatrix& lambda) {
    if (!lambda.square() || lambda.rows() % 2 != 0 || lambda.rows() == 0)
      throw DimensionMismatch("lambda must be a non-empty 2n x 2n matrix");
    return SymplecticFrame(lambda.rows() / 2, lambda, LambdaConvention::explicit_matrix);
  }

  static SymplecticFrame make(int n, LambdaConvention c) {
    return c == LambdaConvention::appendix62 ? appendix62(n) : def41(n);
  }

  int dim_n() const { return n_; }
  int vars() const { return 2 * n_; }
  const RatMatrix& lambda() const { return lambda_; }
  const RatMatrix& omega() const { return omega_; }
  const Rational& lambda(int i, int j) const { return lambda_(i, j); }
  const Rational& omega(int i, int j) const { return omega_(i, j); }
  LambdaConvention convention() const { return convention_; }

  bool operator==(const SymplecticFrame& o) const { return lambda_ == o.lambda_; }

  // Terms of (Lambda^{ij} xi_i eta_j)^k / k!, cached per frame and shared between copies.
  const std::vector<BidiffTerm>& bidiff(int k) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto& levels = cache_->levels;
    if (levels.empty()) levels.push_back({BidiffTerm{{}, {}, Rational(1)}});
    while (static_cast<int>(levels.size()) <= k) {
      const int next = static_cast<int>(levels.size());
      std::map<std::pair<MultiIndex, MultiIndex>, Rational> acc;
      for (const auto& t : levels.back())
        for (int i = 0; i < vars(); ++i)
          for (int j = 0; j < vars(); ++j) {
            if (lambda_(i, j) == 0) continue;
            auto a = t.alpha;
            auto b = t.beta;
            ++a[i];
            ++b[j];
            acc[{a, b}] += t.coeff * lambda_(i, j) / next;
          }
      std::vector<BidiffTerm> level;
      for (auto& [key, c] : acc)
        if (c != 0) level.push_back(BidiffTerm{key.first, key.second, c});
      levels.push_back(std::move(level));
    }
    return levels[static_cast<std::size_t>(k)];
  }

 private:
  struct Cache {
    std::mutex mu;
    std::deque<std::vector<BidiffTerm>> levels;
  };

  SymplecticFrame(int n, RatMatrix lambda, LambdaConvention c)
      : n_(n), lambda_(std::move(lambda)), convention_(c), cache_(std::make_shared<Cache>()) {
    if (2 * n_ > kMaxVars) throw DimensionMismatch("dim_n above 4 is not supported");
    if (!lambda_.is_antisymmetric()) throw DomainError("lambda must be antisymmetric");
    omega_ = lambda_.inverse();
  }

  int n_;
  RatMatrix lambda_;
  RatMatrix omega_;
  LambdaConvention convention_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace starforge
