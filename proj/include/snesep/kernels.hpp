#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "snesep/core.hpp"

namespace snesep {

enum class KernelFamily { gaussian, cauchy, exponential };

/// A decreasing positive profile f for the output affinities, together with
/// the constants that witness its admissibility: f(x) >= alpha exp(-beta x^2)
/// and an upper bound on sum_{k>=1} f(k).
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double rate = 1.0;  // exponential only
  double minorant_alpha = 1.0;
  double minorant_beta = 1.0;
  double tail_sum_bound = 0.0;

  static KernelSpec gaussian();
  static KernelSpec cauchy();
  static KernelSpec exponential(double rate);

  std::string name() const;
};

namespace detail {

inline double gaussian_tail_bound() {
  // sum_{k>10} e^{-k^2} <= e^{-121} / (1 - e^{-1})
  double s = 0.0;
  for (int k = 1; k <= 10; ++k) s += std::exp(-double(k) * k);
  return s + std::exp(-121.0) / (1.0 - std::exp(-1.0));
}

inline double cauchy_tail_bound() {
  // sum_{k>K} 1/(1+k^2) <= pi/2 - atan(K)
  constexpr int K = 100000;
  double s = 0.0;
  for (int k = K; k >= 1; --k) s += 1.0 / (1.0 + double(k) * k);
  return s + (std::numbers::pi / 2.0 - std::atan(double(K)));
}

inline double exponential_tail_bound(double rate) { return 1.0 / std::expm1(rate); }

inline void check_radius(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw ValidationError("kernel: radius must be finite and nonnegative");
  }
}

}  // namespace detail

inline KernelSpec KernelSpec::gaussian() {
  return {KernelFamily::gaussian, 1.0, 1.0, 1.0, detail::gaussian_tail_bound()};
}

inline KernelSpec KernelSpec::cauchy() {
  // e^{1+x^2} >= 1+x^2, so 1/(1+x^2) >= e^{-1} e^{-x^2}.
  return {KernelFamily::cauchy, 1.0, std::exp(-1.0), 1.0, detail::cauchy_tail_bound()};
}

inline KernelSpec KernelSpec::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ValidationError("exponential kernel: rate must be positive");
  }
  // rate*x <= rate/4 + rate*x^2, so e^{-rate x} >= e^{-rate/4} e^{-rate x^2}.
  return {KernelFamily::exponential, rate, std::exp(-rate / 4.0), rate,
          detail::exponential_tail_bound(rate)};
}

inline std::string KernelSpec::name() const {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::cauchy:
      return "cauchy";
    case KernelFamily::exponential: {
      std::string s = std::to_string(rate);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return "exp:" + s;
    }
  }
  return "unknown";
}

/// Parses `gaussian`, `cauchy` or `exp:<alpha>`.
inline KernelSpec parse_kernel(std::string_view text) {
  if (text == "gaussian") return KernelSpec::gaussian();
  if (text == "cauchy") return KernelSpec::cauchy();
  if (text.starts_with("exp:")) {
    const std::string arg(text.substr(4));
    std::size_t used = 0;
    double rate = 0.0;
    try {
      rate = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size()) {
      throw ValidationError("kernel: cannot parse rate in '" + std::string(text) + "'");
    }
    return KernelSpec::exponential(rate);
  }
  throw ValidationError("kernel: unknown family '" + std::string(text) +
                        "' (expected gaussian, cauchy or exp:<alpha>)");
}

inline double evaluate(const KernelSpec& kern, double r) {
  detail::check_radius(r);
  switch (kern.family) {
    case KernelFamily::gaussian:
      return std::exp(-r * r);
    case KernelFamily::cauchy:
      return 1.0 / (1.0 + r * r);
    case KernelFamily::exponential:
      return std::exp(-kern.rate * r);
  }
  return 0.0;
}

inline double evaluate_derivative(const KernelSpec& kern, double r) {
  detail::check_radius(r);
  switch (kern.family) {
    case KernelFamily::gaussian:
      return -2.0 * r * std::exp(-r * r);
    case KernelFamily::cauchy: {
      const double u = 1.0 + r * r;
      return -2.0 * r / (u * u);
    }
    case KernelFamily::exponential:
      return -kern.rate * std::exp(-kern.rate * r);
  }
  return 0.0;
}

/// log f as a function of the squared distance; never underflows.
inline double log_kernel_sq(const KernelSpec& kern, double r2) {
  switch (kern.family) {
    case KernelFamily::gaussian:
      return -r2;
    case KernelFamily::cauchy:
      return -std::log1p(r2);
    case KernelFamily::exponential:
      return -kern.rate * std::sqrt(r2);
  }
  return 0.0;
}

/// f'(r) / (r f(r)) as a function of r^2, the radial weight of the loss
/// gradient. Returns false for exponential at r = 0, where the weight is
/// undefined.
inline bool radial_weight_sq(const KernelSpec& kern, double r2, double& w) {
  switch (kern.family) {
    case KernelFamily::gaussian:
      w = -2.0;
      return true;
    case KernelFamily::cauchy:
      w = -2.0 / (1.0 + r2);
      return true;
    case KernelFamily::exponential:
      if (r2 == 0.0) {
        w = 0.0;
        return false;
      }
      w = -kern.rate / std::sqrt(r2);
      return true;
  }
  w = 0.0;
  return false;
}

struct AdmissibilityEvidence {
  bool monotone_ok = false;
  bool minorant_ok = false;
  bool summable_ok = false;
  /// Grid point with the smallest f(x) - alpha e^{-beta x^2}.
  double minorant_worst_x = 0.0;
  double minorant_worst_slack = 0.0;
  int partial_terms = 0;
  double partial_sum = 0.0;
  double tail_bound = 0.0;

  double tail_sum_upper() const { return partial_sum + tail_bound; }
  bool passed() const { return monotone_ok && minorant_ok && summable_ok; }
};

/// Checks monotonicity and the gaussian minorant on `grid`, and bounds
/// sum_{k>=1} f(k) by a partial sum plus an analytic tail.
inline AdmissibilityEvidence admissibility(const KernelSpec& kern, const std::vector<double>& grid) {
  if (grid.size() < 2) throw ValidationError("admissibility: grid needs at least 2 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ValidationError("admissibility: grid must be increasing");
  }
  if (grid.front() < 0.0) throw ValidationError("admissibility: grid must be nonnegative");

  AdmissibilityEvidence ev;
  ev.monotone_ok = true;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    // Strict decrease is only demanded while f is a normal double; in the
    // subnormal range neighbouring grid points can round to the same value.
    const double f0 = evaluate(kern, grid[i - 1]);
    const double f1 = evaluate(kern, grid[i]);
    if (f1 > f0 || (f1 == f0 && f0 >= std::numeric_limits<double>::min())) ev.monotone_ok = false;
  }

  ev.minorant_ok = true;
  ev.minorant_worst_slack = std::numeric_limits<double>::infinity();
  for (double x : grid) {
    const double slack =
        evaluate(kern, x) - kern.minorant_alpha * std::exp(-kern.minorant_beta * x * x);
    if (slack < ev.minorant_worst_slack) {
      ev.minorant_worst_slack = slack;
      ev.minorant_worst_x = x;
    }
    // Relative tolerance for rounding in the two exponentials.
    if (slack < -1e-14 * evaluate(kern, x)) ev.minorant_ok = false;
  }

  switch (kern.family) {
    case KernelFamily::gaussian: {
      ev.partial_terms = 10;
      for (int k = ev.partial_terms; k >= 1; --k) ev.partial_sum += evaluate(kern, k);
      const double K1 = ev.partial_terms + 1.0;
      ev.tail_bound = std::exp(-K1 * K1) / (1.0 - std::exp(-1.0));
      break;
    }
    case KernelFamily::cauchy: {
      ev.partial_terms = 100000;
      for (int k = ev.partial_terms; k >= 1; --k) ev.partial_sum += evaluate(kern, k);
      ev.tail_bound = std::numbers::pi / 2.0 - std::atan(double(ev.partial_terms));
      break;
    }
    case KernelFamily::exponential: {
      ev.partial_terms = 50;
      for (int k = ev.partial_terms; k >= 1; --k) ev.partial_sum += evaluate(kern, k);
      ev.tail_bound = std::exp(-kern.rate * (ev.partial_terms + 1.0)) / -std::expm1(-kern.rate);
      break;
    }
  }
  ev.summable_ok = std::isfinite(ev.tail_sum_upper()) && ev.tail_bound >= 0.0;
  return ev;
}

/// Evenly spaced grid on [0, r_max] with `points` entries.
inline std::vector<double> linear_grid(double r_max, std::size_t points) {
  if (points < 2) throw ValidationError("linear_grid: need at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = r_max * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

}  // namespace snesep
