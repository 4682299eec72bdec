#ifndef JKOLAB_QUANTILE1D_HPP
#define JKOLAB_QUANTILE1D_HPP

// One-dimensional measures represented by their quantile function sampled at
// the cell midpoints u_k = (k - 1/2)/M. In this representation W2 is the
// scaled Euclidean distance between value vectors and the optimal transport
// map is quantile matching.

#include "jkolab/normal.hpp"
#include "jkolab/objective.hpp"
#include "jkolab/types.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace jkolab {

inline constexpr Eigen::Index kMinGridSize = 8;

template <typename Scalar>
class QuantileGrid {
 public:
  QuantileGrid() = default;

  explicit QuantileGrid(Vec<Scalar> values) : values_(std::move(values)) {
    require(values_.size() >= kMinGridSize,
            "QuantileGrid: need at least " + std::to_string(kMinGridSize) + " values");
    require(values_.allFinite(), "QuantileGrid: non-finite value");
    for (Eigen::Index k = 1; k < values_.size(); ++k) {
      if (!(values_(k) > values_(k - 1)))
        throw PreconditionError("QuantileGrid: values not strictly increasing at index " +
                                std::to_string(k));
    }
  }

  Eigen::Index size() const { return values_.size(); }
  const Vec<Scalar>& values() const { return values_; }
  Scalar operator[](Eigen::Index k) const { return values_(k); }

  /// Quantile level of cell k (0-based): (k + 1/2)/M.
  Scalar level(Eigen::Index k) const {
    return (static_cast<Scalar>(k) + Scalar(0.5)) / static_cast<Scalar>(size());
  }

  bool operator==(const QuantileGrid& o) const {
    return size() == o.size() && values_ == o.values_;
  }

 private:
  Vec<Scalar> values_;
};

/// Piecewise-linear increasing map through knots (x_k, y_k), extended
/// linearly with the two boundary slopes.
template <typename Scalar>
class MonotoneMap1D {
 public:
  MonotoneMap1D() = default;

  MonotoneMap1D(Vec<Scalar> x, Vec<Scalar> y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.size() == y_.size() && x_.size() >= 2, "MonotoneMap1D: need >= 2 matching knots");
    require(x_.allFinite() && y_.allFinite(), "MonotoneMap1D: non-finite knot");
    for (Eigen::Index k = 1; k < x_.size(); ++k) {
      if (!(x_(k) > x_(k - 1)) || !(y_(k) > y_(k - 1)))
        throw PreconditionError("MonotoneMap1D: knots not strictly increasing at index " +
                                std::to_string(k));
      const Scalar s = slope(k - 1);
      require(std::isfinite(static_cast<double>(s)) && s > Scalar(0),
              "MonotoneMap1D: degenerate segment slope");
    }
  }

  const Vec<Scalar>& x() const { return x_; }
  const Vec<Scalar>& y() const { return y_; }
  Eigen::Index knot_count() const { return x_.size(); }

  Scalar slope(Eigen::Index segment) const {
    return (y_(segment + 1) - y_(segment)) / (x_(segment + 1) - x_(segment));
  }

  Scalar operator()(Scalar t) const {
    const Eigen::Index n = x_.size();
    const Scalar* first = x_.data();
    const Scalar* it = std::lower_bound(first, first + n, t);
    const Eigen::Index j = it - first;
    if (j < n && *it == t) return y_(j);  // knots map exactly
    if (j == 0) return y_(0) + slope(0) * (t - x_(0));
    if (j == n) return y_(n - 1) + slope(n - 2) * (t - x_(n - 1));
    return y_(j - 1) + slope(j - 1) * (t - x_(j - 1));
  }

  Vec<Scalar> operator()(const Vec<Scalar>& t) const {
    return t.unaryExpr([this](Scalar v) { return (*this)(v); });
  }

  bool operator==(const MonotoneMap1D& o) const { return x_ == o.x_ && y_ == o.y_; }

 private:
  Vec<Scalar> x_;
  Vec<Scalar> y_;
};

namespace detail {
inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a != b) throw PreconditionError(std::string(op) + ": grid sizes differ");
}
}  // namespace detail

/// mean + sd * Φ⁻¹(u_k); no lower bound on M (used for raw quantile tables).
template <typename Scalar>
Vec<Scalar> gaussian_quantiles(Scalar mean, Scalar sd, Eigen::Index m) {
  require(sd > Scalar(0), "gaussian_quantiles: sd must be positive");
  require(m > 0, "gaussian_quantiles: M must be positive");
  Vec<Scalar> q(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Scalar u = (static_cast<Scalar>(k) + Scalar(0.5)) / static_cast<Scalar>(m);
    q(k) = mean + sd * normal_quantile(u);
  }
  return q;
}

template <typename Scalar>
QuantileGrid<Scalar> from_gaussian(Scalar mean, Scalar sd, Eigen::Index m) {
  require(sd > Scalar(0), "from_gaussian: sd must be positive");
  require(m >= kMinGridSize, "from_gaussian: M too small");
  return QuantileGrid<Scalar>(gaussian_quantiles(mean, sd, m));
}

/// Quantile grid of the normal mixture Σ w_i N(mean_i, sd_i²), inverting the
/// mixture CDF by bisection to x_tol.
template <typename Scalar>
QuantileGrid<Scalar> from_mixture(std::span<const Scalar> weights, std::span<const Scalar> means,
                                  std::span<const Scalar> sds, Eigen::Index m,
                                  Scalar x_tol = Scalar(1e-12)) {
  require(!weights.empty() && weights.size() == means.size() && weights.size() == sds.size(),
          "from_mixture: component arrays must be non-empty and equal length");
  require(m >= kMinGridSize, "from_mixture: M too small");
  Scalar total = 0;
  Scalar lo = std::numeric_limits<Scalar>::max(), hi = std::numeric_limits<Scalar>::lowest();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] > Scalar(0) && sds[i] > Scalar(0), "from_mixture: bad component");
    total += weights[i];
    lo = std::min(lo, means[i] - Scalar(40) * sds[i]);
    hi = std::max(hi, means[i] + Scalar(40) * sds[i]);
  }
  auto cdf = [&](Scalar x) {
    Scalar f = 0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      f += weights[i] * normal_cdf((x - means[i]) / sds[i]);
    return f / total;
  };
  Vec<Scalar> q(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Scalar u = (static_cast<Scalar>(k) + Scalar(0.5)) / static_cast<Scalar>(m);
    Scalar a = lo, b = hi;
    while (b - a > x_tol) {
      const Scalar mid = Scalar(0.5) * (a + b);
      if (mid <= a || mid >= b) break;
      (cdf(mid) < u ? a : b) = mid;
    }
    q(k) = Scalar(0.5) * (a + b);
  }
  return QuantileGrid<Scalar>(std::move(q));
}

template <typename Scalar>
Scalar w2(const QuantileGrid<Scalar>& p, const QuantileGrid<Scalar>& q) {
  detail::require_same_size(p.size(), q.size(), "w2");
  return std::sqrt((p.values() - q.values()).squaredNorm() / static_cast<Scalar>(p.size()));
}

/// Quantile matching; knots (Q_p,k, Q_q,k).
template <typename Scalar>
MonotoneMap1D<Scalar> ot_map(const QuantileGrid<Scalar>& p, const QuantileGrid<Scalar>& q) {
  detail::require_same_size(p.size(), q.size(), "ot_map");
  return MonotoneMap1D<Scalar>(p.values(), q.values());
}

template <typename Scalar>
MonotoneMap1D<Scalar> identity_map(const QuantileGrid<Scalar>& p) {
  return MonotoneMap1D<Scalar>(p.values(), p.values());
}

template <typename Scalar>
MonotoneMap1D<Scalar> invert_map(const MonotoneMap1D<Scalar>& t) {
  return MonotoneMap1D<Scalar>(t.y(), t.x());
}

template <typename Scalar>
QuantileGrid<Scalar> pushforward(const QuantileGrid<Scalar>& p, const MonotoneMap1D<Scalar>& t) {
  Vec<Scalar> v = t(p.values());
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (!(v(k) > v(k - 1)))
      throw PreconditionError("pushforward: map is not increasing over the support");
  }
  return QuantileGrid<Scalar>(std::move(v));
}

/// Max segment slope, boundary (extrapolation) slopes included.
template <typename Scalar>
Scalar lipschitz(const MonotoneMap1D<Scalar>& t) {
  Scalar best = 0;
  for (Eigen::Index s = 0; s + 1 < t.knot_count(); ++s) best = std::max(best, t.slope(s));
  return best;
}

template <typename Scalar>
Scalar min_slope(const MonotoneMap1D<Scalar>& t) {
  Scalar best = std::numeric_limits<Scalar>::max();
  for (Eigen::Index s = 0; s + 1 < t.knot_count(); ++s) best = std::min(best, t.slope(s));
  return best;
}

template <typename Scalar>
Scalar mean(const QuantileGrid<Scalar>& p) {
  return p.values().mean();
}

template <typename Scalar>
Scalar second_moment(const QuantileGrid<Scalar>& p) {
  return p.values().squaredNorm() / static_cast<Scalar>(p.size());
}

template <typename Scalar>
Scalar variance(const QuantileGrid<Scalar>& p) {
  const Scalar m = mean(p);
  return std::max(Scalar(0), second_moment(p) - m * m);
}

/// dQ/du at every u_k: centered differences, one-sided at the two ends.
template <typename Scalar>
Vec<Scalar> quantile_derivative(const QuantileGrid<Scalar>& p) {
  const Eigen::Index m = p.size();
  const Scalar mm = static_cast<Scalar>(m);
  const auto& q = p.values();
  Vec<Scalar> d(m);
  d(0) = mm * (q(1) - q(0));
  d(m - 1) = mm * (q(m - 1) - q(m - 2));
  for (Eigen::Index k = 1; k + 1 < m; ++k) d(k) = Scalar(0.5) * mm * (q(k + 1) - q(k - 1));
  return d;
}

/// Density values at the knots Q_k: 1 / (dQ/du).
template <typename Scalar>
Vec<Scalar> knot_density(const QuantileGrid<Scalar>& p) {
  return quantile_derivative(p).cwiseInverse();
}

/// ∫ ρ log ρ = -∫ log Q'(u) du.
template <typename Scalar>
Scalar entropy(const QuantileGrid<Scalar>& p) {
  return -quantile_derivative(p).array().log().mean();
}

template <typename Scalar>
Scalar potential_energy(const QuantileGrid<Scalar>& p, const QuadraticPotential<Scalar>& v) {
  require(v.dim() == 1, "potential_energy: grid family needs a 1-D potential");
  Scalar s = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k) s += v.value_1d(p[k]);
  return s / static_cast<Scalar>(p.size());
}

/// Result of a KL evaluation on the grid. Negative values produced by the
/// discretization are clamped to zero and flagged.
template <typename Scalar>
struct KlValue {
  Scalar value{};
  Scalar raw{};
  bool clamped = false;
  operator Scalar() const { return value; }
};

/// KL(p ‖ q) with q ∝ exp(-V): H(p) + E_p[V] + log Z.
template <typename Scalar>
KlValue<Scalar> kl(const QuantileGrid<Scalar>& p, const ObjectiveSpec<Scalar>& spec) {
  const Scalar raw = entropy(p) + potential_energy(p, spec.potential) + spec.potential.log_z;
  return {std::max(raw, Scalar(0)), raw, raw < Scalar(0)};
}

/// (log ρ)'(Q_k). Interior: -Q''/(Q')² with Q'' the centered second difference
/// and (Q')² the product of forward and backward differences, which reduces
/// to 1/Δ_k - 1/Δ_{k-1}. Ends use the natural one-sided form 1/Δ_0 and
/// -1/Δ_{M-2}, which makes the score the exact gradient of the discrete
/// entropy -(1/M) Σ log(M Δ_k).
template <typename Scalar>
Vec<Scalar> score(const QuantileGrid<Scalar>& p) {
  const Eigen::Index m = p.size();
  const auto& q = p.values();
  Vec<Scalar> inv_gap(m - 1);
  for (Eigen::Index k = 0; k + 1 < m; ++k) inv_gap(k) = Scalar(1) / (q(k + 1) - q(k));
  Vec<Scalar> s(m);
  s(0) = inv_gap(0);
  s(m - 1) = -inv_gap(m - 2);
  for (Eigen::Index k = 1; k + 1 < m; ++k) s(k) = inv_gap(k) - inv_gap(k - 1);
  return s;
}

namespace detail {
// Piecewise-linear interpolation through (xs, ys), linear extrapolation.
template <typename Scalar>
Scalar interp_linear(const Vec<Scalar>& xs, const Vec<Scalar>& ys, Scalar x) {
  const Eigen::Index n = xs.size();
  const Scalar* first = xs.data();
  Eigen::Index j = std::upper_bound(first, first + n, x) - first;  // xs[j-1] <= x < xs[j]
  j = std::clamp<Eigen::Index>(j, 1, n - 1);
  const Scalar t = (x - xs(j - 1)) / (xs(j) - xs(j - 1));
  return ys(j - 1) + t * (ys(j) - ys(j - 1));
}

// Density reconstruction: linear in x between knots, zero outside the support.
template <typename Scalar>
Scalar density_at(const Vec<Scalar>& knots, const Vec<Scalar>& dens, Scalar x) {
  if (x < knots(0) || x > knots(knots.size() - 1)) return 0;
  return interp_linear(knots, dens, x);
}
}  // namespace detail

/// log ρ_r(x) by linear interpolation of the knot log-densities of r
/// (linear extrapolation outside the support).
template <typename Scalar>
Scalar log_density(const QuantileGrid<Scalar>& r, Scalar x) {
  const Vec<Scalar> ld = -quantile_derivative(r).array().log().matrix();
  return detail::interp_linear(r.values(), ld, x);
}

/// Quadrature KL between two grids: (1/M) Σ_k [log ρ_p(Q_p,k) - log ρ_r(Q_p,k)].
template <typename Scalar>
Scalar kl_between(const QuantileGrid<Scalar>& p, const QuantileGrid<Scalar>& r) {
  const Vec<Scalar> lp = -quantile_derivative(p).array().log().matrix();
  const Vec<Scalar> lr = -quantile_derivative(r).array().log().matrix();
  Scalar s = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k)
    s += lp(k) - detail::interp_linear(r.values(), lr, p[k]);
  return s / static_cast<Scalar>(p.size());
}

/// ½ ∫ |ρ_p - ρ_q| by the trapezoid rule on 8·max(M) points spanning both
/// supports extended by 6 standard deviations.
template <typename Scalar>
Scalar tv(const QuantileGrid<Scalar>& p, const QuantileGrid<Scalar>& q) {
  const Scalar sd = std::sqrt(std::max(variance(p), variance(q)));
  const Scalar lo = std::min(p[0], q[0]) - Scalar(6) * sd;
  const Scalar hi = std::max(p[p.size() - 1], q[q.size() - 1]) + Scalar(6) * sd;
  const Eigen::Index n = 8 * std::max(p.size(), q.size());
  const Vec<Scalar> dp = knot_density(p), dq = knot_density(q);
  const Scalar h = (hi - lo) / static_cast<Scalar>(n - 1);
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar x = lo + h * static_cast<Scalar>(i);
    const Scalar f = std::abs(detail::density_at(p.values(), dp, x) -
                              detail::density_at(q.values(), dq, x));
    acc += (i == 0 || i == n - 1) ? Scalar(0.5) * f : f;
  }
  return std::clamp(Scalar(0.5) * h * acc, Scalar(0), Scalar(1));
}

}  // namespace jkolab

#endif  // JKOLAB_QUANTILE1D_HPP
