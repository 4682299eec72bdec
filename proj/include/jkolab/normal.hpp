#ifndef JKOLAB_NORMAL_HPP
#define JKOLAB_NORMAL_HPP

#include <cmath>
#include <limits>
#include <numbers>

namespace jkolab {

template <typename Scalar>
Scalar normal_pdf(Scalar z) {
  return std::exp(-Scalar(0.5) * z * z) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar normal_cdf(Scalar z) {
  return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

// Acklam's rational approximation followed by two Halley steps on erfc;
// accurate to a few ulps over (0, 1).
template <typename Scalar>
Scalar normal_quantile(Scalar p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0)) return -std::numeric_limits<Scalar>::infinity();
  if (!(p < 1)) return std::numeric_limits<Scalar>::infinity();

  const double pd = static_cast<double>(p);
  const double p_low = 0.02425;
  double x;
  if (pd < p_low) {
    const double q = std::sqrt(-2 * std::log(pd));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (pd <= 1 - p_low) {
    const double q = pd - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-pd));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  Scalar z = static_cast<Scalar>(x);
  for (int it = 0; it < 2; ++it) {
    // Evaluate the residual on the lower tail to avoid cancellation.
    const Scalar upper = Scalar(0.5) * std::erfc(z / std::numbers::sqrt2_v<Scalar>);
    const Scalar e = (z < 0) ? normal_cdf(z) - p : (Scalar(1) - p) - upper;
    const Scalar u = e / normal_pdf(z);
    z = z - u / (Scalar(1) + z * u / 2);
  }
  return z;
}

}  // namespace jkolab

#endif  // JKOLAB_NORMAL_HPP
