#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include "aoi/linalg.hpp"

namespace aoi {

/// 100 and 1000 significant decimal digits. Expression templates are off so the types
/// behave like plain values inside Eigen expressions.
using mp100 = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<100>,
                                            boost::multiprecision::et_off>;
using mp1000 = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<1000>,
                                             boost::multiprecision::et_off>;

enum class Precision { float64, mp100, mp1000 };

inline Precision precision_from_string(const std::string& s) {
  if (s == "double") return Precision::float64;
  if (s == "mp100") return Precision::mp100;
  if (s == "mp1000") return Precision::mp1000;
  throw ValidationError("precision must be one of double, mp100, mp1000 (got \"" + s + "\")");
}

inline std::string to_string(Precision p) {
  switch (p) {
    case Precision::float64:
      return "double";
    case Precision::mp100:
      return "mp100";
    case Precision::mp1000:
      return "mp1000";
  }
  return "double";
}

template <class Real>
double to_double(const Real& x) {
  return static_cast<double>(x);
}

template <class Real>
Real real_abs(const Real& x) {
  using std::abs;
  return abs(x);
}

/// Natural log of a positive value, returned as double. Splits off the binary exponent first
/// so values far outside the double range still work and the wide types avoid their slow log.
template <class Real>
double log_double(const Real& x) {
  using std::frexp;
  int exp2 = 0;
  const Real mant = frexp(x, &exp2);
  return std::log(static_cast<double>(mant)) + exp2 * std::log(2.0);
}

/// x^e for integer e >= 0, by squaring.
template <class Real>
Real ipow(Real x, std::int64_t e) {
  Real out(1);
  while (e > 0) {
    if (e & 1) out *= x;
    x *= x;
    e >>= 1;
  }
  return out;
}

template <class Real>
MatrixT<Real> matrix_power(const MatrixT<Real>& m, std::int64_t e) {
  MatrixT<Real> out = MatrixT<Real>::Identity(m.rows(), m.cols());
  MatrixT<Real> base = m;
  while (e > 0) {
    if (e & 1) out = (out * base).eval();
    base = (base * base).eval();
    e >>= 1;
  }
  return out;
}

/// Euclidean norm that accepts zero-length vectors.
template <class Real>
Real vec_norm(const VectorT<Real>& v) {
  if (v.size() == 0) return Real(0);
  if (v.size() == 1) return real_abs(v(0));
  return v.norm();
}

}  // namespace aoi
