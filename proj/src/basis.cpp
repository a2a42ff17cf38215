#include "samtwostep/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace samtwostep {

double affine_rescale(double x, const Interval& from, const Interval& to) {
  if (from.length() == 0.0) {
    throw std::invalid_argument("affine_rescale: zero-length source interval");
  }
  return to.lo + (x - from.lo) * (to.length() / from.length());
}

double legendre_shifted(int l, double x) {
  if (l < 0 || l > 50) {
    throw std::invalid_argument("legendre_shifted: order must be in [0, 50]");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::domain_error("legendre_shifted: x outside [0, 1]");
  }
  const double u = 2.0 * x - 1.0;
  double p0 = 1.0;
  if (l == 0) return 1.0;
  double p1 = u;
  for (int i = 1; i < l; ++i) {
    double p2 = ((2.0 * i + 1.0) * u * p1 - i * p0) / (i + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return std::sqrt(2.0 * l + 1.0) * p1;
}

void BasisSpec::validate() const {
  if (intervals < 1) throw std::invalid_argument("basis: intervals must be >= 1");
  if (degree < 0) throw std::invalid_argument("basis: degree must be >= 0");
  if (domain.length() <= 0.0) {
    throw std::invalid_argument("basis: domain must have positive length");
  }
  if (degree > 50) {
    throw std::invalid_argument("basis: degree capped at 50");
  }
}

Basis::Basis(const BasisSpec& spec) : spec_(spec), dim_(0) {
  spec_.validate();
  dim_ = spec_.dimension();
  if (spec_.family == BasisFamily::kBSpline) {
    const int order = spec_.degree + 1;
    const int m = spec_.intervals;
    knots_.resize(m + 1 + 2 * spec_.degree);
    for (int i = 0; i < order; ++i) knots_[i] = 0.0;
    for (int i = 1; i < m; ++i) knots_[spec_.degree + i] = static_cast<double>(i) / m;
    for (int i = 0; i < order; ++i) knots_[spec_.degree + m + i] = 1.0;
  }
}

double Basis::to_unit(double x) const {
  const double u = (x - spec_.domain.lo) / spec_.domain.length();
  if (u < -1e-12 || u > 1.0 + 1e-12) {
    throw std::domain_error("basis: point " + std::to_string(x) +
                            " outside domain [" + std::to_string(spec_.domain.lo) +
                            ", " + std::to_string(spec_.domain.hi) + "]");
  }
  return std::min(1.0, std::max(0.0, u));
}

int Basis::interval_of(int k) const {
  return k / (spec_.degree + 1);
}

namespace {

// Interval index of u in the half-open partition ((k/m, (k+1)/m], u=0 -> 0.
int piece_index(double u, int m) {
  if (u <= 0.0) return 0;
  int k = static_cast<int>(std::ceil(u * m)) - 1;
  return std::min(std::max(k, 0), m - 1);
}

// Cox-de Boor: values of the order non-vanishing B-splines at u. Returns the
// index of the first one; out must have room for order = degree+1 values.
int bspline_nonzero(double u, int degree, const Eigen::VectorXd& knots,
                    double* out) {
  const int order = degree + 1;
  const int n_knots = static_cast<int>(knots.size());
  // knot span i with knots[i] <= u < knots[i+1]; the last span is closed.
  int i = degree;
  const int last = n_knots - order - 1;
  while (i < last && u >= knots[i + 1]) ++i;

  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double left = u - knots[i - j + 1 + r];
      const double right = knots[i + 1 + r] - u;
      const double temp = out[r] / (right + left);
      out[r] = saved + right * temp;
      saved = left * temp;
    }
    out[j] = saved;
  }
  return i - degree;  // first nonzero basis index
}

}  // namespace

double Basis::value(int k, double x) const {
  if (k < 0 || k >= dim_) throw std::invalid_argument("basis: index out of range");
  const double u = to_unit(x);
  if (spec_.family == BasisFamily::kPiecewiseLegendre) {
    const int m = spec_.intervals;
    const int piece = piece_index(u, m);
    if (piece != interval_of(k)) return 0.0;
    const int l = k - piece * (spec_.degree + 1);
    return std::sqrt(static_cast<double>(m)) *
           legendre_shifted(l, std::min(1.0, m * u - piece));
  }
  double vals[64];
  const int first = bspline_nonzero(u, spec_.degree, knots_, vals);
  if (k < first || k > first + spec_.degree) return 0.0;
  return vals[k - first];
}

Eigen::VectorXd Basis::row(double x) const {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(dim_);
  const double u = to_unit(x);
  if (spec_.family == BasisFamily::kPiecewiseLegendre) {
    const int m = spec_.intervals;
    const int piece = piece_index(u, m);
    const double local = std::min(1.0, m * u - piece);
    const double scale = std::sqrt(static_cast<double>(m));
    for (int l = 0; l <= spec_.degree; ++l) {
      r[piece * (spec_.degree + 1) + l] = scale * legendre_shifted(l, local);
    }
  } else {
    double vals[64];
    const int first = bspline_nonzero(u, spec_.degree, knots_, vals);
    for (int j = 0; j <= spec_.degree; ++j) r[first + j] = vals[j];
  }
  return r;
}

Eigen::MatrixXd Basis::eval_design(const Eigen::VectorXd& points) const {
  Eigen::MatrixXd design(points.size(), dim_);
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    design.row(i) = row(points[i]).transpose();
  }
  return design;
}

CenteredDesign center_empirically(const Eigen::MatrixXd& design) {
  if (design.rows() < 1) {
    throw std::invalid_argument("center_empirically: empty design");
  }
  CenteredDesign out;
  out.raw = design;
  out.means = design.colwise().mean();
  out.centered = design.rowwise() - out.means.transpose();
  return out;
}

}  // namespace samtwostep
