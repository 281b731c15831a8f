#include "spinforge/qmat.hpp"

#include <cmath>
#include <sstream>

#include "spinforge/errors.hpp"

namespace spinforge {

namespace pauli {

CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMatrix y() {
  CMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

CMatrix z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

CMatrix sx() { return 0.5 * x(); }
CMatrix sy() { return 0.5 * y(); }
CMatrix sz() { return 0.5 * z(); }

CMatrix proj_up() {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = 1;
  return m;
}

CMatrix proj_down() {
  CMatrix m = CMatrix::Zero(2, 2);
  m(1, 1) = 1;
  return m;
}

}  // namespace pauli

namespace {

constexpr double kAxisEps = 1e-14;

// Quaternion (w, v) with w = cos(theta/2), v = n sin(theta/2), up to sign.
AxisAngle from_quaternion(double w, Vec3 v) {
  const double vn = v.norm();
  if (vn < kAxisEps) return AxisAngle();
  if (w < 0) {
    w = -w;
    v = -v;
  }
  return AxisAngle(v / vn, 2.0 * std::atan2(vn, w));
}

}  // namespace

AxisAngle::AxisAngle() : axis_(0, 0, 1), angle_(0.0) {}

AxisAngle::AxisAngle(const Vec3& axis, double angle) {
  double a = std::remainder(angle, 2.0 * M_PI);  // [-pi, pi]
  const double n = axis.norm();
  if (!std::isfinite(a) || !std::isfinite(n)) throw DomainError("AxisAngle: non-finite input");
  if (n == 0.0) {
    if (a != 0.0) throw DomainError("AxisAngle: zero axis with nonzero angle");
    axis_ = Vec3(0, 0, 1);
    angle_ = 0.0;
    return;
  }
  Vec3 ax = axis / n;
  if (a < 0) {
    a = -a;
    ax = -ax;
  }
  if (a == 0.0) ax = Vec3(0, 0, 1);
  if (std::abs(a - M_PI) < 1e-15) {
    a = M_PI;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(ax[k]) > 1e-12) {
        if (ax[k] < 0) ax = -ax;
        break;
      }
    }
  }
  axis_ = ax;
  angle_ = a;
}

CMatrix AxisAngle::matrix() const {
  const double h = 0.5 * angle_;
  const CMatrix ns = axis_[0] * pauli::x() + axis_[1] * pauli::y() + axis_[2] * pauli::z();
  return std::cos(h) * pauli::identity() - kI * std::sin(h) * ns;
}

AxisAngle AxisAngle::from_matrix(const CMatrix& u) {
  if (u.rows() != 2 || u.cols() != 2) throw DimensionError("AxisAngle::from_matrix: need 2x2");
  // u = e^{i chi} (w - i v.sigma)
  std::array<cplx, 4> q{0.5 * u.trace(), 0.5 * kI * (pauli::x() * u).trace(),
                        0.5 * kI * (pauli::y() * u).trace(), 0.5 * kI * (pauli::z() * u).trace()};
  int big = 0;
  for (int k = 1; k < 4; ++k)
    if (std::abs(q[k]) > std::abs(q[big])) big = k;
  const cplx phase = std::abs(q[big]) > 0 ? std::conj(q[big]) / std::abs(q[big]) : cplx(1.0);
  std::array<double, 4> r{};
  for (int k = 0; k < 4; ++k) r[k] = (q[k] * phase).real();
  return from_quaternion(r[0], Vec3(r[1], r[2], r[3]));
}

AxisAngle AxisAngle::power(double k) const { return AxisAngle(axis_, angle_ * k); }

AxisAngle compose_axis_angle(const AxisAngle& r1, const AxisAngle& r2) {
  const double a1 = 0.5 * r1.angle(), a2 = 0.5 * r2.angle();
  const Vec3& p1 = r1.axis();
  const Vec3& p2 = r2.axis();
  const double c1 = std::cos(a1), s1 = std::sin(a1), c2 = std::cos(a2), s2 = std::sin(a2);
  const double w = c1 * c2 - s1 * s2 * p1.dot(p2);
  const Vec3 v = s1 * c2 * p1 + c1 * s2 * p2 + s1 * s2 * p1.cross(p2);
  return from_quaternion(w, v);
}

double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double phase_distance(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("phase_distance: shape mismatch");
  const cplx overlap = (b.adjoint() * a).trace();
  const cplx phase = std::abs(overlap) > 0 ? overlap / std::abs(overlap) : cplx(1.0);
  return max_abs(a - phase * b);
}

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.adjoint()) <= tol;
}

CMatrix expm_hermitian(const CMatrix& h, double t) {
  if (h.rows() != h.cols()) throw DimensionError("expm_hermitian: matrix not square");
  const double scale = std::max(1.0, max_abs(h));
  if (!is_hermitian(h, 1e-10 * scale)) throw DomainError("expm_hermitian: generator is not Hermitian");
  const Eigen::MatrixXcd hc = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hc);
  if (es.info() != Eigen::Success) throw DomainError("expm_hermitian: eigensolver failed");
  Eigen::VectorXcd ph(hc.rows());
  for (Eigen::Index k = 0; k < hc.rows(); ++k) ph[k] = std::exp(-kI * es.eigenvalues()[k] * t);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix tensor(std::initializer_list<CMatrix> factors) {
  if (factors.size() == 0) throw DimensionError("tensor: empty factor list");
  auto it = factors.begin();
  CMatrix out = *it;
  for (++it; it != factors.end(); ++it) out = tensor(out, *it);
  return out;
}

int qubit_count(int dim) {
  int n = 0;
  while ((1 << n) < dim) ++n;
  if ((1 << n) != dim || n == 0) {
    std::ostringstream os;
    os << "dimension " << dim << " is not a power of two >= 2";
    throw DimensionError(os.str());
  }
  return n;
}

CMatrix partial_trace(const CMatrix& m, int subsystem) {
  if (m.rows() != m.cols()) throw DimensionError("partial_trace: matrix not square");
  const int n = qubit_count(static_cast<int>(m.rows()));
  if (subsystem < 0 || subsystem >= n) throw DimensionError("partial_trace: subsystem index out of range");
  const int bit = n - 1 - subsystem;
  const int d = 1 << (n - 1);
  auto expand = [&](int idx, int b) {
    const int low = idx & ((1 << bit) - 1);
    const int high = idx >> bit;
    return (high << (bit + 1)) | (b << bit) | low;
  };
  CMatrix out = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      out(i, j) = m(expand(i, 0), expand(j, 0)) + m(expand(i, 1), expand(j, 1));
  return out;
}

CMatrix reduce_to_qubit(const CMatrix& m, int keep) {
  const int n = qubit_count(static_cast<int>(m.rows()));
  if (keep < 0 || keep >= n) throw DimensionError("reduce_to_qubit: index out of range");
  CMatrix out = m;
  for (int q = n - 1; q >= 0; --q)
    if (q != keep) out = partial_trace(out, q);
  return out;
}

CMatrix embed(const CMatrix& op, int site, int n_qubits) {
  if (op.rows() != 2 || op.cols() != 2) throw DimensionError("embed: need a single-qubit operator");
  if (site < 0 || site >= n_qubits) throw DimensionError("embed: site out of range");
  CMatrix out = CMatrix::Identity(1, 1);
  for (int q = 0; q < n_qubits; ++q) out = tensor(out, q == site ? op : pauli::identity());
  return out;
}

DensityMatrix::DensityMatrix(const CMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("DensityMatrix: matrix not square");
  qubit_count(static_cast<int>(m.rows()));
  if (!is_hermitian(m, 1e-10)) throw DomainError("DensityMatrix: not Hermitian");
  if (std::abs(m.trace() - cplx(1.0)) > 1e-10) throw DomainError("DensityMatrix: trace differs from 1");
  const Eigen::MatrixXcd hc = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hc, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9) throw DomainError("DensityMatrix: negative eigenvalue");
  mat_ = m;
}

DensityMatrix DensityMatrix::trusted(CMatrix m) {
  DensityMatrix d;
  d.mat_ = std::move(m);
  return d;
}

double DensityMatrix::population(const CMatrix& projector) const {
  if (projector.rows() != mat_.rows()) throw DimensionError("population: projector dimension mismatch");
  return (projector * mat_).trace().real();
}

DensityMatrix pure_state(const Eigen::VectorXcd& psi) {
  const Eigen::VectorXcd v = psi / psi.norm();
  return DensityMatrix(v * v.adjoint());
}

}  // namespace spinforge
