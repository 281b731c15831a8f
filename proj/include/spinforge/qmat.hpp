#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

namespace spinforge {

using cplx = std::complex<double>;
using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;

inline constexpr cplx kI{0.0, 1.0};

namespace pauli {
CMatrix identity(int dim = 2);
CMatrix x();
CMatrix y();
CMatrix z();
// Spin-1/2 operators I = sigma/2.
CMatrix sx();
CMatrix sy();
CMatrix sz();
// Projectors onto |0> = |up> and |1> = |down>.
CMatrix proj_up();
CMatrix proj_down();
}  // namespace pauli

// Unit axis + angle for an SU(2) rotation R_n(theta) = exp(-i theta n.sigma / 2).
// Canonical form: angle in [0, pi]; at angle 0 the axis is z; at angle pi the
// first nonzero axis component is positive. Global phase is not tracked.
class AxisAngle {
 public:
  AxisAngle();
  AxisAngle(const Vec3& axis, double angle);

  const Vec3& axis() const { return axis_; }
  double angle() const { return angle_; }

  // 2x2 matrix exp(-i angle axis.sigma / 2).
  CMatrix matrix() const;
  // Axis-angle of a 2x2 unitary, projectively.
  static AxisAngle from_matrix(const CMatrix& u);

  // Rotation about the same axis by k times the angle.
  AxisAngle power(double k) const;

 private:
  Vec3 axis_;
  double angle_;
};

// r1 * r2 as operators (r2 acts first).
AxisAngle compose_axis_angle(const AxisAngle& r1, const AxisAngle& r2);

// Max elementwise |a - b| after removing a global phase from b.
double phase_distance(const CMatrix& a, const CMatrix& b);

bool is_hermitian(const CMatrix& m, double tol = 1e-10);
double max_abs(const CMatrix& m);

// exp(-i H t) by Hermitian eigendecomposition.
CMatrix expm_hermitian(const CMatrix& h, double t);

CMatrix tensor(const CMatrix& a, const CMatrix& b);
// Kronecker product of a list of factors, leftmost first.
CMatrix tensor(std::initializer_list<CMatrix> factors);
// Traces out qubit `subsystem` (0 = leftmost) of an n-qubit operator.
CMatrix partial_trace(const CMatrix& m, int subsystem);
// Keeps qubit `keep`, tracing the rest.
CMatrix reduce_to_qubit(const CMatrix& m, int keep);

// Embeds a single-qubit operator at position `site` in an n-qubit register.
CMatrix embed(const CMatrix& op, int site, int n_qubits);

int qubit_count(int dim);

class DensityMatrix {
 public:
  explicit DensityMatrix(const CMatrix& m);
  // Skips validation; for internal propagation where the input is known valid.
  static DensityMatrix trusted(CMatrix m);

  const CMatrix& mat() const { return mat_; }
  int dim() const { return static_cast<int>(mat_.rows()); }
  double population(const CMatrix& projector) const;

 private:
  DensityMatrix() = default;
  CMatrix mat_;
};

// Pure-state density matrix |psi><psi| (psi normalized internally).
DensityMatrix pure_state(const Eigen::VectorXcd& psi);

}  // namespace spinforge
