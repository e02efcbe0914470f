#pragma once

// Dense symmetric-matrix utilities built around the covariance/precision
// pair. Everything here is a pure function of its inputs.
//
// Indices are 0-based throughout.

#include <Eigen/Dense>

#include <vector>

namespace pemix {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<Index>;

/// Dense symmetric matrix. Construction from an arbitrary matrix checks
/// squareness and symmetry (relative tolerance 1e-12) and then stores the
/// exactly symmetrized value.
class SymMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-12;

  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  /// Symmetrizes (m + m')/2 without checking; for results of computations
  /// that are symmetric up to roundoff.
  static SymMatrix symmetrized(const Matrix& m);
  static SymMatrix identity(Index dim);

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  struct Unchecked {};
  SymMatrix(Matrix m, Unchecked) : m_(std::move(m)) {}

  Matrix m_;
};

/// A covariance matrix travelling together with its inverse (the precision)
/// and its log-determinant.
class CovPrecisionPair {
 public:
  CovPrecisionPair() = default;

  /// Factorizes `cov` (Cholesky). Throws NotPositiveDefinite on failure.
  static CovPrecisionPair from_covariance(const SymMatrix& cov);

  /// Assembles a pair whose parts were computed elsewhere (e.g. through the
  /// Woodbury identity). The caller guarantees consistency.
  static CovPrecisionPair from_parts(SymMatrix cov, SymMatrix prec, double logdet_cov);

  Index dim() const { return cov_.dim(); }
  const SymMatrix& cov() const { return cov_; }
  const SymMatrix& prec() const { return prec_; }
  double logdet_cov() const { return logdet_cov_; }

 private:
  SymMatrix cov_;
  SymMatrix prec_;
  double logdet_cov_ = 0.0;
};

/// Partition of {0..p-1} into observed and missing coordinates.
class IndexSplit {
 public:
  IndexSplit() = default;
  /// Both lists must be ascending, disjoint and cover 0..dim-1; `observed`
  /// must be non-empty.
  IndexSplit(IndexList observed, IndexList missing, Index dim);

  /// `observed[j]` true when coordinate j is observed.
  static IndexSplit from_mask(const std::vector<bool>& observed);

  const IndexList& observed() const { return observed_; }
  const IndexList& missing() const { return missing_; }
  Index dim() const { return dim_; }
  Index num_observed() const { return static_cast<Index>(observed_.size()); }
  Index num_missing() const { return static_cast<Index>(missing_.size()); }

  friend bool operator==(const IndexSplit&, const IndexSplit&) = default;

 private:
  IndexList observed_;
  IndexList missing_;
  Index dim_ = 0;
};

/// Submatrix with row j and column j deleted, plus the deleted diagonal
/// entry and the deleted row (without its j-th element).
struct PrincipalPart {
  SymMatrix sub;
  double diag = 0.0;
  Vector row;
};

PrincipalPart principal_submatrix(const SymMatrix& m, Index j);

/// m_zz - m_zx m_xx^{-1} m_xz computed from the covariance blocks.
/// Throws NotPositiveDefinite when the observed block cannot be factorized.
SymMatrix schur_complement(const SymMatrix& m, const IndexSplit& split);

struct ConditionalBlocks {
  SymMatrix cond_cov;  ///< Sigma_{z.x} (l x l)
  Matrix regression;   ///< Sigma_zx Sigma_xx^{-1} (l x m)
};

/// Same quantities as schur_complement and the regression coefficients, but
/// read off the precision matrix: Sigma_{z.x} = Xi_zz^{-1} and
/// Sigma_zx Sigma_xx^{-1} = -Xi_zz^{-1} Xi_zx. Only an l x l factorization is
/// performed.
ConditionalBlocks schur_via_precision(const CovPrecisionPair& pair, const IndexSplit& split);

struct SubmatrixInverse {
  SymMatrix inverse;
  bool used_fallback = false;
};

/// Inverse of the principal submatrix Sigma_j from the rank-one correction
///   Sigma_j^{-1} = [I + xi_j sigma_j' / (1 - xi_j' sigma_j)] Xi_j.
/// When |1 - xi_j' sigma_j| < kRankOneTolerance the submatrix is inverted
/// directly and `used_fallback` is set.
inline constexpr double kRankOneTolerance = 1e-10;
SubmatrixInverse submatrix_inverse_via_precision(const CovPrecisionPair& pair, Index j);

/// ln|Sigma_xx| = ln|Sigma| + ln|Xi_zz|. Falls back to factorizing Sigma_xx
/// when the missing block is larger than the observed one.
double logdet_observed_block(const CovPrecisionPair& pair, const IndexSplit& split);

/// Log-determinant of an SPD matrix via Cholesky; throws NotPositiveDefinite.
double logdet_spd(const Matrix& m);

}  // namespace pemix
