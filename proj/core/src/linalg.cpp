#include "pemix/linalg.hpp"

#include "pemix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pemix {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("SymMatrix: matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw InvalidArgument("SymMatrix: matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("SymMatrix: matrix is not square");
  }
  return SymMatrix(Matrix(0.5 * (m + m.transpose())), Unchecked{});
}

SymMatrix SymMatrix::identity(Index dim) {
  return SymMatrix(Matrix::Identity(dim, dim), Unchecked{});
}

CovPrecisionPair CovPrecisionPair::from_covariance(const SymMatrix& cov) {
  Eigen::LLT<Matrix> llt(cov.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("covariance matrix is not positive definite");
  }
  const Index p = cov.dim();
  CovPrecisionPair pair;
  pair.cov_ = cov;
  pair.prec_ = SymMatrix::symmetrized(llt.solve(Matrix::Identity(p, p)));
  pair.logdet_cov_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return pair;
}

CovPrecisionPair CovPrecisionPair::from_parts(SymMatrix cov, SymMatrix prec, double logdet_cov) {
  if (cov.dim() != prec.dim()) {
    throw InvalidArgument("CovPrecisionPair: covariance and precision differ in size");
  }
  CovPrecisionPair pair;
  pair.cov_ = std::move(cov);
  pair.prec_ = std::move(prec);
  pair.logdet_cov_ = logdet_cov;
  return pair;
}

IndexSplit::IndexSplit(IndexList observed, IndexList missing, Index dim)
    : observed_(std::move(observed)), missing_(std::move(missing)), dim_(dim) {
  if (observed_.empty()) {
    throw InvalidArgument("IndexSplit: at least one coordinate must be observed");
  }
  if (static_cast<Index>(observed_.size() + missing_.size()) != dim_) {
    throw InvalidArgument("IndexSplit: index sets do not cover the dimension");
  }
  std::vector<bool> seen(static_cast<std::size_t>(dim_), false);
  for (const IndexList* list : {&observed_, &missing_}) {
    if (!std::is_sorted(list->begin(), list->end())) {
      throw InvalidArgument("IndexSplit: index lists must be ascending");
    }
    for (Index k : *list) {
      if (k < 0 || k >= dim_ || seen[static_cast<std::size_t>(k)]) {
        throw InvalidArgument("IndexSplit: index " + std::to_string(k) +
                              " out of range or repeated");
      }
      seen[static_cast<std::size_t>(k)] = true;
    }
  }
}

IndexSplit IndexSplit::from_mask(const std::vector<bool>& observed) {
  IndexList obs;
  IndexList mis;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    (observed[k] ? obs : mis).push_back(static_cast<Index>(k));
  }
  return IndexSplit(std::move(obs), std::move(mis), static_cast<Index>(observed.size()));
}

namespace {

IndexList all_but(Index dim, Index j) {
  IndexList out;
  out.reserve(static_cast<std::size_t>(dim - 1));
  for (Index k = 0; k < dim; ++k) {
    if (k != j) out.push_back(k);
  }
  return out;
}

void require_both_sides(const IndexSplit& split, const char* who) {
  if (split.missing().empty()) {
    throw InvalidArgument(std::string(who) + ": missing index set is empty");
  }
}

void require_same_dim(Index a, Index b, const char* who) {
  if (a != b) {
    throw InvalidArgument(std::string(who) + ": split dimension does not match matrix");
  }
}

}  // namespace

PrincipalPart principal_submatrix(const SymMatrix& m, Index j) {
  const Index p = m.dim();
  if (p < 2) {
    throw InvalidArgument("principal_submatrix: dimension must be at least 2");
  }
  if (j < 0 || j >= p) {
    throw InvalidArgument("principal_submatrix: index " + std::to_string(j) + " out of range");
  }
  const IndexList rest = all_but(p, j);
  PrincipalPart part;
  part.sub = SymMatrix::symmetrized(m.matrix()(rest, rest));
  part.diag = m(j, j);
  part.row = m.matrix()(j, rest).transpose();
  return part;
}

SymMatrix schur_complement(const SymMatrix& m, const IndexSplit& split) {
  require_same_dim(m.dim(), split.dim(), "schur_complement");
  require_both_sides(split, "schur_complement");
  const auto& x = split.observed();
  const auto& z = split.missing();
  Eigen::LLT<Matrix> llt(m.matrix()(x, x));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("schur_complement: observed block is singular");
  }
  const Matrix sxz = m.matrix()(x, z);
  return SymMatrix::symmetrized(m.matrix()(z, z) - sxz.transpose() * llt.solve(sxz));
}

ConditionalBlocks schur_via_precision(const CovPrecisionPair& pair, const IndexSplit& split) {
  require_same_dim(pair.dim(), split.dim(), "schur_via_precision");
  require_both_sides(split, "schur_via_precision");
  const auto& x = split.observed();
  const auto& z = split.missing();
  const Matrix& xi = pair.prec().matrix();
  Eigen::LLT<Matrix> llt(xi(z, z));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("schur_via_precision: precision block is singular");
  }
  const Index l = split.num_missing();
  ConditionalBlocks out;
  out.cond_cov = SymMatrix::symmetrized(llt.solve(Matrix::Identity(l, l)));
  out.regression = -llt.solve(Matrix(xi(z, x)));
  return out;
}

SubmatrixInverse submatrix_inverse_via_precision(const CovPrecisionPair& pair, Index j) {
  const PrincipalPart sigma = principal_submatrix(pair.cov(), j);
  const PrincipalPart xi = principal_submatrix(pair.prec(), j);
  const double denom = 1.0 - xi.row.dot(sigma.row);
  SubmatrixInverse out;
  if (std::abs(denom) < kRankOneTolerance) {
    Eigen::LLT<Matrix> llt(sigma.sub.matrix());
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("submatrix_inverse_via_precision: principal submatrix is singular");
    }
    const Index n = sigma.sub.dim();
    out.inverse = SymMatrix::symmetrized(llt.solve(Matrix::Identity(n, n)));
    out.used_fallback = true;
    return out;
  }
  const Matrix& xi_j = xi.sub.matrix();
  // [I + xi sigma' / denom] Xi_j
  Matrix inv = xi_j + (xi.row / denom) * (sigma.row.transpose() * xi_j);
  out.inverse = SymMatrix::symmetrized(inv);
  return out;
}

double logdet_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("log-determinant requested for a non positive definite matrix");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double logdet_observed_block(const CovPrecisionPair& pair, const IndexSplit& split) {
  require_same_dim(pair.dim(), split.dim(), "logdet_observed_block");
  const auto& x = split.observed();
  const auto& z = split.missing();
  if (z.empty()) {
    return pair.logdet_cov();
  }
  if (z.size() > x.size()) {
    return logdet_spd(pair.cov().matrix()(x, x));
  }
  return pair.logdet_cov() + logdet_spd(pair.prec().matrix()(z, z));
}

}  // namespace pemix
