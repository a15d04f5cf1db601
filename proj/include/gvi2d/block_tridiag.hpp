#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "gvi2d/common.hpp"

namespace gvi2d {

/// Symmetric block-tridiagonal matrix with N x N blocks: diagonal blocks
/// A_0..A_K and upper off-diagonal blocks B_k at position (k, k+1). The
/// lower half is implied by symmetry and never stored, so fill outside the
/// band is unrepresentable by construction.
template <int N>
class BlockTridiag {
 public:
  using Block = Eigen::Matrix<double, N, N>;

  explicit BlockTridiag(int num_blocks)
      : diag_(num_blocks, Block::Zero()),
        off_(num_blocks > 0 ? num_blocks - 1 : 0, Block::Zero()) {
    if (num_blocks < 1) throw LengthMismatch("BlockTridiag: need at least one block");
  }

  int num_blocks() const { return static_cast<int>(diag_.size()); }

  void add_diag(int k, const Block& m) { at(diag_, k, "diag") += m; }
  /// adds to block (k, k+1)
  void add_off(int k, const Block& m) { at(off_, k, "off-diagonal") += m; }

  const Block& diag(int k) const { return at(diag_, k, "diag"); }
  const Block& off(int k) const { return at(off_, k, "off-diagonal"); }

  void set_zero() {
    for (Block& b : diag_) b.setZero();
    for (Block& b : off_) b.setZero();
  }

  /// a·this + b·other, blockwise (used by the solver's damped covariance path)
  static BlockTridiag blend(double a, const BlockTridiag& x, double b, const BlockTridiag& y) {
    BlockTridiag out(x.num_blocks());
    for (int k = 0; k < x.num_blocks(); ++k) out.diag_[k] = a * x.diag_[k] + b * y.diag_[k];
    for (int k = 0; k + 1 < x.num_blocks(); ++k) out.off_[k] = a * x.off_[k] + b * y.off_[k];
    return out;
  }

  /// Full dense form; for oracles and small problems only.
  Eigen::MatrixXd dense() const {
    const int n = num_blocks() * N;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < num_blocks(); ++k) m.block<N, N>(k * N, k * N) = diag_[k];
    for (int k = 0; k + 1 < num_blocks(); ++k) {
      m.block<N, N>(k * N, (k + 1) * N) = off_[k];
      m.block<N, N>((k + 1) * N, k * N) = off_[k].transpose();
    }
    return m;
  }

 private:
  template <class V>
  static auto& at(V& v, int k, const char* what) {
    if (k < 0 || static_cast<size_t>(k) >= v.size())
      throw IndexOutOfRange(std::string("BlockTridiag: ") + what + " block " + std::to_string(k) +
                            " out of range");
    return v[k];
  }

  std::vector<Block> diag_;
  std::vector<Block> off_;
};

/// Block Cholesky factor A = LLᵀ of a block-tridiagonal SPD matrix: L has
/// lower-triangular diagonal blocks d[k] and dense sub-diagonal blocks e[k]
/// at (k+1, k).
template <int N>
class BlockCholesky {
 public:
  using Block = Eigen::Matrix<double, N, N>;

  explicit BlockCholesky(const BlockTridiag<N>& a) {
    const int K = a.num_blocks();
    d_.resize(K);
    e_.resize(K > 0 ? K - 1 : 0);
    Block s = a.diag(0);
    for (int k = 0; k < K; ++k) {
      if (k > 0) {
        // e[k-1] = B_{k-1}ᵀ d[k-1]⁻ᵀ, then the Schur update of A_k
        e_[k - 1] =
            d_[k - 1].template triangularView<Eigen::Lower>().solve(a.off(k - 1)).transpose();
        s = a.diag(k) - e_[k - 1] * e_[k - 1].transpose();
      }
      const Eigen::LLT<Block> llt(s);
      if (llt.info() != Eigen::Success)
        throw InfoNotSPD("block Cholesky: pivot not positive definite", k);
      d_[k] = llt.matrixL();
    }
  }

  int num_blocks() const { return static_cast<int>(d_.size()); }

  /// ln det A = 2 Σ_k Σ_i ln d[k](i,i)
  double logdet() const {
    double acc = 0.0;
    for (const Block& dk : d_)
      for (int i = 0; i < N; ++i) acc += std::log(dk(i, i));
    return 2.0 * acc;
  }

  /// Solves A x = rhs (rhs stacked blockwise, length N·num_blocks).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int K = num_blocks();
    if (rhs.size() != static_cast<Eigen::Index>(K) * N)
      throw LengthMismatch("BlockCholesky::solve: rhs length mismatch");
    Eigen::VectorXd y(rhs.size()), x(rhs.size());
    for (int k = 0; k < K; ++k) {
      Eigen::Matrix<double, N, 1> r = rhs.segment<N>(k * N);
      if (k > 0) r -= e_[k - 1] * y.segment<N>((k - 1) * N);
      y.segment<N>(k * N) = d_[k].template triangularView<Eigen::Lower>().solve(r);
    }
    for (int k = K - 1; k >= 0; --k) {
      Eigen::Matrix<double, N, 1> r = y.segment<N>(k * N);
      if (k + 1 < K) r -= e_[k].transpose() * x.segment<N>((k + 1) * N);
      x.segment<N>(k * N) =
          d_[k].transpose().template triangularView<Eigen::Upper>().solve(r);
    }
    return x;
  }

  /// Marginal blocks of Σ = A⁻¹: the diagonal Σ_kk and the upper
  /// off-diagonal Σ_{k,k+1}, by the backward recursion
  ///   Σ_KK     = d_K⁻ᵀ d_K⁻¹
  ///   Σ_k,k+1  = −d_k⁻ᵀ e_kᵀ Σ_{k+1,k+1}
  ///   Σ_kk     = d_k⁻ᵀ d_k⁻¹ + d_k⁻ᵀ e_kᵀ Σ_{k+1,k+1} e_k d_k⁻¹
  /// which touches only the tridiagonal band of the full inverse.
  void marginals(std::vector<Block>& sigma_diag, std::vector<Block>& sigma_off) const {
    const int K = num_blocks();
    sigma_diag.assign(K, Block::Zero());
    sigma_off.assign(K > 0 ? K - 1 : 0, Block::Zero());
    for (int k = K - 1; k >= 0; --k) {
      const Block dinv =
          d_[k].template triangularView<Eigen::Lower>().solve(Block::Identity());
      sigma_diag[k] = dinv.transpose() * dinv;
      if (k + 1 < K) {
        const Block f = e_[k] * dinv;                 // e_k d_k⁻¹
        const Block m = sigma_diag[k + 1] * f;        // Σ_{k+1,k+1} e_k d_k⁻¹
        sigma_off[k] = -m.transpose();
        sigma_diag[k] += f.transpose() * m;
      }
      sigma_diag[k] = 0.5 * (sigma_diag[k] + sigma_diag[k].transpose()).eval();
    }
  }

 private:
  std::vector<Block> d_;
  std::vector<Block> e_;
};

}  // namespace gvi2d
