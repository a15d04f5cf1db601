#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "gvi2d/block_tridiag.hpp"
#include "gvi2d/common.hpp"

using gvi2d::BlockCholesky;
using gvi2d::BlockTridiag;

namespace {

// Random SPD block-tridiagonal matrix built as L Lᵀ from a random block
// lower-bidiagonal L with positive diagonal, so positive definiteness is
// guaranteed by construction and the product stays exactly tridiagonal.
template <int N>
BlockTridiag<N> random_spd(int num_blocks, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  using Block = typename BlockTridiag<N>::Block;
  std::vector<Block> ld(num_blocks), le(num_blocks - 1);
  for (Block& b : ld) {
    b.setZero();
    for (int i = 0; i < N; ++i) {
      b(i, i) = ud(gen);
      for (int j = 0; j < i; ++j) b(i, j) = 0.3 * nd(gen);
    }
  }
  for (Block& b : le)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) b(i, j) = 0.3 * nd(gen);

  BlockTridiag<N> a(num_blocks);
  for (int k = 0; k < num_blocks; ++k) {
    Block s = ld[k] * ld[k].transpose();
    if (k > 0) s += le[k - 1] * le[k - 1].transpose();
    a.add_diag(k, s);
    if (k + 1 < num_blocks) a.add_off(k, ld[k] * le[k].transpose());
  }
  return a;
}

}  // namespace

TEST_CASE("solve matches dense factorization on random SPD systems") {
  std::mt19937_64 gen(7101);
  for (int num_blocks : {1, 2, 3, 10, 50}) {
    const BlockTridiag<3> a = random_spd<3>(num_blocks, gen);
    const BlockCholesky<3> chol(a);
    const Eigen::MatrixXd dense = a.dense();

    Eigen::VectorXd rhs(3 * num_blocks);
    std::normal_distribution<double> nd;
    for (int i = 0; i < rhs.size(); ++i) rhs[i] = nd(gen);

    const Eigen::VectorXd x = chol.solve(rhs);
    const Eigen::VectorXd x_ref = dense.ldlt().solve(rhs);
    CHECK((x - x_ref).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((dense * x - rhs).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("logdet matches dense Cholesky") {
  std::mt19937_64 gen(7102);
  for (int num_blocks : {1, 4, 25}) {
    const BlockTridiag<3> a = random_spd<3>(num_blocks, gen);
    const BlockCholesky<3> chol(a);
    const Eigen::LLT<Eigen::MatrixXd> dense_llt(a.dense());
    double ref = 0.0;
    for (int i = 0; i < 3 * num_blocks; ++i)
      ref += 2.0 * std::log(dense_llt.matrixL()(i, i));
    CHECK(chol.logdet() == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("marginals match the banded blocks of the dense inverse") {
  std::mt19937_64 gen(7103);
  for (int num_blocks : {1, 2, 10, 50}) {
    const BlockTridiag<3> a = random_spd<3>(num_blocks, gen);
    const BlockCholesky<3> chol(a);
    std::vector<Eigen::Matrix3d> sd, so;
    chol.marginals(sd, so);
    REQUIRE(sd.size() == static_cast<size_t>(num_blocks));
    REQUIRE(so.size() == static_cast<size_t>(num_blocks - 1));

    const Eigen::MatrixXd inv = a.dense().inverse();
    for (int k = 0; k < num_blocks; ++k) {
      CHECK((sd[k] - inv.block<3, 3>(3 * k, 3 * k)).lpNorm<Eigen::Infinity>() < 1e-9);
      CHECK((sd[k] - sd[k].transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
      if (k + 1 < num_blocks)
        CHECK((so[k] - inv.block<3, 3>(3 * k, 3 * (k + 1))).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }
}

TEST_CASE("single block reduces to a plain inverse") {
  Eigen::Matrix2d a0;
  a0 << 4.0, 1.0, 1.0, 3.0;
  BlockTridiag<2> a(1);
  a.add_diag(0, a0);
  const BlockCholesky<2> chol(a);
  std::vector<Eigen::Matrix2d> sd, so;
  chol.marginals(sd, so);
  CHECK(so.empty());
  CHECK((sd[0] - a0.inverse()).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(chol.logdet() == doctest::Approx(std::log(a0.determinant())).epsilon(1e-14));
}

TEST_CASE("block-diagonal matrix yields blockwise inverses and zero cross blocks") {
  std::mt19937_64 gen(7104);
  std::normal_distribution<double> nd;
  const int num_blocks = 6;
  BlockTridiag<3> a(num_blocks);
  std::vector<Eigen::Matrix3d> blocks(num_blocks);
  for (int k = 0; k < num_blocks; ++k) {
    Eigen::Matrix3d m = Eigen::Matrix3d::NullaryExpr([&](int, int) { return nd(gen); });
    blocks[k] = m * m.transpose() + Eigen::Matrix3d::Identity();
    a.add_diag(k, blocks[k]);
  }
  const BlockCholesky<3> chol(a);
  std::vector<Eigen::Matrix3d> sd, so;
  chol.marginals(sd, so);
  for (int k = 0; k < num_blocks; ++k)
    CHECK((sd[k] - blocks[k].inverse()).lpNorm<Eigen::Infinity>() < 1e-12);
  for (const Eigen::Matrix3d& s : so) CHECK(s.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("scatter-add accumulates and is order independent") {
  std::mt19937_64 gen(7105);
  std::normal_distribution<double> nd;
  const int num_blocks = 8;
  // random "factor" contributions: (kind, index, block)
  struct Entry {
    bool is_diag;
    int k;
    Eigen::Matrix3d m;
  };
  std::vector<Entry> entries;
  for (int rep = 0; rep < 40; ++rep) {
    Entry e;
    e.is_diag = (rep % 3) != 0;
    e.k = static_cast<int>(gen() % (e.is_diag ? num_blocks : num_blocks - 1));
    e.m = Eigen::Matrix3d::NullaryExpr([&](int, int) { return nd(gen); });
    entries.push_back(e);
  }

  auto assemble = [&](const std::vector<int>& order) {
    BlockTridiag<3> a(num_blocks);
    for (int i : order) {
      if (entries[i].is_diag)
        a.add_diag(entries[i].k, entries[i].m);
      else
        a.add_off(entries[i].k, entries[i].m);
    }
    return a.dense();
  };

  std::vector<int> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  const Eigen::MatrixXd ref = assemble(order);
  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    std::shuffle(order.begin(), order.end(), gen);
    CHECK((assemble(order) - ref).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("blend forms the blockwise affine combination") {
  std::mt19937_64 gen(7106);
  const BlockTridiag<3> a = random_spd<3>(5, gen);
  const BlockTridiag<3> b = random_spd<3>(5, gen);
  const BlockTridiag<3> c = BlockTridiag<3>::blend(0.25, a, 0.75, b);
  CHECK((c.dense() - (0.25 * a.dense() + 0.75 * b.dense())).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("non-SPD input is rejected with the failing block index") {
  BlockTridiag<2> a(3);
  a.add_diag(0, Eigen::Matrix2d::Identity());
  a.add_diag(1, Eigen::Matrix2d::Identity());
  a.add_diag(2, -Eigen::Matrix2d::Identity());  // indefinite tail block
  CHECK_THROWS_AS(BlockCholesky<2>{a}, gvi2d::InfoNotSPD);
  try {
    BlockCholesky<2> chol(a);
  } catch (const gvi2d::InfoNotSPD& e) {
    CHECK(e.block_index == 2);
    CHECK(std::string(e.what()).find("block 2") != std::string::npos);
  }

  // A strong off-diagonal coupling that destroys positive definiteness of the
  // Schur complement must also be caught, at the block where it surfaces.
  BlockTridiag<2> b(2);
  b.add_diag(0, Eigen::Matrix2d::Identity());
  b.add_diag(1, Eigen::Matrix2d::Identity());
  b.add_off(0, 2.0 * Eigen::Matrix2d::Identity());
  try {
    BlockCholesky<2> chol(b);
    CHECK(false);
  } catch (const gvi2d::InfoNotSPD& e) {
    CHECK(e.block_index == 1);
  }
}

TEST_CASE("out-of-range block access throws") {
  BlockTridiag<2> a(3);
  CHECK_THROWS_AS(a.add_diag(3, Eigen::Matrix2d::Identity()), gvi2d::IndexOutOfRange);
  CHECK_THROWS_AS(a.add_diag(-1, Eigen::Matrix2d::Identity()), gvi2d::IndexOutOfRange);
  CHECK_THROWS_AS(a.add_off(2, Eigen::Matrix2d::Identity()), gvi2d::IndexOutOfRange);
  CHECK_THROWS_AS(a.diag(5), gvi2d::IndexOutOfRange);
  CHECK_THROWS_AS(a.off(-1), gvi2d::IndexOutOfRange);
  CHECK_THROWS_AS(BlockTridiag<2>{0}, gvi2d::LengthMismatch);
}

TEST_CASE("solve rejects a mismatched right-hand side") {
  std::mt19937_64 gen(7107);
  const BlockTridiag<3> a = random_spd<3>(4, gen);
  const BlockCholesky<3> chol(a);
  CHECK_THROWS_AS(chol.solve(Eigen::VectorXd::Ones(11)), gvi2d::LengthMismatch);
}
