#include <cmath>

#include <gtest/gtest.h>

#include "cpath/contrastive.hpp"
#include "cpath/errors.hpp"
#include "cpath/gradcheck.hpp"
#include "cpath/ops.hpp"
#include "cpath/rng.hpp"

using namespace cpath;
using namespace cpath::contrastive;

namespace {

std::vector<std::vector<double>> random_unit_rows(int rows, int dim, RngStream& rng) {
  std::vector<std::vector<double>> z(rows, std::vector<double>(dim));
  for (auto& r : z) {
    double n = 0;
    for (auto& v : r) {
      v = rng.normal();
      n += v * v;
    }
    for (auto& v : r) v /= std::sqrt(n);
  }
  return z;
}

tg::Tensor64 to_tensor(const std::vector<std::vector<double>>& z, bool grad = false) {
  std::vector<double> flat;
  for (const auto& r : z) flat.insert(flat.end(), r.begin(), r.end());
  return tg::Tensor64::from({static_cast<std::int64_t>(z.size()), static_cast<std::int64_t>(z[0].size())}, flat, grad);
}

double loss_of(const std::vector<std::vector<double>>& z, double tau) {
  return nt_xent(ContrastiveBatch<double>::adjacent_pairs(to_tensor(z), tau)).item();
}

}  // namespace

TEST(Similarity, Examples) {
  auto s = similarity_matrix(tg::Tensor64::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s[i * 3 + j], i == j ? 1.0 : 0.0, 1e-15);
  auto d = similarity_matrix(tg::Tensor64::from({3, 2}, {0.6, 0.8, 1, 0, 0.6, 0.8}));
  EXPECT_NEAR(d[0 * 3 + 2], 1.0, 1e-15);

  RngStream rng{1};
  std::vector<double> v(12);
  for (auto& x : v) x = rng.uniform(-1, 1);
  auto m = similarity_matrix(tg::Tensor64::from({4, 3}, v));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (int k = 0; k < 3; ++k) {
        dot += v[i * 3 + k] * v[j * 3 + k];
        ni += v[i * 3 + k] * v[i * 3 + k];
        nj += v[j * 3 + k] * v[j * 3 + k];
      }
      EXPECT_NEAR(m[i * 4 + j], dot / std::sqrt(ni * nj), 1e-6);
    }
}

TEST(NtXent, SinglePairIsZero) {
  RngStream rng{2};
  for (double tau : {0.05, 0.1, 1.0}) {
    auto z = random_unit_rows(2, 5, rng);
    EXPECT_EQ(loss_of(z, tau), 0.0);
    EXPECT_EQ(nt_xent_reference(z, adjacent_pairing(2), tau), 0.0L);
  }
}

TEST(NtXent, EqualSimilaritiesGiveLogTwoNMinusOne) {
  for (int rows : {4, 8, 16}) {
    std::vector<std::vector<double>> z(rows, std::vector<double>{0.6, 0.8});
    for (double tau : {0.05, 0.1, 0.5}) EXPECT_NEAR(loss_of(z, tau), std::log(rows - 1.0), 1e-9);
  }
  std::vector<std::vector<double>> z(4, std::vector<double>{1, 0});
  EXPECT_NEAR(loss_of(z, 0.1), 1.098612, 1e-6);
}

TEST(NtXent, ExplicitUnitVectors) {
  const std::vector<std::vector<double>> z{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  // every anchor: positive sim 1, two negatives at sim 0
  const long double expected = std::log1p(2.0L * std::exp(-10.0L));
  EXPECT_NEAR(loss_of(z, 0.1), static_cast<double>(expected), 1e-12);
  EXPECT_NEAR(static_cast<double>(nt_xent_reference(z, adjacent_pairing(4), 0.1)), static_cast<double>(expected), 1e-15);
}

TEST(NtXent, AgreesWithReference) {
  RngStream rng{3};
  for (int t = 0; t < 100; ++t) {
    const int rows = 4 << (t % 3);
    const int dim = t % 2 ? 16 : 3;
    const double tau = t % 4 == 0 ? 0.05 : 0.1;
    auto z = random_unit_rows(rows, dim, rng);
    const double ref = static_cast<double>(nt_xent_reference(z, adjacent_pairing(rows), tau));
    EXPECT_LE(std::abs(loss_of(z, tau) - ref), 1e-6 * std::abs(ref));
    const double ref2 = static_cast<double>(nt_xent_reference(z, adjacent_pairing(rows), 2 * tau));
    EXPECT_LE(std::abs(loss_of(z, 2 * tau) - ref2), 1e-6 * std::abs(ref2));
  }
}

TEST(NtXent, CustomPairingMatchesReference) {
  RngStream rng{4};
  auto z = random_unit_rows(6, 4, rng);
  const std::vector<std::size_t> partner{3, 5, 4, 0, 2, 1};
  ContrastiveBatch<double> b{to_tensor(z), partner, 0.2};
  EXPECT_NEAR(nt_xent(b).item(), static_cast<double>(nt_xent_reference(z, partner, 0.2)), 1e-12);
  b.partner = {1, 0, 2, 5, 4, 3};  // fixed point at 2
  EXPECT_THROW(b.validate(), ContractError);
}

TEST(NtXent, PairPermutationInvariance) {
  RngStream rng{5};
  auto z = random_unit_rows(8, 6, rng);
  const double base = loss_of(z, 0.1);
  std::vector<std::vector<double>> moved{z[6], z[7], z[2], z[3], z[0], z[1], z[4], z[5]};
  EXPECT_NEAR(loss_of(moved, 0.1), base, 1e-12);
  std::vector<std::vector<double>> swapped{z[1], z[0], z[3], z[2], z[5], z[4], z[7], z[6]};
  EXPECT_NEAR(loss_of(swapped, 0.1), base, 1e-12);
}

TEST(NtXent, NonNegative) {
  RngStream rng{6};
  for (int t = 0; t < 50; ++t) EXPECT_GE(loss_of(random_unit_rows(8, 4, rng), 0.1), 0.0);
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  RngStream rng{7};
  for (int rows : {4, 8, 16})
    for (double tau : {0.05, 0.1, 0.5}) {
      auto z = to_tensor(random_unit_rows(rows, 5, rng), true);
      auto f = [&] { return nt_xent(ContrastiveBatch<double>::adjacent_pairs(tg::l2_normalize(z, 1e-12), tau)); };
      auto rep = tg::grad_check(f, {z}, 1e-5);
      EXPECT_TRUE(rep.passed) << rows << " " << tau << " " << rep.max_rel_error();
    }
}

TEST(NtXent, HardNegativeWeighting) {
  // anchor 0, positive 1, strong negative 2 (0.9), weak negative 3 (0.0)
  const std::vector<double> row{1.0, 0.95, 0.9, 0.0};
  double previous = 0;
  for (double tau : {1.0, 0.5, 0.2, 0.1, 0.05}) {
    auto w = anchor_weights(row, 0, tau);
    const auto terms = denominator_terms(0, adjacent_pairing(4));
    double strong = 0, weak = 0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i].row == 2) strong = w[i];
      if (terms[i].row == 3) weak = w[i];
    }
    const double ratio = strong / weak;
    EXPECT_GT(ratio, previous);
    previous = ratio;
  }
}

TEST(NtXent, DenominatorTermCount) {
  for (std::size_t rows : {4u, 8u, 16u, 64u}) {
    const auto partner = adjacent_pairing(rows);
    for (std::size_t a = 0; a < rows; ++a) {
      const auto terms = denominator_terms(a, partner);
      std::size_t positives = 0, negatives = 0;
      for (const auto& t : terms) {
        EXPECT_NE(t.row, a);
        (t.positive ? positives : negatives)++;
      }
      EXPECT_EQ(positives, 1u);
      EXPECT_EQ(negatives, 2 * (rows / 2 - 1));
    }
  }
}
