#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "prototrace/adapt.hpp"
#include "prototrace/error.hpp"

using namespace prototrace;

namespace {

RepresentationSet blobs(std::size_t dim, std::size_t per_class, double shift, std::uint64_t seed,
                        const std::string& prefix) {
  MixtureSpec spec;
  spec.dim = dim;
  for (int c = 0; c < 2; ++c) {
    Vector m = Vector::Constant(static_cast<Eigen::Index>(dim), shift);
    m[0] = c ? 1.5 : -1.5;
    spec.classes.push_back({c ? "B" : "A", {{m, 1.0, per_class}}});
  }
  auto set = synth_mixture(spec, seed);
  std::vector<Item> items;
  for (auto item : set.items()) {
    item.id = prefix + item.id;
    items.push_back(item);
  }
  return {dim, items};
}

double brute_coral(const Matrix& x, const Matrix& y) {
  const double d = static_cast<double>(x.cols());
  return (oracle::covariance(x) - oracle::covariance(y)).squaredNorm() / (4.0 * d * d);
}

}  // namespace

TEST_CASE("mmd2 vanishes on identical samples") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = oracle::random_matrix(rng, 2 + static_cast<Eigen::Index>(rng.index(10)), 1 + static_cast<Eigen::Index>(rng.index(4)));
    CHECK(mmd2(x, x, Kernel::Linear) <= 1e-9);
    CHECK(mmd2(x, x, Kernel::Rbf) <= 1e-9);
  }
}

TEST_CASE("linear mmd2 hand example and identity") {
  CHECK(std::abs(mmd2(Matrix{{0.0}, {2.0}}, Matrix{{1.0}, {1.0}}, Kernel::Linear)) < 1e-15);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = 1 + static_cast<Eigen::Index>(rng.index(5));
    auto x = oracle::random_matrix(rng, 2 + static_cast<Eigen::Index>(rng.index(8)), d);
    auto y = oracle::random_matrix(rng, 2 + static_cast<Eigen::Index>(rng.index(8)), d);
    y.array() += 0.7;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double mx = 0.0, my = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) mx += x(i, j) / static_cast<double>(x.rows());
      for (Eigen::Index i = 0; i < y.rows(); ++i) my += y(i, j) / static_cast<double>(y.rows());
      sum += (mx - my) * (mx - my);
    }
    CHECK(std::abs(mmd2(x, y, Kernel::Linear) - sum) < 1e-10);
  }
}

TEST_CASE("rbf mmd2 against explicit kernel sums") {
  Rng rng(3);
  auto x = oracle::random_matrix(rng, 5, 2), y = oracle::random_matrix(rng, 4, 2);
  const double s = 0.8;
  auto k = [&](const auto& a, const auto& b) { return std::exp(-(a - b).squaredNorm() / (2 * s * s)); };
  double kxx = 0, kyy = 0, kxy = 0;
  for (int i = 0; i < 5; ++i) for (int j = 0; j < 5; ++j) kxx += k(x.row(i), x.row(j)) / 25.0;
  for (int i = 0; i < 4; ++i) for (int j = 0; j < 4; ++j) kyy += k(y.row(i), y.row(j)) / 16.0;
  for (int i = 0; i < 5; ++i) for (int j = 0; j < 4; ++j) kxy += k(x.row(i), y.row(j)) / 20.0;
  CHECK(std::abs(mmd2(x, y, Kernel::Rbf, s) - (kxx + kyy - 2 * kxy)) < 1e-12);
  CHECK(mmd2(x, y, Kernel::Rbf) > 0.0);
  CHECK_THROWS(mmd2(x, oracle::random_matrix(rng, 4, 3), Kernel::Rbf));
  CHECK_THROWS(mmd2(x, y, Kernel::Rbf, -1.0));
}

TEST_CASE("median bandwidth") {
  CHECK(median_bandwidth(Matrix{{0.0}, {1.0}}, Matrix{{3.0}}) == 2.0);
  CHECK(median_bandwidth(Matrix{{1.0}, {1.0}}, Matrix{{1.0}}) == 1.0);
}

TEST_CASE("coral cases") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = oracle::random_matrix(rng, 2 + static_cast<Eigen::Index>(rng.index(8)), 1 + static_cast<Eigen::Index>(rng.index(4)));
    Matrix y = x.rowwise() + oracle::random_matrix(rng, 1, x.cols(), 10.0).row(0);
    CHECK(coral(x, y) <= 1e-12);
  }
  // variance 1 and variance 3 in one dimension
  Matrix a{{-1.0}, {1.0}, {0.0}}, b{{-std::sqrt(3.0)}, {std::sqrt(3.0)}, {0.0}};
  CHECK(coral(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    auto x = oracle::random_matrix(rng, 6, 3), y = oracle::random_matrix(rng, 6, 3, 2.0);
    CHECK(std::abs(coral(x, y) - brute_coral(x, y)) < 1e-10);
  }
  CHECK_THROWS(coral(Matrix{{1.0}}, Matrix{{1.0}, {2.0}}));
  CHECK_THROWS(coral(oracle::random_matrix(rng, 3, 2), oracle::random_matrix(rng, 3, 1)));
}

TEST_CASE("class discrepancy") {
  const Vector a{{1.0, 0.0}}, b{{0.0, 1.0}}, c{{0.3, 0.7}};
  CHECK(class_discrepancy({{a, a}, {c, c}}) == 0.0);
  CHECK(class_discrepancy({{a, b}}) == 2.0);
  const std::vector<std::vector<Vector>> p{{a, b, c}, {c, a, a}};
  const std::vector<std::vector<Vector>> q{{c, a, b}, {a, a, c}};
  CHECK(class_discrepancy(p) == doctest::Approx(class_discrepancy(q)).epsilon(1e-15));
  // pairs: |a-b|=2, |a-c|=1.4, |b-c|=0.6 -> mean 4/3; second sample: 1.4, 1.4, 0 -> 2.8/3
  CHECK(class_discrepancy(p) == doctest::Approx((4.0 / 3.0 + 2.8 / 3.0) / 2.0));
  CHECK_THROWS(class_discrepancy({{a}}));
  CHECK_THROWS(class_discrepancy({{a, Vector{{0.5, 0.2}}}}));
  CHECK_THROWS(class_discrepancy({{a, Vector{{1.0, 0.0, 0.0}}}}));
}

TEST_CASE("discrepancy gradients match finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = oracle::random_matrix(rng, 4, 2), y = oracle::random_matrix(rng, 4, 2);
    y.array() += 0.5;
    for (Kernel kernel : {Kernel::Linear, Kernel::Rbf}) {
      auto g = discrepancy_gradients(x, y, kernel);
      const double s = g.bandwidth;
      auto fx = [&](const Matrix& m) { return mmd2(m, y, kernel, s); };
      auto fy = [&](const Matrix& m) { return mmd2(x, m, kernel, s); };
      CHECK(oracle::max_relative_error(g.mmd2_x, oracle::numeric_gradient(x, fx, 1e-6)) < 1e-4);
      CHECK(oracle::max_relative_error(g.mmd2_y, oracle::numeric_gradient(y, fy, 1e-6)) < 1e-4);
      auto cx = [&](const Matrix& m) { return coral(m, y); };
      auto cy = [&](const Matrix& m) { return coral(x, m); };
      CHECK(oracle::max_relative_error(g.coral_x, oracle::numeric_gradient(x, cx, 1e-6)) < 1e-4);
      CHECK(oracle::max_relative_error(g.coral_y, oracle::numeric_gradient(y, cy, 1e-6)) < 1e-4);
    }
  }
}

TEST_CASE("gradients vanish at stationary points") {
  Rng rng(6);
  auto x = oracle::random_matrix(rng, 5, 3);
  auto g = discrepancy_gradients(x, x, Kernel::Linear);
  CHECK(g.mmd2_x.cwiseAbs().maxCoeff() < 1e-15);
  Matrix shifted = x.array() + 2.0;
  auto h = discrepancy_gradients(x, shifted, Kernel::Linear);
  CHECK(h.coral_x.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(h.coral_y.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single source without discrepancy terms reduces to plain training") {
  auto src = blobs(3, 20, 0.0, 1, "s");
  auto tgt = blobs(3, 20, 2.0, 2, "t").without_labels();
  DAConfig cfg;
  cfg.lambda_feat = 0.0;
  cfg.lambda_class = 0.0;
  cfg.extractor_hidden = {6};
  cfg.train.epochs = 8;
  cfg.train.learning_rate = 0.01;
  cfg.train.dropout_rate = 0.0;
  cfg.train.seed = 4;
  auto da = da_train({src}, {"only"}, tgt, cfg);

  auto composed = init_network({3, 6, 2}, cfg.train.seed, OutputKind::Softmax, {"A", "B"});
  auto plain = train(composed, src, std::nullopt, cfg.train);
  REQUIRE(da.history.size() == plain.history.epochs.size());
  for (std::size_t e = 0; e < da.history.size(); ++e) {
    CHECK(std::abs(da.history[e].classification - plain.history.epochs[e].train_loss) < 1e-9);
  }
}

TEST_CASE("history totals are the weighted sums") {
  auto s1 = blobs(4, 15, 0.0, 3, "a"), s2 = blobs(4, 15, 0.0, 4, "b");
  auto tgt = blobs(4, 15, 3.0, 5, "t").without_labels();
  DAConfig cfg;
  cfg.lambda_feat = 0.7;
  cfg.lambda_class = 0.3;
  cfg.extractor_hidden = {8};
  cfg.head_hidden = {4};
  cfg.train.epochs = 4;
  cfg.train.learning_rate = 0.01;
  auto r = da_train({s1, s2}, {"a", "b"}, tgt, cfg);
  REQUIRE(r.history.size() == 4);
  for (const auto& h : r.history) {
    CHECK(std::abs(h.total - (h.classification + h.lambda_feat * h.feature_discrepancy +
                              h.lambda_class * h.class_discrepancy)) < 1e-9);
  }
  auto again = da_objective(r.model, {s1, s2}, tgt);
  CHECK(std::abs(again.total - r.history.back().total) < 1e-12);
  CHECK(da_train({s1, s2}, {"a", "b"}, tgt, cfg).model == r.model);
}

TEST_CASE("adaptation lowers the feature discrepancy and helps on shifted data") {
  auto s1 = blobs(8, 100, 0.0, 11, "a"), s2 = blobs(8, 100, 0.0, 12, "b");
  auto tgt = blobs(8, 100, 3.0, 13, "t");
  DAConfig cfg;
  cfg.extractor_hidden = {16};
  cfg.train.epochs = 30;
  cfg.train.learning_rate = 0.01;
  cfg.train.seed = 1;
  auto da = da_train({s1, s2}, {"a", "b"}, tgt.without_labels(), cfg);
  cfg.lambda_feat = cfg.lambda_class = 0.0;
  auto base = da_train({s1, s2}, {"a", "b"}, tgt.without_labels(), cfg);
  CHECK(da.history.back().feature_discrepancy < base.history.back().feature_discrepancy);
  CHECK(da_accuracy(da.model, tgt) > da_accuracy(base.model, tgt));
}

TEST_CASE("da_train validation") {
  auto s1 = blobs(3, 5, 0.0, 1, "a");
  auto tgt = blobs(3, 5, 0.0, 2, "t").without_labels();
  DAConfig cfg;
  cfg.train.epochs = 1;
  CHECK_THROWS(da_train({s1}, {"a"}, blobs(4, 5, 0.0, 2, "t"), cfg));
  CHECK_THROWS(da_train({s1}, {"a", "b"}, tgt, cfg));
  CHECK_THROWS(da_train({s1, s1}, {"a", "a"}, tgt, cfg));
  CHECK_THROWS(da_train({}, {}, tgt, cfg));
  CHECK_THROWS(da_train({s1.without_labels()}, {"a"}, tgt, cfg));
  auto other = oracle::set_from_rows(Matrix::Zero(2, 3), {"A", "C"});
  CHECK_THROWS(da_train({s1, other}, {"a", "b"}, tgt, cfg));
  auto odd_target = oracle::set_from_rows(Matrix::Zero(1, 3), {"Q"});
  CHECK_THROWS(da_train({s1}, {"a"}, odd_target, cfg));
}

TEST_CASE("da_predict averages heads") {
  DAConfig cfg;
  cfg.extractor_hidden = {2};
  auto model = init_da_model(2, {"A", "B"}, {"s1", "s2"}, cfg);
  for (auto& h : model.heads) h.layers[0].weights.setZero();
  model.heads[0].layers[0].bias << 3.0, 0.0;
  model.heads[1].layers[0].bias << 0.0, 3.0;
  auto tie = da_predict(model, Vector{{0.3, -0.4}});
  CHECK(tie.averaged[0] == tie.averaged[1]);
  CHECK(tie.label == "A");
  CHECK(tie.per_head.size() == 2);

  model.heads[1].layers[0].bias << 40.0, 0.0;
  model.heads[0].layers[0].bias << 40.0, 0.0;
  auto agree = da_predict(model, Vector{{1.0, 1.0}});
  CHECK(agree.label == "A");

  model.heads[0].layers[0].bias << 0.0, 1.0;
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto p = da_predict(model, oracle::random_matrix(rng, 2, 1).col(0));
    CHECK(std::abs(p.averaged.sum() - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(da_predict(model, Vector{{1.0}}), DimensionError);
}

TEST_CASE("kernel names") {
  CHECK(parse_kernel("rbf") == Kernel::Rbf);
  CHECK(parse_kernel("linear") == Kernel::Linear);
  CHECK(to_string(Kernel::Rbf) == "rbf");
  CHECK_THROWS(parse_kernel("poly"));
}
