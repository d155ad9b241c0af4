#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "prototrace/error.hpp"
#include "prototrace/unify.hpp"

using namespace prototrace;

namespace {

double reconstruction_error(const Projection& p, const RepresentationSet& set) {
  double e = 0.0;
  for (const auto& item : set.items()) e += (pca_reconstruct(p, pca_project(p, item.vector)) - item.vector).squaredNorm();
  return e;
}

// Applies the "largest-magnitude entry positive" sign rule to a column.
Vector canonical(Vector v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return v[best] < 0 ? Vector(-v) : v;
}

PrototypeModel random_model(Rng& rng, std::size_t k, std::size_t dim, const std::string& source) {
  std::vector<Center> cs;
  for (std::size_t c = 0; c < k; ++c) {
    Center ctr;
    ctr.center_id = "c" + std::to_string(c);
    ctr.vector = oracle::random_matrix(rng, static_cast<Eigen::Index>(dim), 1).col(0);
    ctr.label = c % 2 ? "PD" : "NPD";
    ctr.exemplar_ids = {"e" + std::to_string(c)};
    ctr.purity = 0.5 + 0.1 * static_cast<double>(c);
    cs.push_back(ctr);
  }
  return {dim, source, cs};
}

}  // namespace

TEST_CASE("rank-one data reconstructs exactly from one component") {
  Matrix m(6, 3);
  const Vector dir{{1.0, -2.0, 0.5}}, base{{3.0, 1.0, -1.0}};
  for (int i = 0; i < 6; ++i) m.row(i) = (base + (i * 0.7 - 1.3) * dir).transpose();
  auto set = oracle::set_from_rows(m);
  auto p = pca_fit(set, 1);
  CHECK(reconstruction_error(p, set) < 1e-16);
}

TEST_CASE("eigenpairs match the Jacobi oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = oracle::random_matrix(rng, 10, 5);
    m.col(1) *= 3.0;
    auto set = oracle::set_from_rows(m);
    auto result = pca_spectrum(set, 5);
    auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(m));
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(result.eigenvalues[static_cast<std::size_t>(k)] - values[static_cast<std::size_t>(k)]) < 1e-8);
      const Vector got = result.projection.components.row(k).transpose();
      CHECK((got - canonical(vectors.col(k))).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("full basis reconstructs any set") {
  Rng rng(2);
  auto set = oracle::set_from_rows(oracle::random_matrix(rng, 12, 4, 5.0));
  CHECK(reconstruction_error(pca_fit(set, 4), set) < 1e-16 * 1e4);
}

TEST_CASE("components are orthonormal and scores uncorrelated") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = oracle::random_matrix(rng, 30, 6);
    m.col(2) += 2.0 * m.col(0);
    auto set = oracle::set_from_rows(m);
    auto r = pca_spectrum(set, 4);
    const Matrix& c = r.projection.components;
    CHECK((c * c.transpose() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    auto projected = project_set(r.projection, set).matrix();
    auto cov = oracle::covariance(projected);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        if (a != b) CHECK(std::abs(cov(a, b)) < 1e-6 * r.eigenvalues[0]);
      }
    }
  }
}

TEST_CASE("reconstruction error is non-increasing in out_dim") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto set = oracle::set_from_rows(oracle::random_matrix(rng, 15, 6));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 6; ++k) {
      const double e = reconstruction_error(pca_fit(set, k), set);
      CHECK(e <= prev + 1e-9);
      prev = e;
    }
  }
}

TEST_CASE("pca argument errors") {
  Rng rng(5);
  auto set = oracle::set_from_rows(oracle::random_matrix(rng, 4, 6));
  CHECK_THROWS_AS(pca_fit(set, 0), InvalidArgument);
  CHECK_THROWS_AS(pca_fit(set, 4), InvalidArgument);
  CHECK_NOTHROW(pca_fit(set, 3));
  CHECK_THROWS_AS(pca_fit(oracle::set_from_rows(oracle::random_matrix(rng, 1, 2)), 1), InvalidArgument);
  auto p = pca_fit(set, 2);
  CHECK_THROWS_AS(pca_project(p, Vector::Zero(5)), DimensionError);
  CHECK_THROWS_AS(pca_reconstruct(p, Vector::Zero(3)), DimensionError);
}

TEST_CASE("projection arithmetic") {
  Rng rng(6);
  auto m = oracle::random_matrix(rng, 20, 4);
  auto set = oracle::set_from_rows(m);
  auto p = pca_fit(set, 4);
  CHECK(pca_project(p, p.mean).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < 20; ++i) {
    const Vector x = m.row(i).transpose();
    const Vector y = pca_project(p, x);
    CHECK(std::abs(y.norm() - (x - p.mean).norm()) < 1e-9);
  }
  auto small = pca_fit(set, 2);
  const Vector x = oracle::random_matrix(rng, 4, 1).col(0);
  const Vector y = pca_project(small, x);
  for (int r = 0; r < 2; ++r) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += small.components(r, j) * (x[j] - small.mean[j]);
    CHECK(std::abs(y[r] - s) < 1e-12);
  }
}

TEST_CASE("align five 128-wide centers to 32") {
  Rng rng(7);
  auto data = oracle::set_from_rows(oracle::random_matrix(rng, 60, 128));
  auto p = pca_fit(data, 32);
  auto model = random_model(rng, 5, 128, "greek");
  model = annotate_center(model, "c2", "stage 2");
  auto aligned = align_model(model, p);
  CHECK(aligned.dim() == 32);
  CHECK(aligned.size() == 5);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto& a = aligned.centers()[c];
    const auto& o = model.centers()[c];
    CHECK(a.vector.size() == 32);
    CHECK(a.vector == pca_project(p, o.vector));
    CHECK(a.label == o.label);
    CHECK(a.purity == o.purity);
    CHECK(a.exemplar_ids == o.exemplar_ids);
    CHECK(a.annotation == o.annotation);
    CHECK(a.center_id == o.center_id);
  }
  CHECK_THROWS_AS(align_model(random_model(rng, 2, 10, "x"), p), DimensionError);
}

TEST_CASE("full-width alignment preserves every prediction") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto data = oracle::set_from_rows(oracle::random_matrix(rng, 20, 5));
    auto p = pca_fit(data, 5);
    auto model = random_model(rng, 6, 5, "m");
    auto aligned = align_model(model, p);
    for (int q = 0; q < 50; ++q) {
      const Vector x = oracle::random_matrix(rng, 5, 1).col(0);
      CHECK(predict(aligned, pca_project(p, x)).center_id == predict(model, x).center_id);
    }
  }
}

TEST_CASE("merge counts and validation") {
  Rng rng(9);
  auto u = merge_models({{"A", random_model(rng, 5, 32, "A"), std::nullopt},
                         {"B", random_model(rng, 5, 32, "B"), std::nullopt}});
  CHECK(u.center_count() == 10);
  CHECK(u.dim() == 32);
  CHECK_THROWS_AS(merge_models({{"A", random_model(rng, 5, 32, "A"), std::nullopt},
                                {"B", random_model(rng, 5, 16, "B"), std::nullopt}}),
                  DimensionError);
  CHECK_THROWS_AS(merge_models({{"A", random_model(rng, 2, 3, "A"), std::nullopt},
                                {"A", random_model(rng, 2, 3, "A"), std::nullopt}}),
                  InvalidArgument);
  CHECK_THROWS(merge_models({}));
}

TEST_CASE("projected branch dims are checked after projection") {
  Rng rng(10);
  auto data = oracle::set_from_rows(oracle::random_matrix(rng, 40, 12));
  auto u = merge_models({{"A", random_model(rng, 3, 12, "A"), pca_fit(data, 4)},
                         {"B", random_model(rng, 3, 4, "B"), std::nullopt}});
  CHECK(u.dim() == 4);
  const Vector raw = oracle::random_matrix(rng, 12, 1).col(0);
  CHECK(branch_embedding(u, "A", raw) == pca_project(*u.find("A")->projection, raw));
}

TEST_CASE("single-branch merge behaves like the model") {
  Rng rng(11);
  auto model = random_model(rng, 5, 3, "solo");
  auto u = merge_models({{"solo", model, std::nullopt}});
  for (int q = 0; q < 200; ++q) {
    const Vector x = oracle::random_matrix(rng, 3, 1).col(0);
    auto a = unified_predict(u, {{"solo", x}});
    auto b = predict(model, x);
    CHECK(a.center_id == b.center_id);
    CHECK(a.label == b.label);
    CHECK(a.distance == b.distance);
    CHECK(a.source == "solo");
  }
}

TEST_CASE("unified prediction arbitrates by global distance") {
  auto make = [](const std::string& src, double at, const std::string& label) {
    Center c;
    c.center_id = "c0";
    c.vector = Vector{{at}};
    c.label = label;
    return PrototypeModel(1, src, {c});
  };
  auto u = merge_models({{"A", make("A", 0.0, "NPD"), std::nullopt}, {"B", make("B", 0.0, "PD"), std::nullopt}});
  auto p = unified_predict(u, {{"A", Vector{{3.0}}}, {"B", Vector{{-2.0}}}});
  CHECK(p.label == "PD");
  CHECK(p.source == "B");
  CHECK(p.distance == 2.0);
  auto exact = unified_predict(u, {{"A", Vector{{0.0}}}, {"B", Vector{{0.0}}}});
  CHECK(exact.source == "A");
  CHECK(exact.distance == 0.0);

  auto swapped = merge_models({{"B", make("B", 0.0, "PD"), std::nullopt}, {"A", make("A", 0.0, "NPD"), std::nullopt}});
  CHECK(unified_predict(swapped, {{"A", Vector{{1.0}}}, {"B", Vector{{1.0}}}}).source == "A");

  CHECK_THROWS_AS(unified_predict(u, {{"A", Vector{{0.0}}}}), InvalidArgument);
  CHECK_THROWS_AS(unified_predict(u, {{"A", Vector{{0.0}}}, {"B", Vector{{0.0}}}, {"C", Vector{{0.0}}}}),
                  InvalidArgument);
  CHECK_THROWS_AS(unified_predict(u, {{"A", Vector{{0.0, 1.0}}}, {"B", Vector{{0.0}}}}), DimensionError);
}
