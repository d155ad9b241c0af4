#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "prototrace/error.hpp"
#include "prototrace/prototype.hpp"

using namespace prototrace;

namespace {

Center center(const std::string& id, Vector v, const std::string& label) {
  Center c;
  c.center_id = id;
  c.vector = std::move(v);
  c.label = label;
  return c;
}

PrototypeModel random_model(Rng& rng, std::size_t k, std::size_t dim) {
  std::vector<Center> cs;
  for (std::size_t c = 0; c < k; ++c) {
    cs.push_back(center("c" + std::to_string(c), oracle::random_matrix(rng, static_cast<Eigen::Index>(dim), 1).col(0),
                        rng.bernoulli(0.5) ? "PD" : "NPD"));
  }
  return {dim, "m", cs};
}

RepresentationSet line(const std::vector<double>& xs, const std::vector<std::string>& labels) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return oracle::set_from_rows(m, labels);
}

}  // namespace

TEST_CASE("build labels clusters by majority") {
  auto set = line({0.0, 1.0, 2.0, 100.0}, {"PD", "PD", "NPD", "NPD"});
  auto r = lloyd(set, {Vector{{1.0}}, Vector{{100.0}}}, 1e-9, 10);
  auto model = build_prototype_model(r, set, 3, "greek");
  REQUIRE(model.size() == 2);
  CHECK(model.source() == "greek");
  CHECK(model.centers()[0].center_id == "c0");
  CHECK(model.centers()[0].label == "PD");
  CHECK(model.centers()[0].purity == doctest::Approx(2.0 / 3.0));
  CHECK(model.centers()[0].member_count == 3);
  CHECK(model.centers()[1].label == "NPD");
  CHECK(model.centers()[1].purity == 1.0);
  // exemplars ordered by distance to the mean (1.0), ties by id
  CHECK(model.centers()[0].exemplar_ids == std::vector<std::string>{"p1", "p0", "p2"});
}

TEST_CASE("single exemplar is the member nearest the mean") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = oracle::random_matrix(rng, 20, 3);
    std::vector<std::string> labels(20, "A");
    auto set = oracle::set_from_rows(m, labels);
    auto r = cluster(set, 3, static_cast<std::uint64_t>(trial));
    auto model = build_prototype_model(r, set, 1, "m");
    for (std::size_t c = 0; c < r.means.size(); ++c) {
      auto sq = [&](std::size_t i) {
        double d = 0.0;
        for (Eigen::Index j = 0; j < 3; ++j) d += (set[i].vector[j] - r.means[c][j]) * (set[i].vector[j] - r.means[c][j]);
        return d;
      };
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < set.size(); ++i) {
        if (r.assignments[i] == c) best = std::min(best, sq(i));
      }
      REQUIRE(model.centers()[c].exemplar_ids.size() == 1);
      const auto chosen = set.find(model.centers()[c].exemplar_ids[0]);
      REQUIRE(chosen.has_value());
      CHECK(r.assignments[*chosen] == c);
      // a member at the midpoint of two others ties exactly; either is a minimizer
      CHECK(sq(*chosen) <= best * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("five-mode data gives 2 NPD and 3 PD centers") {
  MixtureSpec spec;
  spec.dim = 3;
  MixtureClass pd{"PD", {}}, npd{"NPD", {}};
  for (int m = 0; m < 5; ++m) (m % 2 ? npd : pd).components.push_back({Vector{{12.0 * m, 0.0, 0.0}}, 1.0, 15});
  spec.classes = {npd, pd};
  auto set = synth_mixture(spec, 2);
  auto model = build_prototype_model(cluster(set, 5, 1), set, 3, "m");
  int npd_count = 0, pd_count = 0;
  for (const auto& c : model.centers()) {
    (c.label == "PD" ? pd_count : npd_count)++;
    CHECK(c.purity == 1.0);
  }
  CHECK(npd_count == 2);
  CHECK(pd_count == 3);
}

TEST_CASE("predict basics") {
  PrototypeModel model(1, "m", {center("c0", Vector{{0.0}}, "A"), center("c1", Vector{{10.0}}, "B")});
  auto p = predict(model, Vector{{4.0}});
  CHECK(p.label == "A");
  CHECK(p.center_id == "c0");
  CHECK(p.distance == 4.0);
  CHECK(*p.margin == 2.0);
  CHECK(p.source == "m");

  auto hit = predict(model, Vector{{10.0}});
  CHECK(hit.label == "B");
  CHECK(hit.distance == 0.0);

  PrototypeModel tie(1, "m", {center("c2", Vector{{1.0}}, "B"), center("c1", Vector{{-1.0}}, "A")});
  auto t = predict(tie, Vector{{0.0}});
  CHECK(t.center_id == "c1");
  CHECK(*t.margin == 0.0);

  PrototypeModel one(1, "m", {center("c0", Vector{{3.0}}, "A")});
  CHECK_FALSE(predict(one, Vector{{0.0}}).margin.has_value());

  CHECK_THROWS_AS(predict(model, Vector{{1.0, 2.0}}), DimensionError);
}

TEST_CASE("predict agrees with an exhaustive scan") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = 1 + rng.index(8);
    const auto dim = 1 + rng.index(5);
    auto model = random_model(rng, k, dim);
    Vector q = oracle::random_matrix(rng, static_cast<Eigen::Index>(dim), 1).col(0);
    if (rng.bernoulli(0.1)) q = model.centers()[rng.index(k)].vector;
    std::vector<Vector> vs;
    std::vector<std::string> ids;
    for (const auto& c : model.centers()) {
      vs.push_back(c.vector);
      ids.push_back(c.center_id);
    }
    const auto best = oracle::nearest_center(vs, ids, q);
    CHECK(predict(model, q).center_id == ids[best]);
  }
}

TEST_CASE("adding a farther center does not change the prediction") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto model = random_model(rng, 4, 2);
    Vector q = oracle::random_matrix(rng, 2, 1).col(0);
    auto before = predict(model, q);
    auto cs = model.centers();
    Vector far = q + Vector::Constant(2, 2.0 * before.distance + 1.0);
    cs.push_back(center("c9", far, "Z"));
    auto after = predict(PrototypeModel(2, "m", cs), q);
    CHECK(after.label == before.label);
    CHECK(after.center_id == before.center_id);
  }
}

TEST_CASE("model validation") {
  CHECK_THROWS(PrototypeModel(2, "m", {center("c0", Vector{{0.0}}, "A")}));
  CHECK_THROWS(PrototypeModel(1, "m", {center("c0", Vector{{0.0}}, "A"), center("c0", Vector{{1.0}}, "B")}));
  CHECK_THROWS(PrototypeModel(1, "m", {}));
}

TEST_CASE("explain returns stored provenance") {
  auto c = center("c0", Vector{{0.0}}, "PD");
  c.exemplar_ids = {"z", "a", "m"};
  c.purity = 0.75;
  c.annotation = "stage 2";
  PrototypeModel model(1, "m", {c, center("c1", Vector{{5.0}}, "NPD")});
  auto e = explain(model, predict(model, Vector{{1.0}}));
  CHECK(e.annotation == std::optional<std::string>("stage 2"));
  CHECK(e.exemplar_ids == std::vector<std::string>{"z", "a", "m"});
  CHECK(e.purity == 0.75);
  CHECK(e.distance == 1.0);
  CHECK(*e.margin == 3.0);
  CHECK_FALSE(explain(model, predict(model, Vector{{5.0}})).annotation.has_value());

  Prediction bogus;
  bogus.center_id = "c7";
  CHECK_THROWS_AS(explain(model, bogus), InvalidArgument);
}

TEST_CASE("annotate returns a new model") {
  PrototypeModel model(1, "m", {center("c0", Vector{{0.0}}, "PD")});
  auto a = annotate_center(model, "c0", "first");
  auto b = annotate_center(a, "c0", "second");
  CHECK_FALSE(model.centers()[0].annotation.has_value());
  CHECK(*a.centers()[0].annotation == "first");
  CHECK(*explain(b, predict(b, Vector{{0.0}})).annotation == "second");
  CHECK_THROWS_AS(annotate_center(model, "nope", "x"), InvalidArgument);
}

TEST_CASE("evaluate metrics") {
  PrototypeModel model(1, "m", {center("c0", Vector{{0.0}}, "A"), center("c1", Vector{{10.0}}, "B")});
  auto perfect = evaluate(model, line({0.1, 9.0, -2.0}, {"A", "B", "A"}));
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.macro_f1 == 1.0);
  CHECK_THROWS(evaluate(model, oracle::set_from_rows(Matrix::Zero(2, 2), {"A", "B"})));
  CHECK_THROWS(evaluate(model, line({0.1}, {})));
}

TEST_CASE("metrics from a confusion table") {
  auto m = metrics_from_confusion({{{"A", "A"}, 8}, {{"A", "B"}, 2}, {{"B", "B"}, 9}, {{"B", "A"}, 1}});
  CHECK(m.per_class.at("A").precision == doctest::Approx(8.0 / 9.0));
  CHECK(m.per_class.at("A").recall == doctest::Approx(0.8));
  CHECK(m.per_class.at("A").f1 == doctest::Approx(0.8421052631578947));
  CHECK(m.accuracy == doctest::Approx(17.0 / 20.0));
  CHECK(m.total == 20);
  CHECK(m.per_class.count("C") == 0);
  CHECK(m.macro_f1 == doctest::Approx((m.per_class.at("A").f1 + m.per_class.at("B").f1) / 2));
}

TEST_CASE("evaluate accuracy equals the confusion trace") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto model = random_model(rng, 4, 2);
    std::vector<std::string> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(rng.bernoulli(0.5) ? "PD" : "NPD");
    auto set = oracle::set_from_rows(oracle::random_matrix(rng, 30, 2), labels);
    auto m = evaluate(model, set);
    std::size_t diag = 0;
    for (const auto& [key, count] : m.confusion) diag += key.first == key.second ? count : 0;
    CHECK(m.accuracy == static_cast<double>(diag) / static_cast<double>(m.total));
  }
}
