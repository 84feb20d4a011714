#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "icr/cluster.hpp"
#include "icr/errors.hpp"
#include "oracles.hpp"

using namespace icr;
using namespace icr::test;

TEST_CASE("cosine_distance basics") {
  auto u = make_vector({1.0, 0.0});
  auto v = make_vector({0.0, 1.0});
  auto w = make_vector({-1.0, 0.0});
  CHECK(cosine_distance(u, u) == doctest::Approx(0.0));
  CHECK(cosine_distance(u, v) == doctest::Approx(1.0));
  CHECK(cosine_distance(u, w) == doctest::Approx(2.0));
  CHECK(cosine_distance(u, make_vector({5.0, 0.0})) == doctest::Approx(0.0));

  CHECK_THROWS_AS(cosine_distance(u, make_vector({1.0, 2.0, 3.0})), DimensionMismatch);
  CHECK_THROWS_AS(cosine_distance(u, make_vector({0.0, 0.0})), ZeroVector);
}

TEST_CASE("two vectors merge once at their cosine distance") {
  auto a = make_vector({1.0, 0.0});
  auto b = make_vector({1.0, 1.0});
  Dendrogram d = build_dendrogram({a, b});
  REQUIRE(d.merges.size() == 1);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[0].node_id == 2);
  CHECK(d.merges[0].height == doctest::Approx(cosine_distance(a, b)));
}

TEST_CASE("three-point fixture: close pair first, then the far point at the average") {
  // a, b in the xy-plane at cosine distance 0.1; c off-plane at exactly 0.9
  // from both (placed over the a-b bisector).
  double alpha = std::acos(0.9);
  double half = alpha / 2.0;
  double psi = std::acos(0.1 / std::cos(half));
  EmbeddingVector a = make_vector({1.0, 0.0, 0.0});
  EmbeddingVector b = make_vector({std::cos(alpha), std::sin(alpha), 0.0});
  EmbeddingVector c = make_vector({std::cos(psi) * std::cos(half),
                                   std::cos(psi) * std::sin(half), std::sin(psi)});
  REQUIRE(cosine_distance(a, b) == doctest::Approx(0.1).epsilon(1e-12));
  REQUIRE(cosine_distance(a, c) == doctest::Approx(0.9).epsilon(1e-12));
  REQUIRE(cosine_distance(b, c) == doctest::Approx(0.9).epsilon(1e-12));

  Dendrogram d = build_dendrogram({a, b, c});
  REQUIRE(d.merges.size() == 2);
  CHECK(d.merges[0].left == 0);
  CHECK(d.merges[0].right == 1);
  CHECK(d.merges[0].height == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d.merges[1].left == 2);
  CHECK(d.merges[1].right == 3);
  CHECK(d.merges[1].height == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("merge heights match the brute-force oracle on random instances") {
  std::mt19937_64 gen(20260809);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 2 + static_cast<int>(gen() % 11);  // 2..12
    int dim = 3 + static_cast<int>(gen() % 6);
    std::vector<EmbeddingVector> vectors;
    for (int i = 0; i < n; ++i) vectors.push_back(random_vector(gen, dim));

    Dendrogram d = build_dendrogram(vectors);
    auto expected = oracle_average_linkage(vectors);
    REQUIRE(d.merges.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(d.merges[i].height == doctest::Approx(expected[i].height).epsilon(1e-9));
      // random reals are tie-free, so partners must agree too
      CHECK(d.merges[i].left == expected[i].left);
      CHECK(d.merges[i].right == expected[i].right);
    }
  }
}

TEST_CASE("cut at zero yields singletons; cut at max height yields one cluster") {
  std::mt19937_64 gen(99);
  std::vector<EmbeddingVector> vectors;
  for (int i = 0; i < 9; ++i) vectors.push_back(random_vector(gen, 5));
  Dendrogram d = build_dendrogram(vectors);

  ClusterCut fine = cut_dendrogram(d, 0.0);
  CHECK(fine.clusters.size() == 9);
  for (const auto& c : fine.clusters) CHECK(c.members.size() == 1);

  ClusterCut coarse = cut_dendrogram(d, d.max_height());
  REQUIRE(coarse.clusters.size() == 1);
  CHECK(coarse.clusters[0].members.size() == 9);

  CHECK_THROWS_AS(cut_dendrogram(d, -0.1), InvalidArgument);
}

namespace {

std::set<std::vector<std::string>> partition_signature(const ClusterCut& cut,
                                                       const std::vector<std::string>& labels) {
  std::set<std::vector<std::string>> sig;
  for (const auto& c : cut.clusters) {
    std::vector<std::string> names;
    for (int m : c.members) names.push_back(labels[m]);
    std::sort(names.begin(), names.end());
    sig.insert(names);
  }
  return sig;
}

}  // namespace

TEST_CASE("coarsening: every cluster at t1 < t2 is inside some t2 cluster") {
  std::mt19937_64 gen(4242);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 3 + static_cast<int>(gen() % 14);
    std::vector<EmbeddingVector> vectors;
    for (int i = 0; i < n; ++i) vectors.push_back(random_vector(gen, 4));
    Dendrogram d = build_dendrogram(vectors);
    double max_h = d.max_height();
    double t1 = uniform01(gen) * max_h;
    double t2 = t1 + uniform01(gen) * (max_h - t1);

    ClusterCut fine = cut_dendrogram(d, t1);
    ClusterCut coarse = cut_dendrogram(d, t2);
    CHECK(coarse.clusters.size() <= fine.clusters.size());

    std::vector<int> coarse_of(n, -1);
    for (std::size_t c = 0; c < coarse.clusters.size(); ++c) {
      for (int m : coarse.clusters[c].members) coarse_of[m] = static_cast<int>(c);
    }
    for (const auto& c : fine.clusters) {
      int target = coarse_of[c.members[0]];
      for (int m : c.members) CHECK(coarse_of[m] == target);
    }

    // both cuts partition the leaves
    for (const ClusterCut* cut : {&fine, &coarse}) {
      std::vector<int> seen(n, 0);
      for (const auto& c : cut->clusters) {
        for (int m : c.members) ++seen[m];
      }
      for (int count : seen) CHECK(count == 1);
    }
  }
}

TEST_CASE("permuting tie-free input yields the same partition") {
  std::mt19937_64 gen(31337);
  int n = 12;
  std::vector<EmbeddingVector> vectors;
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) {
    vectors.push_back(random_vector(gen, 6));
    labels.push_back("q" + std::to_string(i));
  }
  Dendrogram d = build_dendrogram(vectors);
  double threshold = 0.6 * d.max_height();
  auto base = partition_signature(cut_dendrogram(d, threshold, "", &labels), labels);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[gen() % (i + 1)]);
    std::vector<EmbeddingVector> pv;
    std::vector<std::string> pl;
    for (std::size_t i : perm) {
      pv.push_back(vectors[i]);
      pl.push_back(labels[i]);
    }
    Dendrogram pd = build_dendrogram(pv);
    auto sig = partition_signature(cut_dendrogram(pd, threshold, "", &pl), pl);
    CHECK(sig == base);
  }
}

TEST_CASE("cluster ids hash sorted member labels and stay stable") {
  auto a = make_vector({1.0, 0.0});
  auto b = make_vector({0.99, 0.141067359796659});  // close to a
  auto c = make_vector({-1.0, 0.02});
  std::vector<std::string> labels = {"qa", "qb", "qc"};
  Dendrogram d = build_dendrogram({a, b, c});
  ClusterCut cut = cut_dendrogram(d, 0.5, "tag", &labels);
  REQUIRE(cut.clusters.size() == 2);
  CHECK(cut.threshold_id == "tag");

  // same partition from permuted input -> same ids
  std::vector<std::string> labels2 = {"qc", "qb", "qa"};
  Dendrogram d2 = build_dendrogram({c, b, a});
  ClusterCut cut2 = cut_dendrogram(d2, 0.5, "tag", &labels2);
  std::set<std::string> ids1, ids2;
  for (const auto& cl : cut.clusters) ids1.insert(cl.cluster_id);
  for (const auto& cl : cut2.clusters) ids2.insert(cl.cluster_id);
  CHECK(ids1 == ids2);
}

TEST_CASE("silhouette: two tight, well-separated pairs approach 1") {
  // pairs on the unit circle: diameter angle 0.02 rad, separation ~ 1.2 rad
  auto at = [](double theta) { return make_vector({std::cos(theta), std::sin(theta)}); };
  std::vector<EmbeddingVector> vectors = {at(0.0), at(0.02), at(1.2), at(1.22)};
  Dendrogram d = build_dendrogram(vectors);
  ClusterCut cut = cut_dendrogram(d, 0.01);
  REQUIRE(cut.clusters.size() == 2);

  // independent hand computation from the s(i) definition
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    int own = i < 2 ? (1 - i) : (5 - i);  // the co-member
    double a = oracle_cosine(vectors[i], vectors[own]);
    double b = 0.0;
    for (int j = 0; j < 4; ++j) {
      if ((j < 2) != (i < 2)) b += oracle_cosine(vectors[i], vectors[j]);
    }
    b /= 2.0;
    expected += (b - a) / std::max(a, b);
  }
  expected /= 4.0;

  ClusterStats stats = cluster_stats(cut, vectors);
  REQUIRE(stats.silhouette.has_value());
  CHECK(*stats.silhouette == doctest::Approx(expected).epsilon(1e-12));
  CHECK(*stats.silhouette > 0.9);
  CHECK(stats.n_clusters == 2);
  CHECK(stats.mean_size == doctest::Approx(2.0));
  CHECK(stats.std_size == doctest::Approx(0.0));
  CHECK(stats.max_size == 2);
}

TEST_CASE("silhouette conventions: singletons and degenerate cuts") {
  std::mt19937_64 gen(5);
  std::vector<EmbeddingVector> vectors;
  for (int i = 0; i < 6; ++i) vectors.push_back(random_vector(gen, 4));
  Dendrogram d = build_dendrogram(vectors);

  ClusterCut singletons = cut_dendrogram(d, 0.0);
  ClusterStats stats = cluster_stats(singletons, vectors);
  CHECK(!stats.silhouette.has_value());
  CHECK(stats.mean_size == doctest::Approx(1.0));
  CHECK(stats.std_size == doctest::Approx(0.0));

  ClusterCut one = cut_dendrogram(d, d.max_height());
  CHECK(!cluster_stats(one, vectors).silhouette.has_value());

  // a point in a singleton cluster scores exactly 0: first two leaves share
  // a cluster, the rest stay singleton
  ClusterCut manual;
  manual.threshold = 0.0;
  manual.threshold_id = "manual";
  manual.clusters.push_back({"m0", {0, 1}});
  for (int i = 2; i < 6; ++i) {
    manual.clusters.push_back({"m" + std::to_string(i), {i}});
  }
  auto values = silhouette_values(manual, vectors);
  for (int i = 2; i < 6; ++i) CHECK(values[i] == 0.0);
}

TEST_CASE("silhouette values stay within [-1, 1] on random cuts") {
  std::mt19937_64 gen(777);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 4 + static_cast<int>(gen() % 12);
    std::vector<EmbeddingVector> vectors;
    for (int i = 0; i < n; ++i) vectors.push_back(random_vector(gen, 3));
    Dendrogram d = build_dendrogram(vectors);
    ClusterCut cut = cut_dendrogram(d, uniform01(gen) * d.max_height());
    if (cut.clusters.size() < 2) continue;
    for (double s : silhouette_values(cut, vectors)) {
      CHECK(s >= -1.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("monotonicity violations in loaded dendrograms raise a diagnostic") {
  nlohmann::json j = {{"n_leaves", 3},
                      {"merges", {{0, 1, 0.5, 3}, {2, 3, 0.2, 4}}}};
  CHECK_THROWS_AS(dendrogram_from_json(j), MonotonicityViolation);

  // child appearing twice
  nlohmann::json bad_child = {{"n_leaves", 3},
                              {"merges", {{0, 1, 0.1, 3}, {1, 3, 0.2, 4}}}};
  CHECK_THROWS_AS(dendrogram_from_json(bad_child), InvalidArgument);
}

TEST_CASE("leaf limit is enforced") {
  std::mt19937_64 gen(1);
  std::vector<EmbeddingVector> vectors;
  for (int i = 0; i < 6; ++i) vectors.push_back(random_vector(gen, 3));
  DendrogramOptions options;
  options.leaf_limit = 5;
  CHECK_THROWS_AS(build_dendrogram(vectors, options), LeafLimitExceeded);
  CHECK_THROWS_AS(build_dendrogram({vectors[0]}), InvalidArgument);
}

TEST_CASE("dendrogram and cut files round-trip") {
  TempDir tmp("cluster-io");
  std::mt19937_64 gen(2024);
  std::vector<EmbeddingVector> vectors;
  std::vector<std::string> labels;
  for (int i = 0; i < 8; ++i) {
    vectors.push_back(random_vector(gen, 4));
    labels.push_back("q" + std::to_string(i));
  }
  Dendrogram d = build_dendrogram(vectors);
  Dendrogram back = dendrogram_from_json(dendrogram_to_json(d));
  REQUIRE(back.merges.size() == d.merges.size());
  for (std::size_t i = 0; i < d.merges.size(); ++i) {
    CHECK(back.merges[i].left == d.merges[i].left);
    CHECK(back.merges[i].right == d.merges[i].right);
    CHECK(back.merges[i].height == d.merges[i].height);
  }

  ClusterCut cut = cut_dendrogram(d, 0.4 * d.max_height(), "", &labels);
  auto path = tmp.path() / "cut.jsonl";
  write_cut_jsonl(path, cut, labels);
  auto loaded = read_cut_jsonl(path);
  REQUIRE(loaded.size() == cut.clusters.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].cluster_id == cut.clusters[i].cluster_id);
    REQUIRE(loaded[i].member_ids.size() == cut.clusters[i].members.size());
    for (std::size_t m = 0; m < loaded[i].member_ids.size(); ++m) {
      CHECK(loaded[i].member_ids[m] == labels[cut.clusters[i].members[m]]);
    }
  }
}

TEST_CASE("threshold ids format compactly") {
  CHECK(threshold_id_for(0.177) == "t0.177");
  CHECK(threshold_id_for(0.325) == "t0.325");
  CHECK(threshold_id_for(0.0) == "t0");
}

TEST_CASE("n_clusters is non-increasing in the threshold") {
  std::mt19937_64 gen(88);
  std::vector<EmbeddingVector> vectors;
  for (int i = 0; i < 15; ++i) vectors.push_back(random_vector(gen, 4));
  Dendrogram d = build_dendrogram(vectors);
  std::size_t prev = vectors.size() + 1;
  for (double f : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    ClusterCut cut = cut_dendrogram(d, f * d.max_height());
    CHECK(cut.clusters.size() <= prev);
    prev = cut.clusters.size();
  }
}
