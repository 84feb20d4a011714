#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "icr/errors.hpp"
#include "icr/retrieve.hpp"
#include "oracles.hpp"

using namespace icr;
using namespace icr::test;

namespace {

std::map<std::string, EmbeddingVector> embeddings_for(std::mt19937_64& gen, int count, int dim,
                                                      const std::string& prefix = "q") {
  std::map<std::string, EmbeddingVector> out;
  for (int i = 0; i < count; ++i) {
    out[prefix + std::to_string(i)] = random_vector(gen, dim);
  }
  return out;
}

}  // namespace

TEST_CASE("singleton cluster representative equals the normalized member") {
  std::mt19937_64 gen(1);
  auto embeddings = embeddings_for(gen, 1, 6);
  RetrievalIndex index = build_index({{"c0", {"q0"}}}, embeddings, "t0");
  REQUIRE(index.entries.size() == 1);
  auto expected = embeddings.at("q0").normalized();
  for (int i = 0; i < 6; ++i) {
    CHECK(index.entries[0].representative.values[i] == doctest::Approx(expected.values[i]));
  }
  CHECK(index.entries[0].representative.norm() == doctest::Approx(1.0));
}

TEST_CASE("two identical members: representative equals that normalized vector") {
  std::map<std::string, EmbeddingVector> embeddings;
  embeddings["q0"] = make_vector({2.0, 0.0});
  embeddings["q1"] = make_vector({2.0, 0.0});
  RetrievalIndex index = build_index({{"c0", {"q0", "q1"}}}, embeddings, "t0");
  CHECK(index.entries[0].representative.values[0] == doctest::Approx(1.0));
  CHECK(index.entries[0].representative.values[1] == doctest::Approx(0.0));
}

TEST_CASE("antipodal members produce a degenerate centroid error") {
  std::map<std::string, EmbeddingVector> embeddings;
  embeddings["q0"] = make_vector({1.0, 0.0});
  embeddings["q1"] = make_vector({-1.0, 0.0});
  CHECK_THROWS_AS(build_index({{"c0", {"q0", "q1"}}}, embeddings, "t0"), DegenerateCentroid);
}

TEST_CASE("a missing member embedding is reported by question id") {
  std::mt19937_64 gen(2);
  auto embeddings = embeddings_for(gen, 2, 4);
  try {
    build_index({{"c0", {"q0", "q1", "q-absent"}}}, embeddings, "t0");
    FAIL("expected MissingEmbedding");
  } catch (const MissingEmbedding& e) {
    CHECK(std::string(e.what()).find("q-absent") != std::string::npos);
  }
}

TEST_CASE("self-match query returns that cluster at similarity 1") {
  std::mt19937_64 gen(3);
  auto embeddings = embeddings_for(gen, 8, 5);
  std::vector<LabeledCluster> cut;
  for (int i = 0; i < 8; ++i) cut.push_back({"c" + std::to_string(i), {"q" + std::to_string(i)}});
  RetrievalIndex index = build_index(cut, embeddings, "t0");

  auto hits = top_k(index, embeddings.at("q3"), 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].cluster_id == "c3");
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("k larger than the entry count returns every entry") {
  std::mt19937_64 gen(4);
  auto embeddings = embeddings_for(gen, 3, 4);
  std::vector<LabeledCluster> cut = {{"c0", {"q0"}}, {"c1", {"q1"}}, {"c2", {"q2"}}};
  RetrievalIndex index = build_index(cut, embeddings, "t0");
  CHECK(top_k(index, random_vector(gen, 4), 10).size() == 3);
  CHECK_THROWS_AS(top_k(index, random_vector(gen, 4), 0), InvalidArgument);
  CHECK_THROWS_AS(top_k(index, random_vector(gen, 5), 1), DimensionMismatch);
  RetrievalIndex empty;
  empty.dim = 4;
  CHECK_THROWS_AS(top_k(empty, random_vector(gen, 4), 1), EmptyIndex);
}

TEST_CASE("top_k matches the exhaustive argsort oracle on random indexes") {
  std::mt19937_64 gen(20260808);
  for (int trial = 0; trial < 50; ++trial) {
    int entries = 20 + static_cast<int>(gen() % 181);  // 20..200
    int dim = 4 + static_cast<int>(gen() % 13);
    int k = 1 + static_cast<int>(gen() % 10);

    std::vector<LabeledCluster> cut;
    std::map<std::string, EmbeddingVector> embeddings;
    std::vector<std::pair<std::string, EmbeddingVector>> reps;
    for (int i = 0; i < entries; ++i) {
      std::string qid = "q" + std::to_string(i);
      std::string cid = "c" + std::to_string(i);
      embeddings[qid] = random_vector(gen, dim);
      cut.push_back({cid, {qid}});
    }
    RetrievalIndex index = build_index(cut, embeddings, "t0");
    for (const auto& entry : index.entries) {
      reps.emplace_back(entry.cluster_id, entry.representative);
    }

    EmbeddingVector query = random_vector(gen, dim);
    auto got = top_k(index, query, k);
    auto expected = oracle_top_k(reps, query, k);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].cluster_id == expected[i].cluster_id);
      CHECK(got[i].similarity == doctest::Approx(expected[i].similarity).epsilon(1e-9));
      CHECK(got[i].similarity >= -1.0);
      CHECK(got[i].similarity <= 1.0);
    }
  }
}

TEST_CASE("scale invariance and prefix containment") {
  std::mt19937_64 gen(5150);
  auto embeddings = embeddings_for(gen, 40, 6);
  std::vector<LabeledCluster> cut;
  for (int i = 0; i < 40; ++i) cut.push_back({"c" + std::to_string(i), {"q" + std::to_string(i)}});
  RetrievalIndex index = build_index(cut, embeddings, "t0");

  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingVector query = random_vector(gen, 6);
    auto base = top_k(index, query, 5);

    // positive rescaling leaves results untouched
    for (double c : {0.001, 7.5, 4096.0}) {
      EmbeddingVector scaled = query;
      for (double& x : scaled.values) x *= c;
      auto hits = top_k(index, scaled, 5);
      REQUIRE(hits.size() == base.size());
      for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].cluster_id == base[i].cluster_id);
      }
    }

    // results at k are a prefix of results at k+1
    for (int k = 1; k < 8; ++k) {
      auto smaller = top_k(index, query, k);
      auto larger = top_k(index, query, k + 1);
      for (std::size_t i = 0; i < smaller.size(); ++i) {
        CHECK(smaller[i].cluster_id == larger[i].cluster_id);
      }
    }
  }
}

TEST_CASE("ties break deterministically by ascending cluster id") {
  std::map<std::string, EmbeddingVector> embeddings;
  embeddings["qx"] = make_vector({1.0, 0.0});
  embeddings["qy"] = make_vector({1.0, 0.0});
  embeddings["qz"] = make_vector({0.0, 1.0});
  std::vector<LabeledCluster> cut = {{"zz", {"qx"}}, {"aa", {"qy"}}, {"mm", {"qz"}}};
  RetrievalIndex index = build_index(cut, embeddings, "t0");
  auto hits = top_k(index, make_vector({1.0, 0.0}), 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].cluster_id == "aa");  // similarity tie with zz; id wins
  CHECK(hits[1].cluster_id == "zz");
}

TEST_CASE("nearest-member mode scores a cluster by its best member") {
  std::map<std::string, EmbeddingVector> embeddings;
  embeddings["near"] = make_vector({1.0, 0.0});
  embeddings["far"] = make_vector({0.0, 1.0});
  embeddings["mid"] = make_vector({0.8, 0.6});
  std::vector<LabeledCluster> cut = {{"mixed", {"near", "far"}}, {"solo", {"mid"}}};

  RetrievalIndex centroid = build_index(cut, embeddings, "t0", RepresentativeMode::Centroid);
  RetrievalIndex nearest = build_index(cut, embeddings, "t0", RepresentativeMode::NearestMember);

  EmbeddingVector query = make_vector({1.0, 0.0});
  // centroid of {near, far} sits at 45 degrees (cos 0.707), behind solo (0.8)
  auto by_centroid = top_k(centroid, query, 1);
  CHECK(by_centroid[0].cluster_id == "solo");
  // nearest member of mixed is exactly the query direction
  auto by_member = top_k(nearest, query, 1);
  CHECK(by_member[0].cluster_id == "mixed");
  CHECK(by_member[0].similarity == doctest::Approx(1.0));
}

TEST_CASE("index files round-trip through the binary block") {
  TempDir tmp("index-io");
  std::mt19937_64 gen(6);
  auto embeddings = embeddings_for(gen, 10, 7);
  std::vector<LabeledCluster> cut;
  cut.push_back({"pair", {"q0", "q1"}});
  for (int i = 2; i < 10; ++i) cut.push_back({"c" + std::to_string(i), {"q" + std::to_string(i)}});

  for (auto mode : {RepresentativeMode::Centroid, RepresentativeMode::NearestMember}) {
    RetrievalIndex index = build_index(cut, embeddings, "t0.5", mode);
    auto base = tmp.path() / ("idx-" + to_string(mode));
    write_index(base, index);
    RetrievalIndex loaded = read_index(base);
    CHECK(loaded.threshold_id == index.threshold_id);
    CHECK(loaded.dim == index.dim);
    CHECK(loaded.mode == index.mode);
    REQUIRE(loaded.entries.size() == index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
      CHECK(loaded.entries[i].cluster_id == index.entries[i].cluster_id);
      CHECK(loaded.entries[i].representative.values == index.entries[i].representative.values);
    }

    EmbeddingVector query = random_vector(gen, 7);
    auto a = top_k(index, query, 3);
    auto b = top_k(loaded, query, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].cluster_id == b[i].cluster_id);
      CHECK(a[i].similarity == doctest::Approx(b[i].similarity));
    }
  }

  CHECK_THROWS_AS(read_index(tmp.path() / "missing"), MissingArtifact);
}
