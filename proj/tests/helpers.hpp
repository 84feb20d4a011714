#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "icr/types.hpp"

namespace icr::test {

// Platform-stable uniform in [0, 1); std distributions are
// implementation-defined, mt19937_64 output is not.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
}

inline EmbeddingVector make_vector(std::vector<double> values,
                                   const std::string& model = "unit-test") {
  EmbeddingVector v;
  v.dim = static_cast<int>(values.size());
  v.values = std::move(values);
  v.source_model = model;
  return v;
}

inline EmbeddingVector random_vector(std::mt19937_64& gen, int dim,
                                     const std::string& model = "unit-test") {
  std::vector<double> values(dim);
  for (double& x : values) x = uniform01(gen) * 2.0 - 1.0;
  return make_vector(std::move(values), model);
}

inline Question make_question(std::string id, std::string stem,
                              std::vector<std::string> option_texts, char gold,
                              Task task = Task::custom("unit"), Split split = Split::Train) {
  Question q;
  q.id = std::move(id);
  q.task = task;
  q.split = split;
  q.stem = std::move(stem);
  for (std::size_t i = 0; i < option_texts.size(); ++i) {
    q.options.push_back({static_cast<char>('A' + i), option_texts[i]});
  }
  q.gold = gold;
  return q;
}

/// Deterministic synthetic corpus with unique stems; gold labels cycle A-D.
inline std::vector<Question> synthetic_corpus(const Task& task, int n_train, int n_test) {
  std::vector<Question> out;
  auto add = [&](Split split, int i) {
    std::string sid = to_string(split);
    std::string id = task.name() + "-" + sid + "-" + std::to_string(i);
    Question q = make_question(
        id, "Which property characterizes specimen " + id + " in scenario " +
                std::to_string(i % 7) + "?",
        {"the first property of " + id, "the second property of " + id,
         "the third property of " + id, "the fourth property of " + id},
        static_cast<char>('A' + i % 4), task, split);
    out.push_back(std::move(q));
  };
  for (int i = 0; i < n_train; ++i) add(Split::Train, i);
  for (int i = 0; i < n_test; ++i) add(Split::Test, i);
  return out;
}

/// Self-cleaning temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("icr-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace icr::test
