#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "stylecap/corpus.hpp"
#include "stylecap/lm.hpp"
#include "stylecap/random.hpp"

namespace stylecap::testing {

inline std::vector<FactorTuple> all_golden_tuples() {
  std::vector<FactorTuple> out;
  for (Gender g : {Gender::Male, Gender::Female})
    for (Level p : {Level::Low, Level::Normal, Level::High})
      for (Level v : {Level::Low, Level::Normal, Level::High})
        for (Speed s : {Speed::Slow, Speed::Normal, Speed::Fast}) out.push_back({g, p, v, s});
  return out;
}

// Next-token model defined by a plain function of the history.
struct StubModel {
  std::function<Eigen::VectorXd(std::span<const TokenId>)> fn;
  Eigen::VectorXd next_distribution(std::span<const TokenId> history) const { return fn(history); }
};

inline Eigen::VectorXd one_hot(int size, TokenId t) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  v(t) = 1.0;
  return v;
}

inline Eigen::VectorXd random_distribution(Rng& rng, int size) {
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = -std::log(1.0 - uniform01(rng));  // Dirichlet(1)
  return v / v.sum();
}

// Small model shape for gradient checks and fixtures.
inline LmShape tiny_shape() {
  LmShape s;
  s.embed = 3;
  s.context = 2;
  s.memory = 2;
  s.cond = 3;
  s.hidden = 5;
  return s;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("stylecap-" + tag + "-" + std::to_string(rng() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace stylecap::testing
