#pragma once

#include "riskbo/landscape.hpp"

#include <atomic>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <random>
#include <string>

namespace riskbo::testing {

// Scratch directory removed at scope exit.
class TempDir
{
public:
  TempDir()
  {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("riskbo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const
  {
    std::ofstream(file(name), std::ios::binary) << text;
    return file(name);
  }

private:
  std::filesystem::path path_;
};

inline Landscape small_landscape(std::vector<std::pair<std::string, double>> rows, std::string alphabet = "AC",
                                 std::optional<std::string> wt = std::nullopt)
{
  std::vector<std::string> s;
  std::vector<double> f;
  for (auto& [seq, fit] : rows) {
    s.push_back(seq);
    f.push_back(fit);
  }
  return Landscape("test", std::move(s), std::move(f), std::move(alphabet), std::move(wt));
}

inline Landscape synthetic(SyntheticModel model, std::size_t L, std::size_t A, std::uint64_t seed, std::size_t k = 0)
{
  SyntheticSpec spec;
  spec.model = model;
  spec.length = L;
  spec.alphabet = A;
  spec.k = k;
  spec.seed = seed;
  spec.name = "syn";
  return generate_synthetic(spec);
}

} // namespace riskbo::testing
