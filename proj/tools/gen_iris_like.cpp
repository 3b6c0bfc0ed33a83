// Writes a deterministic iris-like table: 3 classes x 50 samples, four
// Gaussian measurements per class with iris-like means and spreads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>

namespace {

double unit(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

// Box-Muller; std::normal_distribution differs between standard libraries.
double gauss(std::mt19937_64& rng) {
  const double u = unit(rng), v = unit(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

struct Profile {
  const char* name;
  double mean[4];
  double sd[4];
};

constexpr Profile kProfiles[3] = {
    {"setosa", {5.006, 3.428, 1.462, 0.246}, {0.352, 0.379, 0.174, 0.105}},
    {"versicolor", {5.936, 2.770, 4.260, 1.326}, {0.516, 0.314, 0.470, 0.198}},
    {"virginica", {6.588, 2.974, 5.552, 2.026}, {0.636, 0.322, 0.552, 0.275}},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "iris_like.csv";
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 20240601ULL;
  std::ofstream out(path);
  if (!out) {
    std::cerr << "cannot write " << path << '\n';
    return 1;
  }
  std::mt19937_64 rng(seed);
  out << "species,sepal_length,sepal_width,petal_length,petal_width\n";
  for (const auto& p : kProfiles) {
    for (int s = 0; s < 50; ++s) {
      out << p.name;
      for (int f = 0; f < 4; ++f) {
        const double v = std::max(0.1, p.mean[f] + p.sd[f] * gauss(rng));
        char buf[32];
        std::snprintf(buf, sizeof buf, ",%.1f", v);
        out << buf;
      }
      out << '\n';
    }
  }
  return 0;
}
