#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(SENTCX_TEST_DATA); }
inline fs::path fixture_dir() { return data_dir() / "fixture"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("sentcx-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, std::string_view text) {
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

using Matrix = std::vector<std::vector<double>>;

// Gaussian elimination with partial pivoting on a copy of (a | b).
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0) throw std::runtime_error("singular system in oracle");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Ridge with unpenalized intercept by explicit assembly of the augmented
// normal equations [X 1]^T [X 1] + diag(lambda,...,lambda,0).
struct RidgeOracle {
  std::vector<double> w;
  double b = 0.0;
};

inline RidgeOracle ridge_oracle(const Matrix& x, const std::vector<double>& y, double lambda) {
  const std::size_t n = x.size(), d = x[0].size();
  Matrix a(d + 1, std::vector<double>(d + 1, 0.0));
  std::vector<double> rhs(d + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p <= d; ++p) {
      const double xp = p < d ? x[i][p] : 1.0;
      rhs[p] += xp * y[i];
      for (std::size_t q = 0; q <= d; ++q) a[p][q] += xp * (q < d ? x[i][q] : 1.0);
    }
  }
  for (std::size_t p = 0; p < d; ++p) a[p][p] += lambda;
  const auto sol = gauss_solve(a, rhs);
  return {std::vector<double>(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(d)), sol[d]};
}

// Neumaier-compensated sum.
inline double compensated_sum(const std::vector<double>& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + c;
}

inline double two_pass_mean(const std::vector<double>& v) { return compensated_sum(v) / static_cast<double>(v.size()); }

inline double two_pass_std(const std::vector<double>& v) {
  const double m = two_pass_mean(v);
  std::vector<double> sq;
  for (double x : v) sq.push_back((x - m) * (x - m));
  return std::sqrt(compensated_sum(sq) / static_cast<double>(v.size()));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace testsupport

namespace testsupport {

struct OracleHit {
  std::uint64_t id;
  double sim;
};

// Full scan and full sort. Vectors and query are rounded to float first, as
// the index stores them.
inline std::vector<OracleHit> brute_force_top_k(const std::vector<std::uint64_t>& ids, const Matrix& vectors,
                                                const std::vector<double>& query, std::size_t k,
                                                const std::vector<std::uint64_t>& exclude = {}) {
  auto as_float = [](const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v) out.push_back(static_cast<double>(static_cast<float>(x)));
    return out;
  };
  const auto q = as_float(query);
  double qq = 0.0;
  for (double x : q) qq += x * x;
  if (qq == 0.0) return {};
  std::vector<OracleHit> all;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (std::find(exclude.begin(), exclude.end(), ids[r]) != exclude.end()) continue;
    const auto v = as_float(vectors[r]);
    double vv = 0.0, qv = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      vv += v[j] * v[j];
      qv += q[j] * v[j];
    }
    all.push_back({ids[r], vv == 0.0 ? 0.0 : qv / (std::sqrt(qq) * std::sqrt(vv))});
  }
  std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace testsupport
