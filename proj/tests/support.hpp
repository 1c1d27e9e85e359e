#pragma once

// Shared helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "specfair/dist.hpp"
#include "specfair/error.hpp"
#include "specfair/rng.hpp"
#include "specfair/tabular_model.hpp"

namespace specfair::testing {

/// Error code thrown by f, or kInternal when nothing is thrown.
inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

/// softmax(scale * N(0,1)); larger scale gives peakier distributions.
inline Categorical random_categorical(Rng& rng, std::size_t n, double scale = 2.0) {
  std::vector<double> logits(n);
  for (auto& l : logits) l = scale * rng.normal();
  return Categorical::from_logits(logits);
}

/// Random categorical with some exact zeros, to hit the support edge cases.
inline Categorical sparse_categorical(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  w[rng.below(n)] += 0.5;
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  return Categorical(w);
}

/// Model with random logit rows for every key over `vocab` tokens plus padding.
inline TabularSoftmaxModel random_model(Rng& rng, std::size_t vocab, std::size_t order,
                                        double scale = 2.0) {
  TabularSoftmaxModel m(vocab, order);
  std::vector<ContextKey> keys{{}};
  for (std::size_t d = 0; d < order; ++d) {
    std::vector<ContextKey> next;
    for (const auto& k : keys) {
      for (std::size_t t = 0; t <= vocab; ++t) {
        auto e = k;
        e.push_back(static_cast<Token>(t));
        next.push_back(std::move(e));
      }
    }
    keys = std::move(next);
  }
  for (const auto& k : keys) {
    std::vector<double> row(vocab);
    for (auto& l : row) l = scale * rng.normal();
    m.set_logits(k, row);
  }
  return m;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string first_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

/// Element names of an SVG document in order, one per line.
inline std::string svg_skeleton(const std::string& svg) {
  std::string out;
  for (std::size_t i = svg.find('<'); i != std::string::npos; i = svg.find('<', i + 1)) {
    if (svg[i + 1] == '/') continue;
    std::size_t j = i + 1;
    while (j < svg.size() && (std::isalnum(static_cast<unsigned char>(svg[j])) != 0)) ++j;
    out += svg.substr(i + 1, j - i - 1);
    out += '\n';
  }
  return out;
}

/// CSV text with one column removed, for comparisons that ignore timestamps.
inline std::string drop_column(const std::string& csv, std::size_t column) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (column < cells.size()) cells.erase(cells.begin() + static_cast<long>(column));
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  }
  return out;
}

}  // namespace specfair::testing
