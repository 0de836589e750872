#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stackreg {

/// Numeric regression dataset: an N×I feature matrix plus a length-N target.
struct Dataset {
  std::string name;
  Eigen::MatrixXd features;
  Eigen::VectorXd target;
  std::vector<std::string> feature_names;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(value)) {
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column +
                             "': cannot parse '" + cell + "' as a finite real");
  }
  return value;
}

/// Deterministic Mersenne-twister shuffle of 0..n-1.
inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace detail

/// Reads a CSV file (UTF-8, comma-separated, one header row, decimal-point
/// reals) and extracts `target_column`; remaining columns become features in
/// file order. Cells must all parse as finite reals.
inline Dataset load_dataset(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open dataset file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path.string() + ": empty file (header row required)");
  }
  const auto header = detail::split_csv_line(line);
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw std::runtime_error(path.string() + ": target column '" + target_column + "' not found");
  }
  const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());
  if (header.size() < 2) {
    throw std::runtime_error(path.string() + ": need at least one feature column besides the target");
  }

  std::vector<std::vector<double>> feature_rows;
  std::vector<double> target_vals;
  std::size_t row_number = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row_number) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    }
    std::vector<double> feat;
    feat.reserve(header.size() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      try {
        v = detail::parse_cell(cells[c], row_number, header[c]);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
      }
      if (c == target_col) {
        target_vals.push_back(v);
      } else {
        feat.push_back(v);
      }
    }
    feature_rows.push_back(std::move(feat));
  }
  if (feature_rows.empty()) {
    throw std::runtime_error(path.string() + ": no data rows");
  }

  Dataset ds;
  ds.name = path.stem().string();
  const auto n = static_cast<Eigen::Index>(feature_rows.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  ds.features.resize(n, p);
  ds.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      ds.features(i, j) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    ds.target(i) = target_vals[static_cast<std::size_t>(i)];
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_col) ds.feature_names.push_back(header[c]);
  }
  return ds;
}

/// Row subset, order given by `rows` (0-based indices into ds).
inline Dataset subset_rows(const Dataset& ds, const std::vector<int>& rows) {
  Dataset out;
  out.name = ds.name;
  out.feature_names = ds.feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
  out.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
    out.target(static_cast<Eigen::Index>(i)) = ds.target(rows[i]);
  }
  return out;
}

/// Seeded train/test row split. Training side gets round(train_fraction * N)
/// rows; both sides keep original row order. Indices are 0-based.
inline std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double train_fraction,
                                                                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  if (n < 2) {
    throw std::invalid_argument("need at least 2 rows to split");
  }
  const auto train_n = static_cast<int>(std::llround(train_fraction * n));
  if (train_n < 1 || train_n >= n) {
    throw std::invalid_argument("split would leave an empty side (n=" + std::to_string(n) +
                                ", fraction=" + std::to_string(train_fraction) + ")");
  }
  auto idx = detail::shuffled_indices(n, seed);
  std::vector<int> train(idx.begin(), idx.begin() + train_n);
  std::vector<int> test(idx.begin() + train_n, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction,
                                                    std::uint64_t seed) {
  const auto [train_idx, test_idx] = split_indices(static_cast<int>(ds.rows()), train_fraction, seed);
  return {subset_rows(ds, train_idx), subset_rows(ds, test_idx)};
}

/// K-fold assignment over n rows. Fold ids are 1-based; sizes differ by at
/// most one and every fold is non-empty.
struct FoldAssignment {
  int n = 0;
  int k_folds = 0;
  std::vector<int> fold_of;  // entries in [1, k_folds]
  std::uint64_t seed = 0;

  std::vector<int> fold_indices(int k) const {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
      if (fold_of[static_cast<std::size_t>(i)] == k) out.push_back(i);
    }
    return out;
  }

  int fold_size(int k) const {
    return static_cast<int>(std::count(fold_of.begin(), fold_of.end(), k));
  }
};

inline FoldAssignment make_folds(int n, int k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw std::invalid_argument("k_folds must be >= 2");
  if (n < k_folds) {
    throw std::invalid_argument("cannot make " + std::to_string(k_folds) + " folds from " +
                                std::to_string(n) + " rows");
  }
  FoldAssignment fa;
  fa.n = n;
  fa.k_folds = k_folds;
  fa.seed = seed;
  fa.fold_of.assign(static_cast<std::size_t>(n), 0);
  const auto idx = detail::shuffled_indices(n, seed);
  // First (n mod K) folds take the extra row.
  const int base = n / k_folds;
  const int extra = n % k_folds;
  std::size_t pos = 0;
  for (int k = 1; k <= k_folds; ++k) {
    const int size = base + (k <= extra ? 1 : 0);
    for (int j = 0; j < size; ++j) {
      fa.fold_of[static_cast<std::size_t>(idx[pos++])] = k;
    }
  }
  return fa;
}

/// A K-fold layout whose training sets additionally exclude fold m (m=0 keeps
/// plain K-fold CV; m=k degenerates to excluding fold k once).
struct CvPartition {
  FoldAssignment folds;
  int m = 0;  // 0..k_folds

  std::vector<int> validation_indices(int k) const { return folds.fold_indices(k); }

  std::vector<int> training_indices(int k) const {
    std::vector<int> out;
    for (int i = 0; i < folds.n; ++i) {
      const int f = folds.fold_of[static_cast<std::size_t>(i)];
      if (f != k && (m == 0 || f != m)) out.push_back(i);
    }
    return out;
  }
};

inline CvPartition derive_partition(const FoldAssignment& folds, int m) {
  if (m < 0 || m > folds.k_folds) {
    throw std::invalid_argument("partition index m must lie in [0, " +
                                std::to_string(folds.k_folds) + "], got " + std::to_string(m));
  }
  return CvPartition{folds, m};
}

}  // namespace stackreg
