#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smooth/tensor.hpp"

namespace smooth {

struct Dataset {
  Tensor x;  // (N, per-example shape...)
  std::vector<int> y;
  std::size_t classes = 0;

  std::size_t size() const { return y.size(); }
  std::vector<std::size_t> example_shape() const;
  /// One example as a batch of 1.
  Tensor example(std::size_t i) const;
  Dataset subset(const std::vector<std::size_t>& idx) const;
};

enum class DataSource { Blobs, Moons, MiniDigits, Csv, Idx };

std::string data_source_name(DataSource s);
DataSource data_source_from_name(const std::string& name);

struct DatasetSpec {
  DataSource source = DataSource::MiniDigits;
  std::size_t n = 2000;        // generated sample count
  std::size_t classes = 10;    // blobs
  std::size_t dim = 2;         // blobs
  double separation = 8.0;     // blobs: center distance in noise units
  double noise = 0.1;          // moons
  std::string csv_path;
  int label_col = -1;          // csv: -1 = last column
  std::string idx_images, idx_labels;
  std::uint64_t seed = 1;
  double test_fraction = 0.2;

  void validate() const;
};

struct DataSplits {
  Dataset train, test;
};

/// Deterministic given the spec: generating twice yields identical splits.
/// Generated/loaded features are normalized into [0,1].
DataSplits load_dataset(const DatasetSpec& spec);

// Individual loaders, exposed for tests.
Dataset make_blobs(std::size_t classes, std::size_t dim, double separation, std::size_t n,
                   std::uint64_t seed);
Dataset make_moons(std::size_t n, double noise, std::uint64_t seed);
Dataset make_mini_digits(std::size_t n, std::uint64_t seed);
Dataset load_csv_dataset(const std::string& path, int label_col);
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path);

/// Deterministic index shuffle used for all splits.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace smooth
