#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "dtm/spin.hpp"

namespace dtm {

/// Decoded IDX file. Only unsigned-byte payloads (type code 0x08) are supported.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const;
  /// Rows = dims[0], columns = product of the remaining dims.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> as_matrix() const;
};

IdxTensor parse_idx(std::istream& is);
IdxTensor read_idx(const std::filesystem::path& path);
void write_idx(std::ostream& os, const IdxTensor& t);

using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// pixel > threshold -> +1, else -1.
SpinMatrix binarize(const ByteMatrix& images, int threshold = 127);

/// Each value v in [0, k] becomes k spins with leading v entries +1.
SpinMatrix embed_integer(const IntMatrix& values, int k_bits);
/// Inverse of embed_integer: counts +1 entries in each group of k spins.
IntMatrix decode_integer(const SpinMatrix& spins, int k_bits);

/// One-hot code with each bit repeated `repetitions` times (+1 for the hot class).
SpinVector label_code(int label, int classes, int repetitions);

/// Writes spins as P5 grayscale: pixel p uses spins [p*bits, (p+1)*bits) and
/// maps the decoded count c to round(255 c / bits).
void write_pgm(std::ostream& os, const SpinVector& sample, int width, int height, int bits_per_pixel);
/// Tiles samples row by row into a single image, `columns` tiles wide.
void write_pgm_grid(std::ostream& os, const SpinMatrix& samples, int width, int height, int bits_per_pixel,
                    int columns);
/// One P5 file per sample: <stem>_<index>.pgm; returns the paths written.
std::vector<std::filesystem::path> export_pgm(const SpinMatrix& samples, int width, int height,
                                              int bits_per_pixel, const std::filesystem::path& dir,
                                              const std::string& stem = "sample");

struct DatasetMeta {
  std::string source;
  int threshold = 127;
  int bits_per_pixel = 1;
  int width = 0;
  int height = 0;
  int label_classes = 0;
  int repetitions = 0;
};

/// Spin training data. Labels, when present, are separate columns in
/// label_codes; combined() appends them after the sample columns.
struct SpinDataset {
  SpinMatrix samples;
  std::optional<SpinMatrix> label_codes;
  std::vector<int> labels;
  DatasetMeta meta;

  int size() const { return static_cast<int>(samples.rows()); }
  int num_label_columns() const { return label_codes ? static_cast<int>(label_codes->cols()) : 0; }
  SpinMatrix combined() const;
  void validate() const;
};

/// Binary layout "DTMD": magic, u32 version, u32 rows, u32 sample cols,
/// u32 label cols, bit-packed samples, bit-packed label codes, u32 labels.
void write_dataset(std::ostream& os, const SpinDataset& d);
SpinDataset read_dataset(std::istream& is);
nlohmann::json dataset_manifest(const SpinDataset& d);

/// Mixture of random binary prototypes with independent flip noise.
struct SyntheticMixture {
  SpinMatrix prototypes;        // modes x bits
  Eigen::VectorXd weights;      // mode probabilities
  double flip = 0.05;

  static SyntheticMixture random(int bits, int modes, double flip, std::uint64_t seed);

  int bits() const { return static_cast<int>(prototypes.cols()); }
  /// Exact probability of one configuration.
  double probability(const SpinVector& x) const;
  /// Samples with their generating mode index.
  SpinMatrix sample(int n, std::uint64_t seed, std::vector<int>* modes = nullptr) const;
};

}  // namespace dtm
