#include "dtm/data_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dtm/binary_io.hpp"
#include "dtm/rng.hpp"

namespace dtm {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;

std::uint32_t read_be32(std::istream& is, std::size_t offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) throw std::runtime_error("truncated IDX header at offset " + std::to_string(offset));
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  os.write(b, 4);
}

}  // namespace

std::size_t IdxTensor::count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

ByteMatrix IdxTensor::as_matrix() const {
  if (dims.empty()) return {};
  const Eigen::Index rows = dims[0];
  const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(count() / dims[0]);
  ByteMatrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

IdxTensor parse_idx(std::istream& is) {
  const std::uint32_t magic = read_be32(is, 0);
  if ((magic >> 16) != 0) throw std::runtime_error("bad IDX magic: leading bytes must be zero");
  const std::uint32_t type = (magic >> 8) & 0xff;
  const std::uint32_t ndims = magic & 0xff;
  if (type != 0x08)
    throw std::runtime_error("unsupported IDX element type 0x" + std::to_string(type) + " (only u8 supported)");
  if (ndims == 0) throw std::runtime_error("bad IDX magic: zero dimensions");
  IdxTensor t;
  std::size_t total = 1;
  for (std::uint32_t d = 0; d < ndims; ++d) {
    t.dims.push_back(read_be32(is, 4 + 4 * d));
    total *= t.dims.back();
  }
  const std::size_t header = 4 + 4 * ndims;
  t.data.resize(total);
  is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(is.gcount()) != total)
    throw std::runtime_error("truncated IDX payload: expected " + std::to_string(total) + " bytes after offset " +
                             std::to_string(header) + ", got " + std::to_string(is.gcount()));
  return t;
}

IdxTensor read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_idx(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_idx(std::ostream& os, const IdxTensor& t) {
  write_be32(os, (0x08u << 8) | static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) write_be32(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
}

SpinMatrix binarize(const ByteMatrix& images, int threshold) {
  if (threshold < 0 || threshold > 255) throw std::invalid_argument("threshold must lie in 0..255");
  return (images.array().cast<int>() > threshold).select(SpinMatrix::Constant(images.rows(), images.cols(), 1),
                                                           SpinMatrix::Constant(images.rows(), images.cols(), -1));
}

SpinMatrix embed_integer(const IntMatrix& values, int k_bits) {
  if (k_bits < 1) throw std::invalid_argument("k_bits must be >= 1");
  SpinMatrix out(values.rows(), values.cols() * k_bits);
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const int v = values(r, c);
      if (v < 0 || v > k_bits)
        throw std::invalid_argument("value " + std::to_string(v) + " outside 0.." + std::to_string(k_bits));
      for (int b = 0; b < k_bits; ++b) out(r, c * k_bits + b) = b < v ? Spin{1} : Spin{-1};
    }
  return out;
}

IntMatrix decode_integer(const SpinMatrix& spins, int k_bits) {
  if (k_bits < 1 || spins.cols() % k_bits != 0)
    throw std::invalid_argument("spin width is not a multiple of k_bits");
  IntMatrix out = IntMatrix::Zero(spins.rows(), spins.cols() / k_bits);
  for (Eigen::Index r = 0; r < spins.rows(); ++r)
    for (Eigen::Index c = 0; c < spins.cols(); ++c)
      if (spins(r, c) > 0) ++out(r, c / k_bits);
  return out;
}

SpinVector label_code(int label, int classes, int repetitions) {
  if (classes < 1 || repetitions < 1) throw std::invalid_argument("label code needs classes, repetitions >= 1");
  if (label < 0 || label >= classes)
    throw std::out_of_range("label " + std::to_string(label) + " outside 0.." + std::to_string(classes - 1));
  SpinVector code = SpinVector::Constant(classes * repetitions, -1);
  code.segment(label * repetitions, repetitions).setConstant(1);
  return code;
}

namespace {

std::vector<std::uint8_t> gray_levels(const SpinVector& sample, int width, int height, int bits) {
  if (bits < 1 || static_cast<Eigen::Index>(width) * height * bits != sample.size())
    throw std::invalid_argument("width*height*bits_per_pixel does not match sample width " +
                                std::to_string(sample.size()));
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
  for (std::size_t p = 0; p < px.size(); ++p) {
    int count = 0;
    for (int b = 0; b < bits; ++b) count += sample[static_cast<Eigen::Index>(p) * bits + b] > 0;
    px[p] = static_cast<std::uint8_t>(std::lround(255.0 * count / bits));
  }
  return px;
}

void write_p5(std::ostream& os, const std::vector<std::uint8_t>& px, int width, int height) {
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace

void write_pgm(std::ostream& os, const SpinVector& sample, int width, int height, int bits_per_pixel) {
  write_p5(os, gray_levels(sample, width, height, bits_per_pixel), width, height);
}

void write_pgm_grid(std::ostream& os, const SpinMatrix& samples, int width, int height, int bits_per_pixel,
                    int columns) {
  if (columns < 1 || samples.rows() == 0) throw std::invalid_argument("grid needs samples and columns >= 1");
  const int n = static_cast<int>(samples.rows());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  const int gw = cols * (width + 1) - 1;
  const int gh = rows * (height + 1) - 1;
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(gw) * gh, 128);
  for (int s = 0; s < n; ++s) {
    const auto px = gray_levels(samples.row(s).transpose(), width, height, bits_per_pixel);
    const int ox = (s % cols) * (width + 1);
    const int oy = (s / cols) * (height + 1);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        canvas[static_cast<std::size_t>(oy + y) * gw + ox + x] = px[static_cast<std::size_t>(y) * width + x];
  }
  write_p5(os, canvas, gw, gh);
}

std::vector<std::filesystem::path> export_pgm(const SpinMatrix& samples, int width, int height,
                                              int bits_per_pixel, const std::filesystem::path& dir,
                                              const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (Eigen::Index s = 0; s < samples.rows(); ++s) {
    auto path = dir / (stem + "_" + std::to_string(s) + ".pgm");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_pgm(out, samples.row(s).transpose(), width, height, bits_per_pixel);
    paths.push_back(std::move(path));
  }
  return paths;
}

SpinMatrix SpinDataset::combined() const {
  if (!label_codes) return samples;
  SpinMatrix out(samples.rows(), samples.cols() + label_codes->cols());
  out << samples, *label_codes;
  return out;
}

void SpinDataset::validate() const {
  if (!all_spins(samples)) throw std::invalid_argument("dataset entries must be in {-1, +1}");
  if (label_codes) {
    if (label_codes->rows() != samples.rows()) throw std::invalid_argument("label rows do not match samples");
    if (!all_spins(*label_codes)) throw std::invalid_argument("label code entries must be in {-1, +1}");
    if (label_codes->cols() != meta.label_classes * meta.repetitions)
      throw std::invalid_argument("label block length must equal classes x repetitions");
  }
}

void write_dataset(std::ostream& os, const SpinDataset& d) {
  d.validate();
  io::LeWriter w(os);
  w.magic("DTMD");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.samples.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.samples.cols()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.num_label_columns()));
  w.put_bytes(pack_spins(d.samples));
  if (d.label_codes) w.put_bytes(pack_spins(*d.label_codes));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.labels.size()));
  for (int l : d.labels) w.put<std::int32_t>(l);
  w.put_string(dataset_manifest(d).dump());
  w.check();
}

SpinDataset read_dataset(std::istream& is) {
  io::LeReader r(is);
  r.expect_magic("DTMD");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  const auto label_cols = r.get<std::uint32_t>();
  SpinDataset d;
  d.samples = unpack_spins(r.get_bytes(packed_row_bytes(cols) * rows), rows, cols);
  if (label_cols > 0) d.label_codes = unpack_spins(r.get_bytes(packed_row_bytes(label_cols) * rows), rows, label_cols);
  const auto n_labels = r.get<std::uint32_t>();
  if (n_labels != 0 && n_labels != rows) throw std::runtime_error("label count does not match rows");
  d.labels.resize(n_labels);
  for (auto& l : d.labels) l = r.get<std::int32_t>();
  const auto meta = nlohmann::json::parse(r.get_string());
  d.meta.source = meta.value("source", "");
  d.meta.threshold = meta.value("threshold", 127);
  d.meta.bits_per_pixel = meta.value("bits_per_pixel", 1);
  d.meta.width = meta.value("width", 0);
  d.meta.height = meta.value("height", 0);
  d.meta.label_classes = meta.value("label_classes", 0);
  d.meta.repetitions = meta.value("repetitions", 0);
  d.validate();
  return d;
}

nlohmann::json dataset_manifest(const SpinDataset& d) {
  return {{"format", "DTMD"},
          {"version", kDatasetVersion},
          {"n", d.size()},
          {"n_visible", d.samples.cols()},
          {"n_label_columns", d.num_label_columns()},
          {"source", d.meta.source},
          {"threshold", d.meta.threshold},
          {"bits_per_pixel", d.meta.bits_per_pixel},
          {"width", d.meta.width},
          {"height", d.meta.height},
          {"label_classes", d.meta.label_classes},
          {"repetitions", d.meta.repetitions}};
}

SyntheticMixture SyntheticMixture::random(int bits, int modes, double flip, std::uint64_t seed) {
  if (bits < 1 || modes < 1) throw std::invalid_argument("mixture needs bits, modes >= 1");
  if (flip < 0.0 || flip >= 0.5) throw std::invalid_argument("flip noise must lie in [0, 0.5)");
  const CounterRng rng(derive_seed(seed, 0x70726f746f));
  SyntheticMixture m;
  m.prototypes.resize(modes, bits);
  for (int k = 0; k < modes; ++k)
    for (int b = 0; b < bits; ++b) m.prototypes(k, b) = (rng.bits(k, b) >> 63) ? Spin{1} : Spin{-1};
  m.weights = Eigen::VectorXd::Constant(modes, 1.0 / modes);
  m.flip = flip;
  return m;
}

double SyntheticMixture::probability(const SpinVector& x) const {
  if (x.size() != prototypes.cols()) throw std::invalid_argument("configuration width mismatch");
  double p = 0.0;
  for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
    int d = 0;
    for (Eigen::Index b = 0; b < x.size(); ++b) d += x[b] != prototypes(k, b);
    p += weights[k] * std::pow(flip, d) * std::pow(1.0 - flip, static_cast<double>(x.size() - d));
  }
  return p;
}

SpinMatrix SyntheticMixture::sample(int n, std::uint64_t seed, std::vector<int>* modes) const {
  const CounterRng rng(derive_seed(seed, 0x73616d70));
  SpinMatrix out(n, prototypes.cols());
  if (modes) modes->resize(n);
  for (int s = 0; s < n; ++s) {
    double u = rng.uniform(s, 0xffffffffULL);
    Eigen::Index k = 0;
    while (k + 1 < weights.size() && u >= weights[k]) u -= weights[k++];
    if (modes) (*modes)[s] = static_cast<int>(k);
    for (Eigen::Index b = 0; b < prototypes.cols(); ++b)
      out(s, b) = rng.uniform(s, b) < flip ? static_cast<Spin>(-prototypes(k, b)) : prototypes(k, b);
  }
  return out;
}

}  // namespace dtm
