#include "fullnorm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include "binary_io.hpp"
#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

constexpr char kDatasetMagic[] = "FNDS1";
constexpr std::size_t kDatasetMagicLen = 5;
constexpr std::uint32_t kIdxImagesMagic = 2051;
constexpr std::uint32_t kIdxLabelsMagic = 2049;
constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPixels = 3072;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) throw FormatError(path.string() + ": truncated IDX header");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw ContractError("Dataset: no samples");
  if (features.rows() != labels.size()) throw ContractError("Dataset: features/labels mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw ContractError("Dataset: label " + std::to_string(y) + " outside class range");
    }
  }
}

Dataset gen_toy3() {
  Dataset ds;
  ds.features = Tensor::from_rows({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
  ds.labels = {0, 1, 2};
  ds.class_count = 3;
  ds.provenance = "toy3";
  return ds;
}

TrainTest gen_large_variation(const LargeVariationOptions& opts, std::uint64_t seed) {
  if (opts.classes > opts.d) throw ContractError("gen_large_variation: classes exceed dimensions");
  if (opts.classes == 0 || opts.n == 0) throw ContractError("gen_large_variation: empty request");
  RngStream root(seed);
  auto make = [&](std::size_t count, std::string_view label) {
    RngStream rng = root.substream(label);
    Dataset ds;
    ds.features = Tensor(count, opts.d);
    ds.labels.resize(count);
    ds.class_count = opts.classes;
    for (std::size_t s = 0; s < count; ++s) {
      const auto cls = static_cast<std::size_t>(rng.below(opts.classes));
      ds.labels[s] = static_cast<int>(cls);
      auto row = ds.features.row(s);
      row[cls] = opts.scale_max * rng.uniform01();
      if (opts.noise)
        for (double& v : row) v += rng.normal();
    }
    ds.provenance = "large_variation:" + std::string(label) + ":seed=" + std::to_string(seed);
    return ds;
  };
  return {make(opts.n, "train"), make(opts.test_n, "test")};
}

Dataset gen_compositional(const CompositionalOptions& opts, std::uint64_t seed) {
  if (opts.n == 0 || opts.d == 0 || opts.classes < 2)
    throw ContractError("gen_compositional: empty request");
  RngStream rng(seed);
  const Tensor centers = rng_normal(rng, opts.classes, opts.d);
  std::vector<double> scale(opts.d);
  std::vector<double> offset(opts.d);
  for (std::size_t j = 0; j < opts.d; ++j) {
    scale[j] = std::exp(rng.uniform(-1.0, 2.0));
    offset[j] = rng.uniform(-5.0, 5.0);
  }
  Dataset ds;
  ds.features = Tensor(opts.n, opts.d);
  ds.labels.resize(opts.n);
  ds.class_count = opts.classes;
  for (std::size_t s = 0; s < opts.n; ++s) {
    const auto cls = static_cast<std::size_t>(s % opts.classes);
    auto row = ds.features.row(s);
    for (std::size_t j = 0; j < opts.d; ++j) {
      const double raw = opts.spread * centers(cls, j) + rng.normal();
      row[j] = scale[j] * raw + offset[j];
    }
    std::size_t y = cls;
    if (rng.uniform01() < opts.label_noise) y = static_cast<std::size_t>(rng.below(opts.classes));
    ds.labels[s] = static_cast<int>(y);
  }
  ds.provenance = "compositional:seed=" + std::to_string(seed);
  return ds;
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (read_be32(img, 0, images) != kIdxImagesMagic)
    throw FormatError(images.string() + ": bad IDX image magic (expected 2051)");
  if (read_be32(lab, 0, labels) != kIdxLabelsMagic)
    throw FormatError(labels.string() + ": bad IDX label magic (expected 2049)");
  const std::size_t n = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_labels = read_be32(lab, 4, labels);
  if (n != n_labels) {
    throw FormatError("MNIST: " + std::to_string(n) + " images but " + std::to_string(n_labels) +
                      " labels");
  }
  const std::size_t d = rows * cols;
  if (img.size() < 16 + n * d) throw FormatError(images.string() + ": truncated image data");
  if (lab.size() < 8 + n) throw FormatError(labels.string() + ": truncated label data");
  Dataset ds;
  ds.features = Tensor(n, d);
  ds.labels.resize(n);
  ds.class_count = 10;
  auto f = ds.features.data();
  for (std::size_t i = 0; i < n * d; ++i) f[i] = static_cast<double>(img[16 + i]) / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned y = lab[8 + i];
    if (y > 9) throw FormatError("MNIST: label " + std::to_string(y) + " at index " +
                                 std::to_string(i) + " is out of range");
    ds.labels[i] = static_cast<int>(y);
  }
  ds.provenance = "mnist:" + images.filename().string();
  return ds;
}

Dataset load_cifar10_bin(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ContractError("load_cifar10_bin: no files given");
  std::vector<double> features;
  std::vector<int> labels;
  for (const auto& path : paths) {
    const auto buf = read_file(path);
    if (buf.empty() || buf.size() % kCifarRecord != 0) {
      throw FormatError(path.string() + ": size " + std::to_string(buf.size()) +
                        " is not a positive multiple of 3073");
    }
    const std::size_t n = buf.size() / kCifarRecord;
    features.reserve(features.size() + n * kCifarPixels);
    for (std::size_t r = 0; r < n; ++r) {
      const unsigned char* rec = buf.data() + r * kCifarRecord;
      if (rec[0] > 9) throw FormatError(path.string() + ": label out of range in record " +
                                        std::to_string(r));
      labels.push_back(rec[0]);
      for (std::size_t p = 0; p < kCifarPixels; ++p)
        features.push_back(static_cast<double>(rec[1 + p]) / 255.0);
    }
  }
  Dataset ds;
  ds.features = Tensor(labels.size(), kCifarPixels, std::move(features));
  ds.labels = std::move(labels);
  ds.class_count = 10;
  ds.provenance = "cifar10:" + paths.front().filename().string();
  return ds;
}

Dataset scale_samples(const Dataset& ds, double lo, double hi, std::uint64_t seed) {
  if (!(lo < hi)) throw ContractError("scale_samples: requires lo < hi");
  RngStream rng(seed);
  Dataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = rng.uniform(lo, hi);
    for (double& v : out.features.row(i)) v *= m;
  }
  out.provenance += "|scaled";
  return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.features = gather_rows(ds.features, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(ds.labels[i]);
  out.class_count = ds.class_count;
  out.provenance = ds.provenance;
  return out;
}

Dataset stratified_cap(const Dataset& ds, std::size_t cap) {
  if (cap == 0 || cap >= ds.size()) return ds;
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < ds.size(); ++i) by_label[ds.labels[i]].push_back(i);
  std::vector<std::size_t> picked;
  picked.reserve(cap);
  for (std::size_t round = 0; picked.size() < cap; ++round) {
    for (const auto& [label, idx] : by_label) {
      if (round < idx.size() && picked.size() < cap) picked.push_back(idx[round]);
    }
  }
  std::sort(picked.begin(), picked.end());
  Dataset out = subset(ds, picked);
  out.provenance += "|cap=" + std::to_string(cap);
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dims() != b.dims()) throw ContractError("concat: feature widths differ");
  std::vector<double> f(a.features.data().begin(), a.features.data().end());
  f.insert(f.end(), b.features.data().begin(), b.features.data().end());
  Dataset out;
  out.features = Tensor(a.size() + b.size(), a.dims(), std::move(f));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.class_count = std::max(a.class_count, b.class_count);
  out.provenance = a.provenance;
  return out;
}

void save_dataset(std::ostream& out, const Dataset& ds) {
  detail::write_magic(out, kDatasetMagic, kDatasetMagicLen);
  detail::write_le<std::uint64_t>(out, ds.size());
  detail::write_le<std::uint64_t>(out, ds.dims());
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.class_count));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.provenance.size()));
  out.write(ds.provenance.data(), static_cast<std::streamsize>(ds.provenance.size()));
  for (double v : ds.features.data()) detail::write_f64(out, v);
  for (int y : ds.labels) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(y));
  if (!out) throw FormatError("save_dataset: write failed");
}

Dataset load_dataset(std::istream& in) {
  detail::expect_magic(in, kDatasetMagic, kDatasetMagicLen);
  const auto n = detail::read_le<std::uint64_t>(in, "sample count");
  const auto d = detail::read_le<std::uint64_t>(in, "dims");
  Dataset ds;
  ds.class_count = detail::read_le<std::uint32_t>(in, "class count");
  const auto plen = detail::read_le<std::uint32_t>(in, "provenance length");
  ds.provenance.resize(plen);
  if (!in.read(ds.provenance.data(), plen)) throw FormatError("truncated provenance");
  std::vector<double> f(n * d);
  for (auto& v : f) v = detail::read_f64(in, "features");
  ds.features = Tensor(n, d, std::move(f));
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = static_cast<int>(detail::read_le<std::uint32_t>(in, "labels"));
  ds.validate();
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_dataset(out, ds);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return load_dataset(in);
}

}  // namespace fullnorm
