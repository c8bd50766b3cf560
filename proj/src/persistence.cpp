#include "edet/persistence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::io {

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void str(std::string_view s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vec f64s(std::uint64_t n) {
    need_count(n, 8);
    Vec v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t count(std::size_t element_bytes) {
    const std::uint64_t n = u64();
    need_count(n, element_bytes);
    return n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) {
      throw FormatError("payload overrun: need " + std::to_string(n) + " bytes at payload offset " +
                        std::to_string(pos_) + ", " + std::to_string(bytes_.size() - pos_) +
                        " remain");
    }
  }
  void need_count(std::uint64_t n, std::size_t element_bytes) const {
    if (element_bytes > 0 && n > (bytes_.size() - pos_) / element_bytes) need(n * element_bytes);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kFixedPrefix = 40;  // through the metadata length

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_container(const std::filesystem::path& path, ArtifactKind kind, const ArtifactInfo& info,
                     std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 8));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u64(info.master_seed);
  w.u64(info.config_hash);
  w.str(info.metadata);
  w.u64(payload.size());
  w.raw(payload);
  w.u64(fnv1a64(w.bytes()));
  write_file_atomic(path, w.bytes());
}

struct Container {
  ArtifactHeader header;
  std::vector<std::uint8_t> payload;
};

Container read_container(const std::filesystem::path& path, std::optional<ArtifactKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError(path.string() + " is not an artifact container (bad magic)");
  }
  if (bytes.size() < kFixedPrefix) {
    throw FormatError(path.string() + " truncated: expected at least " + std::to_string(kFixedPrefix) +
                      " header bytes, found " + std::to_string(bytes.size()));
  }
  ByteReader r(bytes);
  r.u64();  // magic
  Container c;
  c.header.version = r.u32();
  if (c.header.version != kFormatVersion) {
    throw UnsupportedVersionError(path.string() + " has format version " +
                                  std::to_string(c.header.version) + "; this build reads version " +
                                  std::to_string(kFormatVersion));
  }
  c.header.kind = static_cast<ArtifactKind>(r.u32());
  c.header.master_seed = r.u64();
  c.header.config_hash = r.u64();

  // Fixed-position reads so that truncation is reported as a length mismatch.
  auto le64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  const std::uint64_t meta_len = le64(32);
  std::uint64_t expected_len = kFixedPrefix + meta_len + 8;
  if (meta_len > bytes.size() || bytes.size() < expected_len) {
    throw FormatError(path.string() + " truncated: expected at least " + std::to_string(expected_len) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  const std::uint64_t payload_len = le64(kFixedPrefix + meta_len);
  expected_len = kFixedPrefix + meta_len + 8 + payload_len + 8;
  if (payload_len > bytes.size() || bytes.size() != expected_len) {
    throw FormatError(path.string() + " has wrong length: expected " + std::to_string(expected_len) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t stored = le64(body);
  const std::uint64_t actual = fnv1a64(std::span<const std::uint8_t>(bytes.data(), body));
  if (stored != actual) throw ChecksumError(path.string() + " failed checksum verification");

  c.header.metadata.assign(reinterpret_cast<const char*>(bytes.data() + kFixedPrefix), meta_len);
  if (expected && c.header.kind != *expected) {
    throw KindMismatchError(path.string() + " holds a " + std::string(to_string(c.header.kind)) +
                            " artifact, expected " + std::string(to_string(*expected)));
  }
  const std::size_t start = kFixedPrefix + meta_len + 8;
  c.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                   bytes.begin() + static_cast<std::ptrdiff_t>(start + payload_len));
  return c;
}

void finish(const ByteReader& r, const std::filesystem::path& path) {
  if (!r.done()) throw FormatError(path.string() + " payload has trailing bytes");
}

void check_finite(std::span<const double> v, std::string_view what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::classifier: return "classifier";
    case ArtifactKind::svm_model: return "svm-model";
    case ArtifactKind::detection_dataset: return "detection-dataset";
    case ArtifactKind::labeled_dataset: return "labeled-dataset";
    case ArtifactKind::sample_pool: return "sample-pool";
  }
  return "unknown";
}

void save_classifier(const nnet::Classifier& clf, const std::filesystem::path& path,
                     const ArtifactInfo& info) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(clf.activation()));
  w.u64(clf.seed());
  w.u64(clf.layers().size());
  for (const auto& l : clf.layers()) {
    check_finite(l.weights, "classifier");
    check_finite(l.bias, "classifier");
    w.u64(l.in);
    w.u64(l.out);
    w.f64s(l.weights);
    w.f64s(l.bias);
  }
  write_container(path, ArtifactKind::classifier, info, w.bytes());
}

Loaded<nnet::Classifier> load_classifier(const std::filesystem::path& path) {
  Container c = read_container(path, ArtifactKind::classifier);
  ByteReader r(c.payload);
  const auto activation = static_cast<nnet::Activation>(r.u32());
  if (activation != nnet::Activation::relu) throw FormatError("unknown activation in " + path.string());
  const std::uint64_t seed = r.u64();
  const std::size_t n = r.count(16);
  std::vector<nnet::DenseLayer> layers(n);
  for (auto& l : layers) {
    l.in = r.u64();
    l.out = r.u64();
    l.weights = r.f64s(l.in * l.out);
    l.bias = r.f64s(l.out);
  }
  finish(r, path);
  return {nnet::Classifier(std::move(layers), seed, activation), std::move(c.header)};
}

void save_svm(const svm::SvmModel& m, const std::filesystem::path& path, const ArtifactInfo& info) {
  check_finite(m.weights, "SVM weights");
  ByteWriter w;
  w.f64(m.lambda);
  w.u64(m.seed);
  w.u64(m.weights.size());
  w.f64s(m.weights);
  w.f64(m.bias);
  w.f64s(m.standardizer.mean);
  w.f64s(m.standardizer.scale);
  w.u64(m.objective_trace.size());
  w.f64s(m.objective_trace);
  write_container(path, ArtifactKind::svm_model, info, w.bytes());
}

Loaded<svm::SvmModel> load_svm(const std::filesystem::path& path) {
  Container c = read_container(path, ArtifactKind::svm_model);
  ByteReader r(c.payload);
  svm::SvmModel m;
  m.lambda = r.f64();
  m.seed = r.u64();
  const std::size_t d = r.count(24);
  m.weights = r.f64s(d);
  m.bias = r.f64();
  m.standardizer.mean = r.f64s(d);
  m.standardizer.scale = r.f64s(d);
  m.objective_trace = r.f64s(r.count(8));
  finish(r, path);
  return {std::move(m), std::move(c.header)};
}

void save_detection_dataset(const feature::DetectionDataset& data, const std::filesystem::path& path,
                            const ArtifactInfo& info) {
  ByteWriter w;
  w.u64(data.penultimate_dim);
  w.u64(data.class_count);
  w.u64(data.records.size());
  for (const auto& rec : data.records) {
    if (rec.features.size() != data.feature_dim()) throw InputError("record feature dimension mismatch");
    check_finite(rec.features, "detection record");
    w.u32(static_cast<std::uint32_t>(rec.family));
    w.u32(static_cast<std::uint32_t>(rec.label));
    w.u64(rec.source_id);
    w.f64s(rec.features);
  }
  w.u64(data.manifest.balance_seed);
  for (const auto* counts : {&data.manifest.pre_balance_counts, &data.manifest.post_balance_counts}) {
    w.u64(counts->size());
    for (const auto& [name, n] : *counts) {
      w.str(name);
      w.u64(n);
    }
  }
  write_container(path, ArtifactKind::detection_dataset, info, w.bytes());
}

Loaded<feature::DetectionDataset> load_detection_dataset(const std::filesystem::path& path) {
  Container c = read_container(path, ArtifactKind::detection_dataset);
  ByteReader r(c.payload);
  feature::DetectionDataset d;
  d.penultimate_dim = r.u64();
  d.class_count = r.u64();
  const std::size_t n = r.count(16);
  d.records.resize(n);
  for (auto& rec : d.records) {
    const std::uint32_t family = r.u32();
    if (family >= feature::kFamilyCount) throw FormatError("unknown family tag in " + path.string());
    rec.family = static_cast<feature::Family>(family);
    rec.label = static_cast<int>(r.u32());
    rec.source_id = r.u64();
    rec.features = r.f64s(d.feature_dim());
  }
  d.manifest.balance_seed = r.u64();
  for (auto* counts : {&d.manifest.pre_balance_counts, &d.manifest.post_balance_counts}) {
    const std::size_t m = r.count(16);
    for (std::size_t i = 0; i < m; ++i) {
      std::string name = r.str();
      (*counts)[name] = r.u64();
    }
  }
  finish(r, path);
  return {std::move(d), std::move(c.header)};
}

void save_labeled_dataset(const LabeledDataset& data, const std::filesystem::path& path,
                          const ArtifactInfo& info) {
  ByteWriter w;
  w.u64(data.class_count);
  w.u32(static_cast<std::uint32_t>(data.split));
  w.u64(data.seed);
  w.u64(data.samples.size());
  w.u64(data.input_dim());
  for (const auto& s : data.samples) {
    if (s.input.size() != data.input_dim()) throw InputError("ragged dataset");
    check_finite(s.input, "dataset sample");
    w.u64(s.label);
    w.f64s(s.input);
  }
  write_container(path, ArtifactKind::labeled_dataset, info, w.bytes());
}

Loaded<LabeledDataset> load_labeled_dataset(const std::filesystem::path& path) {
  Container c = read_container(path, ArtifactKind::labeled_dataset);
  ByteReader r(c.payload);
  LabeledDataset d;
  d.class_count = r.u64();
  const std::uint32_t split = r.u32();
  if (split > static_cast<std::uint32_t>(Split::all)) throw FormatError("unknown split in " + path.string());
  d.split = static_cast<Split>(split);
  d.seed = r.u64();
  const std::size_t n = r.count(8);
  const std::uint64_t dim = r.u64();
  d.samples.resize(n);
  for (auto& s : d.samples) {
    s.label = r.u64();
    s.input = r.f64s(dim);
  }
  finish(r, path);
  return {std::move(d), std::move(c.header)};
}

void save_sample_pool(const SamplePool& pool, const std::filesystem::path& path,
                      const ArtifactInfo& info) {
  if (pool.source_ids.size() != pool.samples.size()) throw InputError("pool source id count mismatch");
  ByteWriter w;
  w.str(pool.name);
  w.u64(pool.samples.size());
  const std::size_t dim = pool.samples.empty() ? 0 : pool.samples.front().input.size();
  w.u64(dim);
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    if (pool.samples[i].input.size() != dim) throw InputError("ragged pool");
    check_finite(pool.samples[i].input, "pool sample");
    w.u64(pool.samples[i].label);
    w.u64(pool.source_ids[i]);
    w.f64s(pool.samples[i].input);
  }
  write_container(path, ArtifactKind::sample_pool, info, w.bytes());
}

Loaded<SamplePool> load_sample_pool(const std::filesystem::path& path) {
  Container c = read_container(path, ArtifactKind::sample_pool);
  ByteReader r(c.payload);
  SamplePool p;
  p.name = r.str();
  const std::size_t n = r.count(16);
  const std::uint64_t dim = r.u64();
  p.samples.resize(n);
  p.source_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.samples[i].label = r.u64();
    p.source_ids[i] = r.u64();
    p.samples[i].input = r.f64s(dim);
  }
  finish(r, path);
  return {std::move(p), std::move(c.header)};
}

ArtifactHeader read_header(const std::filesystem::path& path) {
  return read_container(path, std::nullopt).header;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace edet::io
