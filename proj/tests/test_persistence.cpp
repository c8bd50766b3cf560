#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "edet/error.hpp"
#include "edet/persistence.hpp"
#include "support/oracles.hpp"

using namespace edet;
namespace fs = std::filesystem;

namespace {

fs::path temp(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "edet-persistence-test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<char> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_all(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

nnet::Classifier random_classifier(Rng& rng) {
  const std::size_t dims[] = {1 + rng.index(6), 1 + rng.index(6), 2 + rng.index(4)};
  return nnet::Classifier(oracle::random_net(rng, dims).layers(), rng.next_u64());
}

svm::SvmModel random_svm(Rng& rng) {
  svm::SvmModel m;
  const std::size_t d = 1 + rng.index(8);
  for (std::size_t i = 0; i < d; ++i) {
    m.weights.push_back(rng.normal());
    m.standardizer.mean.push_back(rng.normal());
    m.standardizer.scale.push_back(rng.uniform(0.1, 3.0));
  }
  m.bias = rng.normal();
  m.lambda = rng.uniform(1e-5, 1.0);
  m.seed = rng.next_u64();
  for (std::size_t i = 0; i < rng.index(5); ++i) m.objective_trace.push_back(rng.uniform());
  return m;
}

feature::DetectionDataset random_detection(Rng& rng) {
  feature::DetectionDataset d;
  d.penultimate_dim = 1 + rng.index(4);
  d.class_count = 2 + rng.index(3);
  for (std::size_t i = 0; i < rng.index(20); ++i) {
    feature::DetectionRecord r;
    for (std::size_t j = 0; j < d.feature_dim(); ++j) r.features.push_back(rng.normal());
    r.family = static_cast<feature::Family>(rng.index(feature::kFamilyCount));
    r.label = feature::default_label(r.family);
    r.source_id = rng.next_u64();
    d.records.push_back(std::move(r));
  }
  d.manifest.pre_balance_counts["correct"] = rng.index(100);
  d.manifest.post_balance_counts["ood"] = rng.index(100);
  d.manifest.balance_seed = rng.next_u64();
  return d;
}

LabeledDataset random_labeled(Rng& rng) {
  LabeledDataset d;
  d.class_count = 2 + rng.index(5);
  d.split = static_cast<Split>(rng.index(4));
  d.seed = rng.next_u64();
  const std::size_t dim = 1 + rng.index(5);
  for (std::size_t i = 0; i < rng.index(15); ++i) {
    Sample s;
    for (std::size_t j = 0; j < dim; ++j) s.input.push_back(rng.uniform());
    s.label = rng.index(d.class_count);
    d.samples.push_back(std::move(s));
  }
  return d;
}

io::SamplePool random_pool(Rng& rng) {
  io::SamplePool p;
  p.name = "adversarial:fgsm";
  const std::size_t dim = 1 + rng.index(5);
  for (std::size_t i = 0; i < rng.index(15); ++i) {
    Sample s;
    for (std::size_t j = 0; j < dim; ++j) s.input.push_back(rng.uniform());
    s.label = rng.index(10);
    p.samples.push_back(std::move(s));
    p.source_ids.push_back(rng.next_u64());
  }
  return p;
}

}  // namespace

TEST(Persistence, RoundTripEveryKind) {
  Rng rng(1);
  const io::ArtifactInfo info{42, 0xfeedfacecafebeefULL, R"({"note":"x"})"};
  const fs::path p = temp("rt.edet");
  for (int t = 0; t < 25; ++t) {
    const auto clf = random_classifier(rng);
    io::save_classifier(clf, p, info);
    const auto lc = io::load_classifier(p);
    EXPECT_EQ(lc.value, clf);
    EXPECT_EQ(lc.header.master_seed, 42u);
    EXPECT_EQ(lc.header.config_hash, 0xfeedfacecafebeefULL);
    EXPECT_EQ(lc.header.metadata, info.metadata);
    EXPECT_EQ(lc.header.kind, io::ArtifactKind::classifier);

    const auto m = random_svm(rng);
    io::save_svm(m, p, info);
    EXPECT_EQ(io::load_svm(p).value, m);

    const auto d = random_detection(rng);
    io::save_detection_dataset(d, p, info);
    EXPECT_EQ(io::load_detection_dataset(p).value, d);

    const auto l = random_labeled(rng);
    io::save_labeled_dataset(l, p, info);
    EXPECT_EQ(io::load_labeled_dataset(p).value, l);

    const auto sp = random_pool(rng);
    io::save_sample_pool(sp, p, info);
    EXPECT_EQ(io::load_sample_pool(p).value, sp);
  }
}

TEST(Persistence, BitExactDoubles) {
  svm::SvmModel m;
  m.weights = {0.1, -0.0, std::numeric_limits<double>::denorm_min(), 1e308, 1.0 / 3.0};
  m.standardizer.mean = Vec(5, 0.2);
  m.standardizer.scale = Vec(5, 0.7);
  const fs::path p = temp("bits.edet");
  io::save_svm(m, p);
  const auto back = io::load_svm(p).value;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(std::memcmp(&back.weights[i], &m.weights[i], sizeof(double)), 0);
  }
}

TEST(Persistence, WrongKindIsTyped) {
  Rng rng(2);
  const fs::path p = temp("kind.edet");
  io::save_svm(random_svm(rng), p);
  EXPECT_THROW(io::load_classifier(p), KindMismatchError);
  EXPECT_EQ(io::read_header(p).kind, io::ArtifactKind::svm_model);
}

TEST(Persistence, PayloadByteFlipFailsChecksum) {
  Rng rng(3);
  const fs::path p = temp("flip.edet");
  io::save_classifier(random_classifier(rng), p);
  auto bytes = read_all(p);
  bytes[bytes.size() - 20] ^= 0x01;
  write_all(p, bytes);
  EXPECT_THROW(io::load_classifier(p), ChecksumError);
}

TEST(Persistence, EverySingleByteCorruptionIsDetected) {
  Rng rng(4);
  const fs::path p = temp("every.edet");
  io::save_svm(random_svm(rng), p, {1, 2, "{}"});
  const auto good = read_all(p);
  for (std::size_t i = 0; i < good.size(); ++i) {
    for (unsigned char mask : {0x01, 0x80, 0xff}) {
      auto bad = good;
      bad[i] = static_cast<char>(bad[i] ^ mask);
      write_all(p, bad);
      EXPECT_THROW(io::load_svm(p), Error) << "byte " << i;
    }
  }
}

TEST(Persistence, TruncationNamesLengths) {
  Rng rng(5);
  const fs::path p = temp("trunc.edet");
  io::save_classifier(random_classifier(rng), p);
  auto bytes = read_all(p);
  bytes.resize(bytes.size() - 9);
  write_all(p, bytes);
  try {
    io::load_classifier(p);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected"), std::string::npos);
    EXPECT_NE(msg.find(std::to_string(bytes.size())), std::string::npos);
  }
  bytes.resize(10);
  write_all(p, bytes);
  EXPECT_THROW(io::load_classifier(p), FormatError);
}

TEST(Persistence, VersionAndMagic) {
  Rng rng(6);
  const fs::path p = temp("ver.edet");
  io::save_classifier(random_classifier(rng), p);
  auto bytes = read_all(p);
  bytes[8] = 2;
  write_all(p, bytes);
  EXPECT_THROW(io::load_classifier(p), UnsupportedVersionError);
  bytes[8] = 1;
  bytes[0] = 'X';
  write_all(p, bytes);
  EXPECT_THROW(io::load_classifier(p), FormatError);
  EXPECT_THROW(io::load_classifier(temp("missing.edet")), IoError);
}

TEST(Persistence, RejectsNonFiniteAndBadPath) {
  svm::SvmModel m;
  m.weights = {std::numeric_limits<double>::quiet_NaN()};
  m.standardizer = {{0.0}, {1.0}};
  EXPECT_THROW(io::save_svm(m, temp("nan.edet")), InputError);
  m.weights = {1.0};
  EXPECT_THROW(io::save_svm(m, "/nonexistent-dir/x/y.edet"), IoError);
}

TEST(Persistence, AtomicWriteLeavesNoTemporary) {
  const fs::path p = temp("text.txt");
  io::write_text_atomic(p, "hello\n");
  EXPECT_EQ(read_all(p).size(), 6u);
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}
