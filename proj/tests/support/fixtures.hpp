#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lbr/embedding_store.hpp"
#include "lbr/rng.hpp"

namespace lbr::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lbrkit-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Manifest: id 0 real source "real", ids 1..generators fakes "gen<k>".
inline Manifest simple_manifest(std::uint32_t dim, std::uint16_t generators = 1) {
  Manifest m;
  m.dimension = dim;
  m.backbone_tag = "test";
  m.entries.push_back({0, "real", SourceKind::kRealSource});
  for (std::uint16_t g = 1; g <= generators; ++g) {
    m.entries.push_back({g, "gen" + std::to_string(g), SourceKind::kGenerator});
  }
  return m;
}

inline EmbeddingRecord record(std::vector<float> e, Label label, std::uint16_t gen, Split split) {
  return EmbeddingRecord{std::move(e), label, gen, split};
}

/// Random valid store: `n` records, labels/splits/generators drawn at random.
inline EmbeddingStore random_store(Rng& rng, std::uint32_t dim, std::size_t n,
                                   std::uint16_t generators = 3) {
  EmbeddingStore s;
  s.manifest = simple_manifest(dim, generators);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord r;
    r.embedding.resize(dim);
    for (auto& v : r.embedding) v = static_cast<float>(rng.normal() * 10.0);
    r.label = rng.coin() ? Label::kFake : Label::kReal;
    r.generator_id =
        r.label == Label::kReal ? 0 : static_cast<std::uint16_t>(1 + rng.index(generators));
    r.split = rng.coin() ? Split::kTest : Split::kTrain;
    s.records.push_back(std::move(r));
  }
  return s;
}

}  // namespace lbr::test
