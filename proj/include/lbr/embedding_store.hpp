#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbr/error.hpp"

namespace lbr {

enum class Label : std::uint8_t { kReal = 0, kFake = 1 };
enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };
enum class SourceKind { kRealSource, kGenerator };

std::string to_string(Label label);
std::string to_string(Split split);
std::string to_string(SourceKind kind);

struct EmbeddingRecord {
  std::vector<float> embedding;
  Label label = Label::kReal;
  std::uint16_t generator_id = 0;
  Split split = Split::kTrain;
};

struct ManifestEntry {
  std::uint16_t id = 0;
  std::string name;
  SourceKind kind = SourceKind::kGenerator;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::uint32_t dimension = 0;
  std::string backbone_tag;
  std::vector<ManifestEntry> entries;

  /// Entry with the given id, or nullptr.
  const ManifestEntry* find(std::uint16_t id) const;
  /// Throws StoreError(kManifestInvalid) when ids are not unique/dense or dimension is 0.
  void validate() const;

  bool operator==(const Manifest&) const = default;
};

nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& doc);

struct EmbeddingStore {
  Manifest manifest;
  std::vector<EmbeddingRecord> records;

  std::uint32_t dimension() const { return manifest.dimension; }
  std::size_t size() const { return records.size(); }
};

/// Field-by-field equality with floats compared by bit pattern.
bool bitwise_equal(const EmbeddingStore& a, const EmbeddingStore& b);

enum class StoreErrc {
  kDimensionMismatch,
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kNonFinite,
  kDanglingGenerator,
  kKindMismatch,
  kBadLabel,
  kBadSplit,
  kTrailingData,
  kManifestInvalid,
};

std::string_view to_string(StoreErrc code);

class StoreError : public Error {
 public:
  StoreError(StoreErrc code, const std::string& detail, std::uint64_t bytes_written = 0);
  StoreErrc code() const noexcept { return code_; }
  /// Only meaningful for kIo raised by write_store.
  std::uint64_t bytes_written() const noexcept { return bytes_written_; }

 private:
  StoreErrc code_;
  std::uint64_t bytes_written_;
};

inline constexpr char kStoreMagic[4] = {'L', 'B', 'R', 'S'};
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::uint64_t kStoreHeaderBytes = 4 + 4 + 8 + 4;

constexpr std::uint64_t store_record_bytes(std::uint32_t dimension) {
  return std::uint64_t{dimension} * 4 + 1 + 2 + 1;
}

/// Checks every record invariant against the manifest; throws StoreError.
void validate(const EmbeddingStore& store);

/// Writes the binary payload (header + records). The store is fully validated
/// before the first byte goes out. Returns the number of bytes written.
std::uint64_t write_store(const EmbeddingStore& store, std::ostream& sink);

/// Reads and validates a binary payload against `manifest`.
EmbeddingStore read_store(std::istream& source, const Manifest& manifest);

std::filesystem::path manifest_path_for(const std::filesystem::path& store_path);

/// Writes `path` and its sidecar `<path>.manifest.json`.
std::uint64_t write_store_file(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store_file(const std::filesystem::path& path);

struct RecordKey {
  Label label;
  std::uint16_t generator_id;
  Split split;
};

using RecordPredicate = std::function<bool(const RecordKey&)>;

/// Indices (in store order) of records satisfying `predicate`.
std::vector<std::size_t> partition(const EmbeddingStore& store, const RecordPredicate& predicate);

}  // namespace lbr
