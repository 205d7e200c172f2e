#include "lbr/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace lbr {

static_assert(std::endian::native == std::endian::little,
              "store I/O assumes a little-endian host");

std::string to_string(Label label) { return label == Label::kReal ? "real" : "fake"; }
std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }
std::string to_string(SourceKind kind) {
  return kind == SourceKind::kRealSource ? "real-source" : "generator";
}

std::string_view to_string(StoreErrc code) {
  switch (code) {
    case StoreErrc::kDimensionMismatch: return "dimension mismatch";
    case StoreErrc::kIo: return "I/O error";
    case StoreErrc::kBadMagic: return "bad magic";
    case StoreErrc::kUnsupportedVersion: return "unsupported version";
    case StoreErrc::kTruncated: return "truncated";
    case StoreErrc::kNonFinite: return "non-finite component";
    case StoreErrc::kDanglingGenerator: return "dangling generator id";
    case StoreErrc::kKindMismatch: return "label/kind mismatch";
    case StoreErrc::kBadLabel: return "bad label";
    case StoreErrc::kBadSplit: return "bad split";
    case StoreErrc::kTrailingData: return "trailing data";
    case StoreErrc::kManifestInvalid: return "invalid manifest";
  }
  return "unknown";
}

StoreError::StoreError(StoreErrc code, const std::string& detail, std::uint64_t bytes_written)
    : Error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      bytes_written_(bytes_written) {}

const ManifestEntry* Manifest::find(std::uint16_t id) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [id](const ManifestEntry& e) { return e.id == id; });
  return it == entries.end() ? nullptr : &*it;
}

void Manifest::validate() const {
  if (dimension == 0) throw StoreError(StoreErrc::kManifestInvalid, "dimension must be > 0");
  std::vector<std::uint16_t> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != i) {
      throw StoreError(StoreErrc::kManifestInvalid,
                       "generator ids must be unique and dense from 0");
    }
  }
}

nlohmann::json to_json(const Manifest& manifest) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id}, {"name", e.name}, {"kind", to_string(e.kind)}});
  }
  return {{"dimension", manifest.dimension},
          {"backbone_tag", manifest.backbone_tag},
          {"entries", entries}};
}

Manifest manifest_from_json(const nlohmann::json& doc) {
  Manifest m;
  try {
    m.dimension = doc.at("dimension").get<std::uint32_t>();
    m.backbone_tag = doc.value("backbone_tag", "");
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.id = e.at("id").get<std::uint16_t>();
      entry.name = e.at("name").get<std::string>();
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "real-source") {
        entry.kind = SourceKind::kRealSource;
      } else if (kind == "generator") {
        entry.kind = SourceKind::kGenerator;
      } else {
        throw StoreError(StoreErrc::kManifestInvalid, "unknown entry kind '" + kind + "'");
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw StoreError(StoreErrc::kManifestInvalid, ex.what());
  }
  m.validate();
  return m;
}

bool bitwise_equal(const EmbeddingStore& a, const EmbeddingStore& b) {
  if (!(a.manifest == b.manifest) || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.label != y.label || x.generator_id != y.generator_id || x.split != y.split) return false;
    if (x.embedding.size() != y.embedding.size()) return false;
    if (std::memcmp(x.embedding.data(), y.embedding.data(), x.embedding.size() * sizeof(float)) !=
        0) {
      return false;
    }
  }
  return true;
}

namespace {

void check_record(const Manifest& manifest, const EmbeddingRecord& r, std::size_t index) {
  const auto where = "record " + std::to_string(index);
  if (r.embedding.size() != manifest.dimension) {
    throw StoreError(StoreErrc::kDimensionMismatch,
                     where + " has " + std::to_string(r.embedding.size()) + " components, expected " +
                         std::to_string(manifest.dimension));
  }
  if (r.label != Label::kReal && r.label != Label::kFake) {
    throw StoreError(StoreErrc::kBadLabel, where);
  }
  if (r.split != Split::kTrain && r.split != Split::kTest) {
    throw StoreError(StoreErrc::kBadSplit, where);
  }
  for (std::size_t k = 0; k < r.embedding.size(); ++k) {
    if (!std::isfinite(r.embedding[k])) {
      throw StoreError(StoreErrc::kNonFinite, where + " component " + std::to_string(k));
    }
  }
  const auto* entry = manifest.find(r.generator_id);
  if (entry == nullptr) {
    throw StoreError(StoreErrc::kDanglingGenerator,
                     where + " references generator id " + std::to_string(r.generator_id));
  }
  const auto expected = r.label == Label::kReal ? SourceKind::kRealSource : SourceKind::kGenerator;
  if (entry->kind != expected) {
    throw StoreError(StoreErrc::kKindMismatch, where + " is " + to_string(r.label) +
                                                   " but generator '" + entry->name + "' is " +
                                                   to_string(entry->kind));
  }
}

template <typename T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

}  // namespace

void validate(const EmbeddingStore& store) {
  store.manifest.validate();
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    check_record(store.manifest, store.records[i], i);
  }
}

std::uint64_t write_store(const EmbeddingStore& store, std::ostream& sink) {
  validate(store);

  std::string header;
  header.append(kStoreMagic, 4);
  put<std::uint32_t>(header, kStoreVersion);
  put<std::uint64_t>(header, store.records.size());
  put<std::uint32_t>(header, store.dimension());

  std::uint64_t written = 0;
  auto emit = [&](const std::string& bytes) {
    sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!sink) {
      throw StoreError(StoreErrc::kIo, "sink rejected write after " + std::to_string(written) +
                                           " bytes", written);
    }
    written += bytes.size();
  };
  emit(header);

  std::string record;
  record.reserve(store_record_bytes(store.dimension()));
  for (const auto& r : store.records) {
    record.clear();
    record.append(reinterpret_cast<const char*>(r.embedding.data()),
                  r.embedding.size() * sizeof(float));
    put<std::uint8_t>(record, static_cast<std::uint8_t>(r.label));
    put<std::uint16_t>(record, r.generator_id);
    put<std::uint8_t>(record, static_cast<std::uint8_t>(r.split));
    emit(record);
  }
  sink.flush();
  if (!sink) throw StoreError(StoreErrc::kIo, "flush failed", written);
  return written;
}

EmbeddingStore read_store(std::istream& source, const Manifest& manifest) {
  manifest.validate();

  std::array<char, kStoreHeaderBytes> header{};
  source.read(header.data(), header.size());
  const auto got = static_cast<std::size_t>(source.gcount());
  if (got < 4 || std::memcmp(header.data(), kStoreMagic, 4) != 0) {
    throw StoreError(StoreErrc::kBadMagic, "expected \"LBRS\"");
  }
  if (got < header.size()) throw StoreError(StoreErrc::kTruncated, "header");

  const auto version = get<std::uint32_t>(header.data() + 4);
  if (version != kStoreVersion) {
    throw StoreError(StoreErrc::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(header.data() + 8);
  const auto dim = get<std::uint32_t>(header.data() + 16);
  if (dim != manifest.dimension) {
    throw StoreError(StoreErrc::kDimensionMismatch,
                     "header dimension " + std::to_string(dim) + " vs manifest " +
                         std::to_string(manifest.dimension));
  }

  EmbeddingStore store;
  store.manifest = manifest;
  const auto record_bytes = store_record_bytes(dim);
  std::vector<char> buf(record_bytes);
  // Guard the reservation against absurd counts in corrupt headers.
  store.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    source.read(buf.data(), static_cast<std::streamsize>(record_bytes));
    if (static_cast<std::uint64_t>(source.gcount()) != record_bytes) {
      throw StoreError(StoreErrc::kTruncated, "record " + std::to_string(i) + " of " +
                                                  std::to_string(count));
    }
    EmbeddingRecord r;
    r.embedding.resize(dim);
    std::memcpy(r.embedding.data(), buf.data(), std::size_t{dim} * sizeof(float));
    const char* tail = buf.data() + std::size_t{dim} * sizeof(float);
    const auto label = get<std::uint8_t>(tail);
    const auto split = get<std::uint8_t>(tail + 3);
    if (label > 1) throw StoreError(StoreErrc::kBadLabel, "record " + std::to_string(i));
    if (split > 1) throw StoreError(StoreErrc::kBadSplit, "record " + std::to_string(i));
    r.label = static_cast<Label>(label);
    r.generator_id = get<std::uint16_t>(tail + 1);
    r.split = static_cast<Split>(split);
    check_record(manifest, r, static_cast<std::size_t>(i));
    store.records.push_back(std::move(r));
  }
  if (source.peek() != std::char_traits<char>::eof()) {
    throw StoreError(StoreErrc::kTrailingData, "bytes after record " + std::to_string(count));
  }
  return store;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& store_path) {
  auto p = store_path;
  p += ".manifest.json";
  return p;
}

std::uint64_t write_store_file(const EmbeddingStore& store, const std::filesystem::path& path) {
  validate(store);
  std::uint64_t bytes = 0;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(StoreErrc::kIo, "cannot open " + path.string());
    bytes = write_store(store, out);
  }
  std::ofstream side(manifest_path_for(path), std::ios::trunc);
  if (!side) throw StoreError(StoreErrc::kIo, "cannot open " + manifest_path_for(path).string());
  side << to_json(store.manifest).dump(2) << '\n';
  if (!side) throw StoreError(StoreErrc::kIo, "cannot write manifest for " + path.string());
  return bytes;
}

EmbeddingStore read_store_file(const std::filesystem::path& path) {
  const auto side_path = manifest_path_for(path);
  std::ifstream side(side_path);
  if (!side) throw StoreError(StoreErrc::kIo, "cannot open " + side_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& ex) {
    throw StoreError(StoreErrc::kManifestInvalid, side_path.string() + ": " + ex.what());
  }
  const auto manifest = manifest_from_json(doc);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreErrc::kIo, "cannot open " + path.string());
  return read_store(in, manifest);
}

std::vector<std::size_t> partition(const EmbeddingStore& store, const RecordPredicate& predicate) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    const auto& r = store.records[i];
    if (predicate(RecordKey{r.label, r.generator_id, r.split})) out.push_back(i);
  }
  return out;
}

}  // namespace lbr
