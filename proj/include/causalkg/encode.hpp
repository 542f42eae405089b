#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "causalkg/http.hpp"
#include "causalkg/kgstore.hpp"

namespace causalkg {

using Vector = std::vector<double>;

// Text -> unit-norm vector.
class Encoder {
 public:
  virtual ~Encoder() = default;
  // Throws EmptyText for blank input.
  virtual Vector encode(std::string_view text) const = 0;
  // Equal fingerprints produce the same vectors for the same text.
  virtual std::string fingerprint() const = 0;
};

/// Signed feature hashing of lowercase whitespace tokens.
///
/// Each token adds +-1 to one of `dim` buckets, both chosen by a seeded hash;
/// the sum is L2-normalized. If every token cancels out, the whole text is
/// hashed as a single token instead so the output is never zero.
class LocalEncoder final : public Encoder {
 public:
  explicit LocalEncoder(std::size_t dim = 256, std::uint64_t seed = 0x6b67);

  Vector encode(std::string_view text) const override;
  std::string fingerprint() const override;
  std::size_t dim() const { return dim_; }

 private:
  void add_token(Vector& v, std::string_view token) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

// POST {base}/embeddings {model, input}; reads data[0].embedding.
class RemoteEncoder final : public Encoder {
 public:
  RemoteEncoder(std::shared_ptr<HttpTransport> http, RemoteEndpoint endpoint);
  Vector encode(std::string_view text) const override;
  std::string fingerprint() const override;

 private:
  std::shared_ptr<HttpTransport> http_;
  RemoteEndpoint endpoint_;
};

inline Vector encode_text(std::string_view text, const Encoder& enc) { return enc.encode(text); }

// Encodes "subject relation object".
Vector encode_triple(const Triple& t, const Encoder& enc);

// Throws DimensionMismatch or ZeroVector.
double cosine_sim(std::span<const double> a, std::span<const double> b);

struct IndexEntry {
  EdgeKey key;
  Vector vec;
  NodeId src = 0;
  NodeId dst = 0;
};

// One entry per graph edge, sorted by edge key.
struct TripleIndex {
  std::size_t dim = 0;
  std::string encoder;  // fingerprint of the encoder that built it
  std::vector<IndexEntry> entries;
};

TripleIndex build_triple_index(const TemporalGraph& g, const Encoder& enc, std::size_t concurrency = 1);

// triple_index.json: {"dim", "encoder", "entries": [{"edge": [src, rel, dst], "vec": [...]}]}.
void write_triple_index_json(const std::filesystem::path& path, const TripleIndex& index);
// Node ids are resolved against `g`; edges missing from it raise CorruptFile.
TripleIndex read_triple_index_json(const std::filesystem::path& path, const TemporalGraph& g);

}  // namespace causalkg
