#pragma once
// Dialogue data structures, label spaces, the on-disk feature container, the
// JSON-lines conversation manifest, and the synthetic corpus generator that
// stands in for real datasets at desk scale.
//
// Feature container layout (all integers little-endian):
//   magic "MAGF" | version u16 | modality u8 (0=text,1=audio,2=video)
//   dimension u32 | record count u64
//   per record: id length u16 | id bytes (UTF-8) | dimension x float32

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magtkd/errors.hpp"
#include "magtkd/matrix.hpp"
#include "magtkd/rng.hpp"

namespace magtkd {

enum class Modality : std::uint8_t { text = 0, audio = 1, video = 2 };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "text") return Modality::text;
  if (s == "audio") return Modality::audio;
  if (s == "video") return Modality::video;
  throw InputError("unknown modality: " + s);
}

inline const std::vector<Modality>& all_modalities() {
  static const std::vector<Modality> kAll{Modality::text, Modality::audio, Modality::video};
  return kAll;
}

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw InputError("unknown split: " + s);
}

// ---------------------------------------------------------------------------
// Labels.

struct EmotionLabel {
  int id = -1;
  std::string name;

  friend bool operator==(const EmotionLabel&, const EmotionLabel&) = default;
};

// Dense label space: ids are the indices into `names`.
class LabelSpace {
public:
  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw ValidationError("label space needs at least 2 classes");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw ValidationError("label names must be non-empty");
      for (std::size_t j = i + 1; j < names_.size(); ++j)
        if (names_[i] == names_[j])
          throw ValidationError("duplicate label name: " + names_[i]);
    }
  }

  static LabelSpace meld() {
    return LabelSpace({"neutral", "surprise", "fear", "sadness", "joy", "disgust", "anger"});
  }

  static LabelSpace iemocap() {
    return LabelSpace(
        {"happiness", "sadness", "anger", "excitement", "frustration", "neutral"});
  }

  int size() const { return static_cast<int>(names_.size()); }

  EmotionLabel label(int id) const {
    if (id < 0 || id >= size()) throw InputError("label id out of range");
    return EmotionLabel{id, names_[static_cast<std::size_t>(id)]};
  }

  // -1 when the name is not part of this space.
  int id_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }

  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

private:
  std::vector<std::string> names_;
};

inline LabelSpace label_space_preset(const std::string& name) {
  if (name == "meld") return LabelSpace::meld();
  if (name == "iemocap") return LabelSpace::iemocap();
  throw InputError("unknown label space preset: " + name);
}

// ---------------------------------------------------------------------------
// Dialogue structure.

struct Utterance {
  std::string utterance_id;
  int speaker_id = 0;
  EmotionLabel label;
  std::optional<std::string> text;
  std::optional<std::string> audio_ref;
  std::optional<std::string> video_ref;
};

struct Conversation {
  std::string conversation_id;
  Split split = Split::train;
  std::vector<Utterance> utterances;  // temporal order, fixed after construction

  void validate() const {
    if (conversation_id.empty()) throw ValidationError("conversation_id must be non-empty");
    if (utterances.empty())
      throw ValidationError("conversation " + conversation_id + " has no utterances");
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      const Utterance& u = utterances[i];
      if (u.utterance_id.empty())
        throw ValidationError("empty utterance_id in conversation " + conversation_id);
      if (u.speaker_id < 0)
        throw ValidationError("negative speaker_id for utterance " + u.utterance_id);
      for (std::size_t j = i + 1; j < utterances.size(); ++j)
        if (utterances[j].utterance_id == u.utterance_id)
          throw ValidationError("duplicate utterance_id " + u.utterance_id +
                                " in conversation " + conversation_id);
    }
  }
};

inline std::vector<const Conversation*> conversations_for_split(
    const std::vector<Conversation>& convs, Split split) {
  std::vector<const Conversation*> out;
  for (const auto& c : convs)
    if (c.split == split) out.push_back(&c);
  return out;
}

// ---------------------------------------------------------------------------
// Feature records and stores.

struct FeatureRecord {
  std::string utterance_id;
  Modality modality = Modality::text;
  std::vector<float> vector;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

// Per-modality map utterance_id -> fixed-width vector. `provenance` is
// in-memory metadata (encoder id + config hash); it travels in run manifests,
// not in the binary container, and is excluded from equality.
struct FeatureStore {
  Modality modality = Modality::text;
  int dimension = 0;
  std::map<std::string, FeatureRecord> records;
  std::string provenance;

  void insert(FeatureRecord rec) {
    if (rec.utterance_id.empty()) throw ValidationError("utterance_id must be non-empty");
    if (rec.modality != modality)
      throw ValidationError("record modality does not match store");
    if (static_cast<int>(rec.vector.size()) != dimension)
      throw ValidationError("record dimension " + std::to_string(rec.vector.size()) +
                            " does not match store dimension " + std::to_string(dimension));
    for (float v : rec.vector)
      if (!std::isfinite(v))
        throw ValidationError("non-finite feature value for " + rec.utterance_id);
    auto id = rec.utterance_id;
    if (!records.emplace(std::move(id), std::move(rec)).second)
      throw ValidationError("duplicate record for utterance " + rec.utterance_id);
  }

  const FeatureRecord& at(const std::string& utterance_id) const {
    auto it = records.find(utterance_id);
    if (it == records.end())
      throw DatasetError("no " + std::string(to_string(modality)) + " feature for utterance " +
                         utterance_id);
    return it->second;
  }

  // Rows in the order of `ids`, widened to double.
  Matrix matrix(const std::vector<std::string>& ids) const {
    Matrix out(static_cast<int>(ids.size()), dimension);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const FeatureRecord& rec = at(ids[r]);
      for (int j = 0; j < dimension; ++j)
        out(static_cast<int>(r), j) = static_cast<double>(rec.vector[j]);
    }
    return out;
  }

  friend bool operator==(const FeatureStore& a, const FeatureStore& b) {
    return a.modality == b.modality && a.dimension == b.dimension && a.records == b.records;
  }
};

// Every utterance of every conversation must resolve to exactly one record.
inline void validate_store_covers(const FeatureStore& store,
                                  const std::vector<Conversation>& convs) {
  for (const auto& c : convs)
    for (const auto& u : c.utterances) store.at(u.utterance_id);
}

// ---------------------------------------------------------------------------
// Binary container IO.

namespace detail {

class ByteWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }
  void bytes(const std::string& s) { buf_ += s; }

  const std::string& str() const { return buf_; }

private:
  std::string buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > data_.size())
      throw FormatError(FormatError::Kind::Truncated, pos_,
                        std::string("truncated payload while reading ") + what);
  }

  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return data;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failure on " + path.string());
}

inline constexpr std::uint16_t kFeatureStoreVersion = 1;

// Serializes records in id order (map order), so identical stores produce
// identical bytes.
inline std::string encode_feature_store(const FeatureStore& store) {
  if (store.dimension <= 0) throw ValidationError("store dimension must be positive");
  detail::ByteWriter w;
  w.bytes("MAGF");
  w.u16(kFeatureStoreVersion);
  w.u8(static_cast<std::uint8_t>(store.modality));
  w.u32(static_cast<std::uint32_t>(store.dimension));
  w.u64(store.records.size());
  for (const auto& [id, rec] : store.records) {
    if (static_cast<int>(rec.vector.size()) != store.dimension)
      throw ValidationError("record dimension mismatch for " + id);
    if (id.size() > 0xffff) throw ValidationError("utterance id too long: " + id);
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
    for (float v : rec.vector) {
      if (!std::isfinite(v)) throw ValidationError("non-finite feature value for " + id);
      w.f32(v);
    }
  }
  return w.str();
}

inline void write_feature_store(const FeatureStore& store, const std::filesystem::path& path) {
  write_file_bytes(path, encode_feature_store(store));
}

// expected_dimension < 0 accepts whatever the header declares.
inline FeatureStore decode_feature_store(std::string data, int expected_dimension = -1) {
  detail::ByteReader r(std::move(data));
  const std::string magic = r.bytes(4, "magic");
  if (magic != "MAGF")
    throw FormatError(FormatError::Kind::BadMagic, 0, "bad magic '" + magic + "'");
  const std::size_t version_off = r.offset();
  const std::uint16_t version = r.u16();
  if (version != kFeatureStoreVersion)
    throw FormatError(FormatError::Kind::BadVersion, version_off,
                      "unsupported version " + std::to_string(version));
  const std::size_t modality_off = r.offset();
  const std::uint8_t modality_tag = r.u8();
  if (modality_tag > 2)
    throw FormatError(FormatError::Kind::BadModality, modality_off,
                      "unknown modality tag " + std::to_string(modality_tag));
  const std::size_t dim_off = r.offset();
  const std::uint32_t dim = r.u32();
  if (dim == 0)
    throw FormatError(FormatError::Kind::BadDimension, dim_off, "zero dimension");
  if (expected_dimension >= 0 && static_cast<std::uint32_t>(expected_dimension) != dim)
    throw FormatError(FormatError::Kind::DimensionMismatch, dim_off,
                      "dimension " + std::to_string(dim) + " does not match expected " +
                          std::to_string(expected_dimension));
  const std::uint64_t count = r.u64();

  FeatureStore store;
  store.modality = static_cast<Modality>(modality_tag);
  store.dimension = static_cast<int>(dim);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint16_t id_len = r.u16();
    const std::string id = r.bytes(id_len, "utterance id");
    FeatureRecord rec;
    rec.utterance_id = id;
    rec.modality = store.modality;
    rec.vector.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::size_t value_off = r.offset();
      const float v = r.f32();
      if (!std::isfinite(v))
        throw FormatError(FormatError::Kind::NonFinite, value_off,
                          "non-finite feature value in record '" + id + "'");
      rec.vector[j] = v;
    }
    if (!store.records.emplace(id, std::move(rec)).second)
      throw FormatError(FormatError::Kind::Truncated, r.offset(),
                        "duplicate record id '" + id + "'");
  }
  if (r.remaining() != 0)
    throw FormatError(FormatError::Kind::TrailingBytes, r.offset(),
                      std::to_string(r.remaining()) + " trailing bytes after last record");
  return store;
}

inline FeatureStore read_feature_store(const std::filesystem::path& path,
                                       int expected_dimension = -1) {
  return decode_feature_store(read_file_bytes(path), expected_dimension);
}

// Same container, records in caller order. Used by embedding dumps where row
// order must follow the manifest rather than id order.
inline std::string encode_feature_records(Modality modality, int dimension,
                                          const std::vector<FeatureRecord>& records) {
  detail::ByteWriter w;
  w.bytes("MAGF");
  w.u16(kFeatureStoreVersion);
  w.u8(static_cast<std::uint8_t>(modality));
  w.u32(static_cast<std::uint32_t>(dimension));
  w.u64(records.size());
  for (const auto& rec : records) {
    if (static_cast<int>(rec.vector.size()) != dimension)
      throw ValidationError("record dimension mismatch for " + rec.utterance_id);
    w.u16(static_cast<std::uint16_t>(rec.utterance_id.size()));
    w.bytes(rec.utterance_id);
    for (float v : rec.vector) w.f32(v);
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Conversation manifest: UTF-8 JSON-lines, one conversation per line.

inline std::vector<Conversation> load_conversation_manifest(const std::filesystem::path& path,
                                                            const LabelSpace& labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());

  std::vector<Conversation> out;
  std::map<std::string, int> seen_conversations;  // id -> line
  std::map<std::string, int> seen_utterances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    const auto field = [&](const nlohmann::json& obj, const char* name) -> const nlohmann::json& {
      auto it = obj.find(name);
      if (it == obj.end())
        throw ParseError(line_no, std::string("missing field '") + name + "'");
      return *it;
    };
    try {
      Conversation conv;
      conv.conversation_id = field(j, "conversation_id").get<std::string>();
      conv.split = split_from_string(field(j, "split").get<std::string>());
      for (const auto& ju : field(j, "utterances")) {
        Utterance u;
        u.utterance_id = field(ju, "utterance_id").get<std::string>();
        u.speaker_id = field(ju, "speaker_id").get<int>();
        const std::string label_name = field(ju, "label").get<std::string>();
        const int label_id = labels.id_of(label_name);
        if (label_id < 0) throw ParseError(line_no, "unknown label name '" + label_name + "'");
        u.label = labels.label(label_id);
        if (ju.contains("text")) u.text = ju.at("text").get<std::string>();
        if (!seen_utterances.emplace(u.utterance_id, line_no).second)
          throw ParseError(line_no, "duplicate utterance_id '" + u.utterance_id + "'");
        conv.utterances.push_back(std::move(u));
      }
      if (!seen_conversations.emplace(conv.conversation_id, line_no).second)
        throw ParseError(line_no, "duplicate conversation_id '" + conv.conversation_id + "'");
      conv.validate();
      out.push_back(std::move(conv));
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad field: ") + e.what());
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

inline void write_conversation_manifest(const std::vector<Conversation>& convs,
                                        const std::filesystem::path& path) {
  std::string buf;
  for (const auto& conv : convs) {
    nlohmann::json j;
    j["conversation_id"] = conv.conversation_id;
    j["split"] = to_string(conv.split);
    nlohmann::json utts = nlohmann::json::array();
    for (const auto& u : conv.utterances) {
      nlohmann::json ju;
      ju["utterance_id"] = u.utterance_id;
      ju["speaker_id"] = u.speaker_id;
      ju["label"] = u.label.name;
      if (u.text) ju["text"] = *u.text;
      utts.push_back(std::move(ju));
    }
    j["utterances"] = std::move(utts);
    buf += j.dump();
    buf += '\n';
  }
  write_file_bytes(path, buf);
}

// ---------------------------------------------------------------------------
// Synthetic corpus.

struct SynthCorpusSpec {
  int train_conversations = 160;
  int dev_conversations = 20;
  int test_conversations = 20;
  int min_utterances = 5;
  int max_utterances = 10;
  int speakers = 4;
  LabelSpace label_space = LabelSpace::meld();
  std::map<Modality, double> separability{
      {Modality::text, 0.9}, {Modality::audio, 0.5}, {Modality::video, 0.2}};
  int dimension = 64;
  std::uint64_t seed = 7;

  void validate() const {
    if (train_conversations < 0 || dev_conversations < 0 || test_conversations < 0)
      throw ValidationError("conversation counts must be non-negative");
    if (train_conversations + dev_conversations + test_conversations == 0)
      throw ValidationError("corpus must contain at least one conversation");
    if (min_utterances < 1 || max_utterances < min_utterances)
      throw ValidationError("invalid utterances-per-conversation range");
    if (speakers < 1) throw ValidationError("need at least one speaker");
    if (dimension < label_space.size())
      throw ValidationError("dimension must be >= class count for centroid construction");
    for (Modality m : all_modalities()) {
      auto it = separability.find(m);
      if (it == separability.end())
        throw ValidationError(std::string("missing separability for modality ") + to_string(m));
      if (!(it->second >= 0.0 && it->second <= 1.0))
        throw ValidationError(std::string("separability out of [0,1] for modality ") +
                              to_string(m));
    }
  }
};

inline void to_json(nlohmann::json& j, const SynthCorpusSpec& s) {
  j = nlohmann::json{{"train_conversations", s.train_conversations},
                     {"dev_conversations", s.dev_conversations},
                     {"test_conversations", s.test_conversations},
                     {"min_utterances", s.min_utterances},
                     {"max_utterances", s.max_utterances},
                     {"speakers", s.speakers},
                     {"labels", s.label_space.names()},
                     {"dimension", s.dimension},
                     {"seed", s.seed}};
  for (Modality m : all_modalities())
    j["separability"][to_string(m)] = s.separability.at(m);
}

inline void from_json(const nlohmann::json& j, SynthCorpusSpec& s) {
  SynthCorpusSpec out;
  if (j.contains("train_conversations")) out.train_conversations = j.at("train_conversations");
  if (j.contains("dev_conversations")) out.dev_conversations = j.at("dev_conversations");
  if (j.contains("test_conversations")) out.test_conversations = j.at("test_conversations");
  if (j.contains("min_utterances")) out.min_utterances = j.at("min_utterances");
  if (j.contains("max_utterances")) out.max_utterances = j.at("max_utterances");
  if (j.contains("speakers")) out.speakers = j.at("speakers");
  if (j.contains("labels")) out.label_space = LabelSpace(j.at("labels").get<std::vector<std::string>>());
  if (j.contains("dimension")) out.dimension = j.at("dimension");
  if (j.contains("seed")) out.seed = j.at("seed");
  if (j.contains("separability"))
    for (Modality m : all_modalities())
      if (j.at("separability").contains(to_string(m)))
        out.separability[m] = j.at("separability").at(to_string(m));
  s = std::move(out);
}

inline std::string synth_spec_hash(const SynthCorpusSpec& spec) {
  nlohmann::json j;
  to_json(j, spec);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// Unit-norm, pairwise-orthogonal class centroids via seeded Gram-Schmidt.
// Requires dim >= classes; orthogonality makes every class pair equally hard.
inline Matrix make_class_centroids(Rng& rng, int classes, int dim) {
  if (dim < classes) throw InputError("make_class_centroids: dim must be >= classes");
  Matrix c(classes, dim);
  for (int i = 0; i < classes; ++i) {
    while (true) {
      for (int j = 0; j < dim; ++j) c(i, j) = rng.normal();
      for (int p = 0; p < i; ++p) {
        double dot = 0.0;
        for (int j = 0; j < dim; ++j) dot += c(i, j) * c(p, j);
        for (int j = 0; j < dim; ++j) c(i, j) -= dot * c(p, j);
      }
      double norm = 0.0;
      for (int j = 0; j < dim; ++j) norm += c(i, j) * c(i, j);
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (int j = 0; j < dim; ++j) c(i, j) /= norm;
        break;
      }
    }
  }
  return c;
}

struct SynthCorpus {
  std::vector<Conversation> conversations;
  std::map<Modality, FeatureStore> features;
};

// Pure function of the spec: identical spec (including seed) -> identical
// corpus, byte for byte. Structure, per-modality centroids and per-modality
// noise each draw from an independent derived stream.
inline SynthCorpus generate_synth_corpus(const SynthCorpusSpec& spec) {
  spec.validate();
  const int classes = spec.label_space.size();

  SynthCorpus corpus;
  Rng structure(derive_seed(spec.seed, "structure"));

  int conv_index = 0;
  const auto emit_split = [&](Split split, int count) {
    for (int n = 0; n < count; ++n, ++conv_index) {
      Conversation conv;
      char cid[16];
      std::snprintf(cid, sizeof(cid), "c%05d", conv_index);
      conv.conversation_id = cid;
      conv.split = split;
      const int len =
          static_cast<int>(structure.uniform_int(spec.min_utterances, spec.max_utterances));
      std::vector<int> speaker_order(static_cast<std::size_t>(spec.speakers));
      for (int i = 0; i < spec.speakers; ++i) speaker_order[static_cast<std::size_t>(i)] = i;
      structure.shuffle(speaker_order);
      for (int k = 0; k < len; ++k) {
        Utterance u;
        char uid[32];
        std::snprintf(uid, sizeof(uid), "%s_u%03d", cid, k);
        u.utterance_id = uid;
        u.speaker_id = speaker_order[static_cast<std::size_t>(k % spec.speakers)];
        const int label_id = static_cast<int>(structure.uniform_int(0, classes - 1));
        u.label = spec.label_space.label(label_id);
        const int n_tok = static_cast<int>(structure.uniform_int(3, 8));
        std::string text;
        for (int tk = 0; tk < n_tok; ++tk) {
          if (tk) text += ' ';
          if (structure.uniform() < 0.6)
            text += "e" + std::to_string(label_id) + "w" +
                    std::to_string(structure.uniform_int(0, 5));
          else
            text += "cw" + std::to_string(structure.uniform_int(0, 9));
        }
        u.text = std::move(text);
        conv.utterances.push_back(std::move(u));
      }
      corpus.conversations.push_back(std::move(conv));
    }
  };
  emit_split(Split::train, spec.train_conversations);
  emit_split(Split::dev, spec.dev_conversations);
  emit_split(Split::test, spec.test_conversations);

  const std::string spec_hash = synth_spec_hash(spec);
  for (Modality m : all_modalities()) {
    Rng centroid_rng(derive_seed(spec.seed, std::string("centroids/") + to_string(m)));
    const Matrix centroids = make_class_centroids(centroid_rng, classes, spec.dimension);
    Rng noise(derive_seed(spec.seed, std::string("noise/") + to_string(m)));
    const double sep = spec.separability.at(m);

    FeatureStore store;
    store.modality = m;
    store.dimension = spec.dimension;
    store.provenance = std::string("synth/") + to_string(m) + "/" + spec_hash;
    for (const auto& conv : corpus.conversations) {
      for (const auto& u : conv.utterances) {
        FeatureRecord rec;
        rec.utterance_id = u.utterance_id;
        rec.modality = m;
        rec.vector.resize(static_cast<std::size_t>(spec.dimension));
        for (int j = 0; j < spec.dimension; ++j)
          rec.vector[static_cast<std::size_t>(j)] =
              static_cast<float>(centroids(u.label.id, j) * sep + noise.normal());
        store.insert(std::move(rec));
      }
    }
    corpus.features.emplace(m, std::move(store));
  }
  return corpus;
}

}  // namespace magtkd
