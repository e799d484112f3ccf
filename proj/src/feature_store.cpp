// Copyright 2026 The M3EL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "m3el/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "m3el/errors.hpp"

namespace m3el {
namespace {

// Byte writer/reader for the little-endian bank layout.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  bool has(std::size_t n) const { return pos_ + n <= in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }

 private:
  void need(std::size_t n, const char* what) {
    if (!has(n)) throw TruncatedError(std::string("bank truncated while reading ") + what);
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void normalize_row(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

std::string id_list(const std::vector<std::uint64_t>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) os << (i ? "," : "") << ids[i];
  if (ids.size() > 20) os << ",... (" << ids.size() << " total)";
  return os.str();
}

}  // namespace

std::string_view side_name(Side s) { return s == Side::kEntity ? "entity" : "mention"; }
std::string_view modality_name(Modality m) { return m == Modality::kText ? "text" : "vision"; }

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train|valid|test)");
}

FeatureBank::FeatureBank(Side side, Modality modality, std::size_t dim)
    : side_(side), modality_(modality), dim_(dim) {}

void FeatureBank::add(EmbeddingRecord record) {
  const std::string who = "record " + std::to_string(record.id);
  if (record.global.rows() != 1 || record.global.cols() != dim_) {
    throw DataError(who + ": global width " + std::to_string(record.global.cols()) +
                    " != bank dim " + std::to_string(dim_));
  }
  if (record.local.rows() == 0) throw DataError(who + ": no local rows");
  if (record.local.cols() != dim_) throw DataError(who + ": local width != bank dim");
  if (!record.global.all_finite() || !record.local.all_finite()) {
    throw NonFiniteValueError(who + ": non-finite value");
  }
  if (index_.contains(record.id)) throw DataError(who + ": duplicate id");
  index_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

const EmbeddingRecord* FeatureBank::find(std::uint64_t id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const EmbeddingRecord& FeatureBank::at(std::uint64_t id) const {
  if (const auto* r = find(id)) return *r;
  throw DataError("id " + std::to_string(id) + " missing from " + std::string(side_name(side_)) +
                  " " + std::string(modality_name(modality_)) + " bank");
}

std::vector<std::uint8_t> encode_bank(const FeatureBank& bank) {
  ByteWriter w;
  w.raw(kBankMagic, 4);
  w.u32(kBankVersion);
  w.u8(static_cast<std::uint8_t>(bank.modality()));
  w.u8(static_cast<std::uint8_t>(bank.side()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  w.u32(static_cast<std::uint32_t>(bank.size()));
  for (const auto& r : bank.records()) {
    w.u64(r.id);
    w.u32(static_cast<std::uint32_t>(r.local.rows()));
    for (double v : r.global.data()) w.f32(v);
    for (double v : r.local.data()) w.f32(v);
  }
  return w.take();
}

FeatureBank decode_bank(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kBankMagic, 4) != 0) {
    throw BadMagicError("bad bank magic (expected \"M3EB\")");
  }
  ByteReader r(bytes.subspan(4));
  const std::uint32_t version = r.u32("version");
  if (version != kBankVersion) {
    throw VersionMismatchError("bank version " + std::to_string(version) + " unsupported (expected " +
                               std::to_string(kBankVersion) + ")");
  }
  const std::uint8_t modality = r.u8("modality");
  const std::uint8_t side = r.u8("side");
  if (modality > 1 || side > 1) throw DataError("bank header has invalid side/modality code");
  const std::uint32_t dim = r.u32("dim");
  const std::uint32_t count = r.u32("record count");
  if (dim == 0) throw DataError("bank header declares dim 0");

  FeatureBank bank(static_cast<Side>(side), static_cast<Modality>(modality), dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.id = r.u64("record id");
    const std::uint32_t rows = r.u32("local row count");
    const std::uint64_t need = 4ull * dim * (1ull + rows);
    if (r.remaining() < need) {
      throw TruncatedError("record " + std::to_string(rec.id) + " declares " + std::to_string(rows) +
                           " local rows but the file ends early");
    }
    rec.global = Tensor(1, dim);
    for (auto& v : rec.global.data()) v = r.f32("global");
    rec.local = Tensor(rows, dim);
    for (auto& v : rec.local.data()) v = r.f32("local");
    bank.add(std::move(rec));
  }
  if (r.remaining() != 0) throw DataError("trailing bytes after last bank record");
  return bank;
}

void write_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_bank(bank));
}

FeatureBank load_bank(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("bank file '" + path.string() + "' not found");
  const auto bytes = read_file(path);
  try {
    return decode_bank(bytes);
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const VersionMismatchError& e) {
    throw VersionMismatchError(path.string() + ": " + e.what());
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const NonFiniteValueError& e) {
    throw NonFiniteValueError(path.string() + ": " + e.what());
  }
}

std::string encode_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& e : manifest) {
    nlohmann::ordered_json j;
    j["mention_id"] = e.mention_id;
    j["gold_entity_id"] = e.gold_entity_id;
    j["candidates"] = e.candidates;
    j["split"] = split_name(e.split);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      MentionManifestEntry e;
      e.mention_id = j.at("mention_id").get<std::uint64_t>();
      e.gold_entity_id = j.at("gold_entity_id").get<std::uint64_t>();
      e.candidates = j.at("candidates").get<std::vector<std::uint64_t>>();
      e.split = parse_split(j.at("split").get<std::string>());
      if (e.candidates.empty()) throw DataError(where + ": empty candidate list");
      if (std::find(e.candidates.begin(), e.candidates.end(), e.gold_entity_id) == e.candidates.end()) {
        throw DataError(where + ": gold entity " + std::to_string(e.gold_entity_id) +
                        " not among candidates");
      }
      m.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    } catch (const ConfigError& ex) {
      throw DataError(where + ": " + ex.what());
    }
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  const std::string text = encode_manifest(manifest);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Manifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("manifest '" + path.string() + "' not found");
  const auto bytes = read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Manifest filter_split(const Manifest& manifest, Split split) {
  Manifest out;
  std::copy_if(manifest.begin(), manifest.end(), std::back_inserter(out),
               [&](const auto& e) { return e.split == split; });
  return out;
}

void validate_dataset(const Dataset& d) {
  auto role = [](const FeatureBank& b, Side s, Modality m, const char* name) {
    if (b.side() != s || b.modality() != m) {
      throw DataError(std::string(name) + " bank header has side/modality " +
                      std::string(side_name(b.side())) + "/" + std::string(modality_name(b.modality())));
    }
  };
  role(d.entity_text, Side::kEntity, Modality::kText, "entity_text");
  role(d.entity_vision, Side::kEntity, Modality::kVision, "entity_vision");
  role(d.mention_text, Side::kMention, Modality::kText, "mention_text");
  role(d.mention_vision, Side::kMention, Modality::kVision, "mention_vision");
  if (d.entity_text.dim() != d.mention_text.dim()) throw DataError("entity/mention text dims differ");
  if (d.entity_vision.dim() != d.mention_vision.dim()) {
    throw DataError("entity/mention vision dims differ");
  }

  std::vector<std::uint64_t> missing_mentions;
  std::set<std::uint64_t> missing_entities;
  for (const auto& e : d.manifest) {
    if (!d.mention_text.find(e.mention_id) || !d.mention_vision.find(e.mention_id)) {
      missing_mentions.push_back(e.mention_id);
    }
    for (std::uint64_t c : e.candidates) {
      if (!d.entity_text.find(c) || !d.entity_vision.find(c)) missing_entities.insert(c);
    }
    if (!d.entity_text.find(e.gold_entity_id) || !d.entity_vision.find(e.gold_entity_id)) {
      missing_entities.insert(e.gold_entity_id);
    }
  }
  if (!missing_mentions.empty()) {
    throw DataError("mention ids missing from banks: " + id_list(missing_mentions));
  }
  if (!missing_entities.empty()) {
    throw DataError("entity ids missing from banks: " +
                    id_list({missing_entities.begin(), missing_entities.end()}));
  }
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_bank(d.entity_text, dir / "entity_text.m3eb");
  write_bank(d.entity_vision, dir / "entity_vision.m3eb");
  write_bank(d.mention_text, dir / "mention_text.m3eb");
  write_bank(d.mention_vision, dir / "mention_vision.m3eb");
  write_manifest(d.manifest, dir / "manifest.jsonl");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.entity_text = load_bank(dir / "entity_text.m3eb");
  d.entity_vision = load_bank(dir / "entity_vision.m3eb");
  d.mention_text = load_bank(dir / "mention_text.m3eb");
  d.mention_vision = load_bank(dir / "mention_vision.m3eb");
  d.manifest = read_manifest(dir / "manifest.jsonl");
  validate_dataset(d);
  return d;
}

PaddedRecord pad_record(const EmbeddingRecord& record, std::size_t max_rows) {
  PaddedRecord p;
  p.id = record.id;
  p.global = record.global;
  const std::size_t have = record.local.rows();
  const std::size_t rows = max_rows == 0 ? have : max_rows;
  const std::size_t keep = std::min(have, rows);
  const std::size_t dim = record.local.cols();
  p.local = Tensor(rows, dim);
  std::copy_n(record.local.data().begin(), keep * dim, p.local.data().begin());
  p.mask.assign(rows, 0);
  std::fill_n(p.mask.begin(), keep, 1);
  return p;
}

ObjectFeatures entity_features(const Dataset& data, std::uint64_t id, const PadConfig& pad) {
  return {pad_record(data.entity_text.at(id), pad.max_text_rows),
          pad_record(data.entity_vision.at(id), pad.max_patch_rows)};
}

ObjectFeatures mention_features(const Dataset& data, std::uint64_t id, const PadConfig& pad) {
  return {pad_record(data.mention_text.at(id), pad.max_text_rows),
          pad_record(data.mention_vision.at(id), pad.max_patch_rows)};
}

Batch make_batch(std::span<const MentionManifestEntry> entries, const Dataset& data,
                 const PadConfig& pad) {
  Batch b;
  for (const auto& e : entries) {
    b.mention_ids.push_back(e.mention_id);
    b.entity_ids.push_back(e.gold_entity_id);
    b.mentions.push_back(mention_features(data, e.mention_id, pad));
    b.entities.push_back(entity_features(data, e.gold_entity_id, pad));
  }
  return b;
}

Batch assemble_batch(std::span<const MentionManifestEntry> entries, const Dataset& data,
                     std::size_t u, std::mt19937_64& rng, const PadConfig& pad) {
  if (u == 0) throw ConfigError("batch size must be at least 1");
  if (u > entries.size()) {
    throw ConfigError("batch size " + std::to_string(u) + " exceeds the " +
                      std::to_string(entries.size()) + " available entries");
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<MentionManifestEntry> picked;
  std::vector<std::size_t> leftovers;
  std::unordered_set<std::uint64_t> golds;
  for (std::size_t i : order) {
    if (picked.size() == u) break;
    if (golds.insert(entries[i].gold_entity_id).second) {
      picked.push_back(entries[i]);
    } else {
      leftovers.push_back(i);
    }
  }
  for (std::size_t k = 0; picked.size() < u; ++k) picked.push_back(entries[leftovers[k]]);
  return make_batch(picked, data, pad);
}

Manifest low_resource_subset(const Manifest& train_entries, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("low-resource fraction must lie in (0, 1]");
  }
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(train_entries.size()) + 1e-9));
  if (n == 0) throw ConfigError("low-resource subset would be empty");
  if (n == train_entries.size()) return train_entries;
  std::vector<std::size_t> idx(train_entries.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Manifest out;
  for (std::size_t i : idx) out.push_back(train_entries[i]);
  return out;
}

Manifest apply_low_resource(const Manifest& manifest, double fraction, std::uint64_t seed) {
  if (fraction == 1.0) return manifest;
  Manifest out = low_resource_subset(filter_split(manifest, Split::kTrain), fraction, seed);
  for (const auto& e : manifest)
    if (e.split != Split::kTrain) out.push_back(e);
  return out;
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.text_dim < 2 || spec.vision_dim < 2) throw ConfigError("synthetic dims must be >= 2");
  if (spec.tokens < 1 || spec.patches < 1) throw ConfigError("synthetic tokens/patches must be >= 1");
  if (spec.num_mentions < 1 || spec.num_entities < 1) throw ConfigError("synthetic sizes must be >= 1");
  if (spec.num_entities < spec.distractors + 1) {
    throw ConfigError("need at least distractors + 1 entities");
  }
  if (!(spec.sigma >= 0.0) || !(spec.local_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (spec.valid_fraction < 0.0 || spec.test_fraction < 0.0 ||
      spec.valid_fraction + spec.test_fraction > 1.0) {
    throw ConfigError("valid/test fractions must be non-negative and sum to at most 1");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto unit_vector = [&](std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    normalize_row(v);
    for (auto& x : v) x = round_f32(x);
    return v;
  };
  auto noisy_copy = [&](const std::vector<double>& base, double sigma) {
    if (sigma == 0.0) return base;
    std::vector<double> v = base;
    for (auto& x : v) x += sigma * normal(rng);
    normalize_row(v);
    for (auto& x : v) x = round_f32(x);
    return v;
  };
  // Row 0 is the global itself; rows 1.. add independent noise.
  auto locals_from = [&](const std::vector<double>& global, std::size_t rows) {
    const std::size_t dim = global.size();
    Tensor t(rows, dim);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < dim; ++c)
        t(r, c) = r == 0 ? global[c] : round_f32(global[c] + spec.local_sigma * normal(rng));
    return t;
  };

  Dataset d;
  d.entity_text = FeatureBank(Side::kEntity, Modality::kText, spec.text_dim);
  d.entity_vision = FeatureBank(Side::kEntity, Modality::kVision, spec.vision_dim);
  d.mention_text = FeatureBank(Side::kMention, Modality::kText, spec.text_dim);
  d.mention_vision = FeatureBank(Side::kMention, Modality::kVision, spec.vision_dim);

  constexpr std::uint64_t kEntityBase = 1;
  constexpr std::uint64_t kMentionBase = 1'000'001;

  std::vector<std::vector<double>> ent_text(spec.num_entities), ent_vis(spec.num_entities);
  for (std::size_t i = 0; i < spec.num_entities; ++i) {
    ent_text[i] = unit_vector(spec.text_dim);
    ent_vis[i] = unit_vector(spec.vision_dim);
    const std::uint64_t id = kEntityBase + i;
    d.entity_text.add({id, Tensor::row(ent_text[i]), locals_from(ent_text[i], spec.tokens)});
    d.entity_vision.add({id, Tensor::row(ent_vis[i]), locals_from(ent_vis[i], spec.patches)});
  }

  const auto n_valid = static_cast<std::size_t>(std::floor(spec.valid_fraction * spec.num_mentions));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * spec.num_mentions));
  std::vector<Split> splits(spec.num_mentions, Split::kTrain);
  for (std::size_t i = 0; i < n_valid; ++i) splits[i] = Split::kValid;
  for (std::size_t i = 0; i < n_test; ++i) splits[n_valid + i] = Split::kTest;
  std::shuffle(splits.begin(), splits.end(), rng);

  for (std::size_t i = 0; i < spec.num_mentions; ++i) {
    const std::size_t gold = i % spec.num_entities;
    const std::uint64_t mid = kMentionBase + i;
    const auto mt = noisy_copy(ent_text[gold], spec.sigma);
    const auto mv = noisy_copy(ent_vis[gold], spec.sigma);
    d.mention_text.add({mid, Tensor::row(mt), locals_from(mt, spec.tokens)});
    d.mention_vision.add({mid, Tensor::row(mv), locals_from(mv, spec.patches)});

    MentionManifestEntry e;
    e.mention_id = mid;
    e.gold_entity_id = kEntityBase + gold;
    e.split = splits[i];
    e.candidates.push_back(e.gold_entity_id);
    std::unordered_set<std::size_t> used{gold};
    std::uniform_int_distribution<std::size_t> pick(0, spec.num_entities - 1);
    while (e.candidates.size() < spec.distractors + 1) {
      const std::size_t c = pick(rng);
      if (used.insert(c).second) e.candidates.push_back(kEntityBase + c);
    }
    std::shuffle(e.candidates.begin(), e.candidates.end(), rng);
    d.manifest.push_back(std::move(e));
  }
  return d;
}

}  // namespace m3el
