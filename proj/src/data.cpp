#include "multilogue/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "multilogue/errors.hpp"
#include "multilogue/rng.hpp"

namespace multilogue {

using nlohmann::json;

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::audio: return "audio";
    case Modality::video: return "video";
  }
  return "?";
}

std::optional<Modality> modality_from_name(const std::string& name) {
  if (name == "text" || name == "t") return Modality::text;
  if (name == "audio" || name == "a") return Modality::audio;
  if (name == "video" || name == "v") return Modality::video;
  return std::nullopt;
}

std::string modality_set_name(const std::vector<Modality>& mods) {
  std::string out;
  for (Modality m : mods) {
    if (!out.empty()) out += "+";
    out += std::toupper(modality_name(m)[0]);
  }
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

const char* label_range_name(LabelRange r) {
  return r == LabelRange::unit ? "unit" : "mosei3";
}

std::vector<Modality> Dataset::modalities() const {
  std::vector<Modality> out;
  for (const auto& [m, dim] : feature_dims) out.push_back(m);
  return out;
}

std::size_t Dataset::n_utterances() const {
  std::size_t n = 0;
  for (const auto& conv : conversations) n += conv.utterances.size();
  return n;
}

void Dataset::validate() const {
  if (conversations.empty()) throw SchemaError("dataset has no conversations");
  if (feature_dims.empty()) throw SchemaError("dataset declares no modalities");
  std::set<std::string> seen_ids;
  for (const auto& conv : conversations) {
    if (!seen_ids.insert(conv.id).second) {
      throw SchemaError("duplicate conversation id '" + conv.id + "'");
    }
    if (conv.utterances.empty()) throw SchemaError("conversation '" + conv.id + "' has no utterances");
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
      const Utterance& u = conv.utterances[i];
      if (u.speaker_slot >= conv.n_parties) {
        throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) +
                          ": speaker slot " + std::to_string(u.speaker_slot) + " >= n_parties " +
                          std::to_string(conv.n_parties));
      }
      if (!u.sentiment && !u.emotion) {
        throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) +
                          ": no label present");
      }
      if (u.emotion && (*u.emotion < 0 || *u.emotion >= static_cast<int>(kEmotionClasses))) {
        throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) +
                          ": emotion label out of [0, 6)");
      }
      for (const auto& [m, dim] : feature_dims) {
        auto it = u.features.find(m);
        if (it == u.features.end()) {
          throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) +
                            ": missing " + modality_name(m) + " features");
        }
        if (it->second.size() != dim) {
          throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) + ": " +
                            modality_name(m) + " dim " + std::to_string(it->second.size()) +
                            " != declared " + std::to_string(dim));
        }
      }
      for (const auto& [m, feats] : u.features) {
        if (!feature_dims.count(m)) {
          throw SchemaError("conversation '" + conv.id + "' utterance " + std::to_string(i) +
                            ": undeclared modality " + modality_name(m));
        }
      }
    }
  }
}

namespace {

bool is_header_line(const json& j) { return j.is_object() && j.value("header", false); }

Utterance parse_utterance(const json& j, const std::string& conv_id, std::size_t index,
                          bool& saw_speaker) {
  static const std::set<std::string> known_keys = {"speaker", "text", "audio",
                                                   "video",   "sentiment", "emotion"};
  Utterance u;
  for (const auto& [key, value] : j.items()) {
    if (!known_keys.count(key)) {
      throw SchemaError("conversation '" + conv_id + "' utterance " + std::to_string(index) +
                        ": unknown key '" + key + "'");
    }
  }
  if (j.contains("speaker")) {
    saw_speaker = true;
    u.speaker_slot = j.at("speaker").get<std::size_t>();
  }
  for (Modality m : {Modality::text, Modality::audio, Modality::video}) {
    if (j.contains(modality_name(m))) {
      u.features[m] = j.at(modality_name(m)).get<std::vector<double>>();
    }
  }
  if (j.contains("sentiment") && !j.at("sentiment").is_null()) {
    u.sentiment = j.at("sentiment").get<double>();
  }
  if (j.contains("emotion") && !j.at("emotion").is_null()) {
    u.emotion = j.at("emotion").get<int>();
  }
  return u;
}

json utterance_to_json(const Utterance& u, bool speakerless) {
  json j = json::object();
  if (!speakerless) j["speaker"] = u.speaker_slot;
  for (const auto& [m, feats] : u.features) j[modality_name(m)] = feats;
  if (u.sentiment) j["sentiment"] = *u.sentiment;
  if (u.emotion) j["emotion"] = *u.emotion;
  return j;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::map<Modality, std::size_t>>& expected_dims) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file: " + path.string());

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool saw_speaker = false;
  bool dims_fixed = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1 && is_header_line(j)) {
      const std::string split = j.value("split", "train");
      if (split == "train") ds.split = Split::train;
      else if (split == "validation") ds.split = Split::validation;
      else if (split == "test") ds.split = Split::test;
      else throw SchemaError("line 1: unknown split '" + split + "'");
      const std::string range = j.value("label_range", "unit");
      if (range == "unit") ds.label_range = LabelRange::unit;
      else if (range == "mosei3") ds.label_range = LabelRange::mosei3;
      else throw SchemaError("line 1: unknown label_range '" + range + "'");
      continue;
    }
    if (!j.is_object() || !j.contains("utterances")) {
      throw SchemaError("line " + std::to_string(line_no) + ": not a conversation record");
    }
    for (const auto& [key, value] : j.items()) {
      if (key != "id" && key != "n_parties" && key != "utterances") {
        throw SchemaError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    }
    Conversation conv;
    conv.id = j.value("id", "line" + std::to_string(line_no));
    try {
      std::size_t index = 0;
      for (const json& ju : j.at("utterances")) {
        conv.utterances.push_back(parse_utterance(ju, conv.id, index, saw_speaker));
        ++index;
      }
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("n_parties")) {
      conv.n_parties = j.at("n_parties").get<std::size_t>();
    } else {
      std::size_t max_slot = 0;
      for (const Utterance& u : conv.utterances) max_slot = std::max(max_slot, u.speaker_slot);
      conv.n_parties = max_slot + 1;
    }
    if (!dims_fixed && !conv.utterances.empty()) {
      for (const auto& [m, feats] : conv.utterances.front().features) {
        ds.feature_dims[m] = feats.size();
      }
      dims_fixed = true;
    }
    ds.conversations.push_back(std::move(conv));
  }

  ds.speakerless = !saw_speaker;
  if (expected_dims) {
    for (const auto& [m, dim] : *expected_dims) {
      auto it = ds.feature_dims.find(m);
      if (it == ds.feature_dims.end() || it->second != dim) {
        throw SchemaError(std::string("dataset ") + path.string() + ": expected " +
                          modality_name(m) + " dim " + std::to_string(dim) + ", found " +
                          (it == ds.feature_dims.end() ? "none" : std::to_string(it->second)));
      }
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset file: " + path.string());
  json header = {{"header", true},
                 {"split", split_name(dataset.split)},
                 {"label_range", label_range_name(dataset.label_range)}};
  out << header.dump() << '\n';
  for (const Conversation& conv : dataset.conversations) {
    json j = {{"id", conv.id}, {"n_parties", conv.n_parties}};
    json us = json::array();
    for (const Utterance& u : conv.utterances) us.push_back(utterance_to_json(u, dataset.speakerless));
    j["utterances"] = std::move(us);
    out << j.dump() << '\n';
  }
}

Dataset mask_modalities(const Dataset& dataset, const std::vector<Modality>& subset) {
  if (subset.empty()) throw InputError("mask_modalities: empty modality subset");
  std::set<Modality> keep(subset.begin(), subset.end());
  for (Modality m : keep) {
    if (!dataset.feature_dims.count(m)) {
      throw InputError(std::string("mask_modalities: dataset has no ") + modality_name(m) +
                       " features");
    }
  }
  Dataset out = dataset;
  out.feature_dims.clear();
  for (Modality m : keep) out.feature_dims[m] = dataset.feature_dims.at(m);
  for (Conversation& conv : out.conversations) {
    for (Utterance& u : conv.utterances) {
      for (auto it = u.features.begin(); it != u.features.end();) {
        it = keep.count(it->first) ? std::next(it) : u.features.erase(it);
      }
    }
  }
  return out;
}

NormalizeResult normalize_labels(const Dataset& dataset) {
  NormalizeResult result;
  if (dataset.label_range == LabelRange::unit) {
    result.dataset = dataset;
    result.scale = LabelScale{1.0};
    result.warning = "normalize_labels: dataset is already unit range; no-op";
    return result;
  }
  result.dataset = dataset;
  result.dataset.label_range = LabelRange::unit;
  result.scale = LabelScale{3.0};
  for (Conversation& conv : result.dataset.conversations) {
    for (Utterance& u : conv.utterances) {
      if (u.sentiment) u.sentiment = *u.sentiment / 3.0;
    }
  }
  return result;
}

double SynthOracle::predict_sentiment(const Utterance& u) const {
  double acc = 0.0;
  std::size_t k = 0;
  for (Modality m : modality_order) {
    for (double v : u.features.at(m)) acc += sentiment_weight.at(k++) * v;
  }
  return std::tanh(acc);
}

int SynthOracle::predict_emotion(const Utterance& u) const {
  int best = 0;
  double best_score = -1e300;
  for (std::size_t c = 0; c < kEmotionClasses; ++c) {
    double score = emotion_bias.at(c);
    std::size_t k = 0;
    for (Modality m : modality_order) {
      for (double v : u.features.at(m)) score += emotion_weight.at(c).at(k++) * v;
    }
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c);
    }
  }
  return best;
}

SynthResult generate_synthetic(const SynthSpec& spec) {
  if (spec.dims.empty()) throw InputError("generate_synthetic: no modalities");
  for (const auto& [m, dim] : spec.dims) {
    if (dim == 0) throw InputError("generate_synthetic: zero feature dim");
  }
  if (spec.min_length == 0 || spec.min_length > spec.max_length) {
    throw InputError("generate_synthetic: bad length range");
  }

  Rng rng(spec.seed);
  SynthResult result;
  SynthOracle& oracle = result.oracle;
  oracle.dims = spec.dims;
  oracle.noise_sigma = spec.noise_sigma;
  for (const auto& [m, dim] : spec.dims) oracle.modality_order.push_back(m);

  std::size_t total_dim = 0;
  for (const auto& [m, dim] : spec.dims) total_dim += dim;

  // Unit-norm direction scaled so the pre-tanh score has spread ~1.7; labels
  // then cover most of (-1, 1) instead of piling up near zero.
  const double gain = 1.7;
  oracle.sentiment_weight.resize(total_dim);
  double norm = 0.0;
  for (double& w : oracle.sentiment_weight) {
    w = rng.normal();
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (double& w : oracle.sentiment_weight) w *= gain / norm;

  oracle.emotion_weight.assign(kEmotionClasses, std::vector<double>(total_dim));
  oracle.emotion_bias.assign(kEmotionClasses, 0.0);
  const double emotion_scale = 1.0 / std::sqrt(static_cast<double>(total_dim));
  for (auto& row : oracle.emotion_weight) {
    for (double& w : row) w = rng.normal() * emotion_scale;
  }

  Dataset& ds = result.dataset;
  ds.label_range = LabelRange::unit;
  ds.feature_dims = spec.dims;

  const double drift_sigma = 0.5;
  for (std::size_t ci = 0; ci < spec.n_conversations; ++ci) {
    Conversation conv;
    conv.id = "synth-" + std::to_string(ci);
    conv.n_parties = spec.n_parties;
    FeatureMap drift;
    for (const auto& [m, dim] : spec.dims) {
      auto& d = drift[m];
      d.resize(dim);
      for (double& v : d) v = rng.normal() * drift_sigma;
    }
    const std::size_t length = spec.min_length + rng.integer(spec.max_length - spec.min_length + 1);
    for (std::size_t t = 0; t < length; ++t) {
      Utterance u;
      u.speaker_slot = rng.integer(spec.n_parties);
      for (const auto& [m, dim] : spec.dims) {
        auto& f = u.features[m];
        f.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) f[k] = drift.at(m)[k] + rng.normal();
      }
      const double clean = oracle.predict_sentiment(u);
      const double noisy = clean + rng.normal() * spec.noise_sigma;
      u.sentiment = std::clamp(noisy, -1.0, 1.0);
      u.emotion = oracle.predict_emotion(u);
      conv.utterances.push_back(std::move(u));
    }
    ds.conversations.push_back(std::move(conv));
  }
  ds.validate();
  return result;
}

void save_oracle(const SynthOracle& oracle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write oracle file: " + path.string());
  json j;
  json order = json::array();
  for (Modality m : oracle.modality_order) order.push_back(modality_name(m));
  j["modality_order"] = std::move(order);
  json dims = json::object();
  for (const auto& [m, dim] : oracle.dims) dims[modality_name(m)] = dim;
  j["dims"] = std::move(dims);
  j["sentiment_weight"] = oracle.sentiment_weight;
  j["emotion_weight"] = oracle.emotion_weight;
  j["emotion_bias"] = oracle.emotion_bias;
  j["noise_sigma"] = oracle.noise_sigma;
  out << j.dump(2) << '\n';
}

SynthOracle load_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open oracle file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("oracle file: ") + e.what());
  }
  SynthOracle oracle;
  for (const std::string& name : j.at("modality_order")) {
    auto m = modality_from_name(name);
    if (!m) throw SchemaError("oracle file: unknown modality '" + name + "'");
    oracle.modality_order.push_back(*m);
  }
  for (const auto& [name, dim] : j.at("dims").items()) {
    auto m = modality_from_name(name);
    if (!m) throw SchemaError("oracle file: unknown modality '" + name + "'");
    oracle.dims[*m] = dim.get<std::size_t>();
  }
  oracle.sentiment_weight = j.at("sentiment_weight").get<std::vector<double>>();
  oracle.emotion_weight = j.at("emotion_weight").get<std::vector<std::vector<double>>>();
  oracle.emotion_bias = j.at("emotion_bias").get<std::vector<double>>();
  oracle.noise_sigma = j.at("noise_sigma").get<double>();
  return oracle;
}

}  // namespace multilogue
