#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace multilogue {

// Feature streams of an utterance, in canonical order.
enum class Modality { text = 0, audio = 1, video = 2 };

constexpr std::size_t kEmotionClasses = 6;

const char* modality_name(Modality m);
std::optional<Modality> modality_from_name(const std::string& name);
std::string modality_set_name(const std::vector<Modality>& mods);  // e.g. "T+A+V"

using FeatureMap = std::map<Modality, std::vector<double>>;

struct Utterance {
  std::size_t speaker_slot = 0;
  FeatureMap features;
  std::optional<double> sentiment;  // unit range unless the dataset says mosei3
  std::optional<int> emotion;       // class index in [0, 6)
};

struct Conversation {
  std::string id;
  std::size_t n_parties = 1;
  std::vector<Utterance> utterances;  // chronological
};

enum class Split { train, validation, test };
enum class LabelRange { unit, mosei3 };

const char* split_name(Split s);
const char* label_range_name(LabelRange r);

struct Dataset {
  Split split = Split::train;
  LabelRange label_range = LabelRange::unit;
  std::map<Modality, std::size_t> feature_dims;
  std::vector<Conversation> conversations;
  // True when the source records carried no speaker field and utterances were
  // assigned to a single monologue slot.
  bool speakerless = false;

  std::vector<Modality> modalities() const;
  std::size_t n_utterances() const;
  void validate() const;  // schema-level invariants; throws SchemaError
};

// Line-delimited records, one conversation per line:
//   {"id": str, "n_parties": int, "utterances": [{"speaker": int,
//    "text": [f...], "audio": [f...], "video": [f...],
//    "sentiment": f?, "emotion": i?}]}
// An optional first line {"header": true, "split": ..., "label_range": ...}
// carries dataset-level fields; files without it default to train/unit.
// Records without a "speaker" field load as single-slot monologues.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::map<Modality, std::size_t>>& expected_dims = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

Dataset mask_modalities(const Dataset& dataset, const std::vector<Modality>& subset);

// Linear map between stored unit-range sentiment and reporting units.
struct LabelScale {
  double factor = 1.0;
  double to_unit(double label) const { return label / factor; }
  double to_label(double unit) const { return unit * factor; }
};

struct NormalizeResult {
  Dataset dataset;
  LabelScale scale;
  std::optional<std::string> warning;  // set when the input was already unit range
};

// Divides mosei3 sentiment labels by 3 so the tanh head can express them;
// the returned scale maps predictions back to the -3..3 range.
NormalizeResult normalize_labels(const Dataset& dataset);

struct SynthSpec {
  std::size_t n_conversations = 100;
  std::size_t n_parties = 2;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::map<Modality, std::size_t> dims = {
      {Modality::text, 8}, {Modality::audio, 6}, {Modality::video, 6}};
  std::uint64_t seed = 1;
  double noise_sigma = 0.05;
};

// Ground-truth parameters behind a synthetic dataset. Scoring the dataset the
// oracle generated gives the noise floor any model can be compared against.
struct SynthOracle {
  std::vector<Modality> modality_order;
  std::map<Modality, std::size_t> dims;
  std::vector<double> sentiment_weight;            // over concatenated features
  std::vector<std::vector<double>> emotion_weight;  // 6 rows
  std::vector<double> emotion_bias;                 // 6
  double noise_sigma = 0.0;

  double predict_sentiment(const Utterance& u) const;
  int predict_emotion(const Utterance& u) const;
};

struct SynthResult {
  Dataset dataset;
  SynthOracle oracle;
};

SynthResult generate_synthetic(const SynthSpec& spec);

void save_oracle(const SynthOracle& oracle, const std::filesystem::path& path);
SynthOracle load_oracle(const std::filesystem::path& path);

}  // namespace multilogue
