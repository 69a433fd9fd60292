#pragma once

#include "pointpan/engine.hpp"
#include "pointpan/losses.hpp"
#include "pointpan/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pointpan::cli {

struct AffinityConfig {
  int kernel = 5;
  int dilation = 2;
  double threshold = 0.3;
  double theta = 2.0;
};

struct SyntheticConfig {
  Index size = 64;
  int n_targets = 3;
  /// When above n_targets, each scene draws its target count from [n_targets, max_targets].
  int max_targets = 0;
  int count = 1;
  int thing_classes = 3;
  double corruption = 0.0;
  bool touching = false;
  int feature_dims = 8;
};

struct AblationConfig {
  std::vector<double> lambda_b_grid;
  std::vector<double> lambda_m_grid;
  /// Empty: use the dataset's points. Otherwise points are re-sampled from gt.
  std::vector<SamplingStrategy> strategies;
};

struct PathConfig {
  std::string data_dir;
  std::string stem;
  std::string image;
  std::string semantic;
  std::string features;
  std::string points;
  std::string masks;
  std::string pred_dir;
  std::string gt_dir;
};

/// Every knob a command reads. Serialized verbatim into run manifests, so a
/// command can be replayed from its manifest alone.
struct RunConfig {
  double lambda_b = 0.1;
  double lambda_m = 0.1;
  double tau = 0.07;
  int expand_side = 17;
  AffinityConfig affinity;
  double amplify = 3.0;
  Normalization normalization = Normalization::global;
  ContrastiveDenominator contrastive_denominator = ContrastiveDenominator::targets;
  SamplingStrategy strategy = SamplingStrategy::uniform;
  int points_per_target = 1;
  CenterForm center_form = CenterForm::complement;
  std::uint64_t seed = 0;
  bool write_boundary = false;
  SyntheticConfig synthetic;
  AblationConfig ablation;
  PathConfig paths;

  void check() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Strict: unknown keys and out-of-range values raise ValidationError.
RunConfig config_from_json(const nlohmann::json& j);

/// Sets a dotted key ("affinity.kernel") to a value parsed as JSON, falling
/// back to a plain string.
void apply_override(nlohmann::json& j, const std::string& key, const std::string& value);

std::vector<double> parse_number_list(const std::string& s);

}  // namespace pointpan::cli
