#pragma once

#include "pointpan/fields.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pointpan {

enum class SamplingStrategy { uniform, center, border };

/// How the center-biased density inverts the squared centroid distance.
enum class CenterForm {
  complement,  ///< max_j d_j^2 - d_i^2
  reciprocal,  ///< 1 / (d_i^2 + 1)
};

std::string to_string(SamplingStrategy s);
SamplingStrategy parse_strategy(const std::string& s);
std::string to_string(CenterForm f);
CenterForm parse_center_form(const std::string& s);

struct SamplerSpec {
  SamplingStrategy strategy = SamplingStrategy::uniform;
  int points_per_target = 1;
  std::uint64_t seed = 0;
  CenterForm center_form = CenterForm::complement;
};

/// Random stream discipline: every segment draws from its own std::mt19937_64,
/// seeded with splitmix64(seed ^ splitmix64(segment id)). Uniform reals take the
/// top 53 bits of one output. Both pieces are fixed by the C++ standard or by
/// this code, so streams match across platforms.
std::uint64_t splitmix64(std::uint64_t x);
std::mt19937_64 segment_stream(std::uint64_t seed, int segment_id);
double uniform01(std::mt19937_64& gen);

/// Unnormalized per-pixel sampling weights for one segment's pixels.
std::vector<double> sampling_weights(const std::vector<Index>& pixels, GridShape shape, SamplingStrategy strategy,
                                     CenterForm center_form);

struct SampledPoints {
  std::vector<PointLabel> points;
  std::vector<std::string> warnings;
};

/// Draws points_per_target pixels per segment without replacement. Points carry
/// the segment id as target_id and the segment's class and kind.
SampledPoints sample_points(const PanopticMap& gt, const SamplerSpec& spec);

}  // namespace pointpan
