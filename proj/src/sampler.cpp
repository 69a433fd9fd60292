#include "pointpan/sampler.hpp"

#include <algorithm>

namespace pointpan {

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::uniform: return "uniform";
    case SamplingStrategy::center: return "center";
    case SamplingStrategy::border: return "border";
  }
  return "uniform";
}

SamplingStrategy parse_strategy(const std::string& s) {
  if (s == "uniform") return SamplingStrategy::uniform;
  if (s == "center") return SamplingStrategy::center;
  if (s == "border") return SamplingStrategy::border;
  throw ValidationError("unknown sampling strategy '" + s + "'");
}

std::string to_string(CenterForm f) { return f == CenterForm::complement ? "complement" : "reciprocal"; }

CenterForm parse_center_form(const std::string& s) {
  if (s == "complement") return CenterForm::complement;
  if (s == "reciprocal") return CenterForm::reciprocal;
  throw ValidationError("unknown center form '" + s + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 segment_stream(std::uint64_t seed, int segment_id) {
  const auto id = static_cast<std::uint64_t>(static_cast<std::uint32_t>(segment_id));
  return std::mt19937_64(splitmix64(seed ^ splitmix64(id)));
}

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

std::vector<double> sampling_weights(const std::vector<Index>& pixels, GridShape shape, SamplingStrategy strategy,
                                     CenterForm center_form) {
  std::vector<double> w(pixels.size(), 1.0);
  if (strategy == SamplingStrategy::uniform || pixels.empty()) return w;

  double cy = 0.0, cx = 0.0;
  for (Index p : pixels) {
    cy += static_cast<double>(shape.row(p));
    cx += static_cast<double>(shape.col(p));
  }
  cy /= static_cast<double>(pixels.size());
  cx /= static_cast<double>(pixels.size());

  std::vector<double> d2(pixels.size());
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    const double dy = static_cast<double>(shape.row(pixels[k])) - cy;
    const double dx = static_cast<double>(shape.col(pixels[k])) - cx;
    d2[k] = dy * dy + dx * dx;
  }
  if (strategy == SamplingStrategy::border) return d2;
  if (center_form == CenterForm::reciprocal) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = 1.0 / (d2[k] + 1.0);
    return w;
  }
  const double peak = *std::max_element(d2.begin(), d2.end());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = peak - d2[k];
  return w;
}

SampledPoints sample_points(const PanopticMap& gt, const SamplerSpec& spec) {
  require(spec.points_per_target >= 1, "points_per_target must be >= 1");
  require_valid(gt, "ground truth");
  require(!gt.segments.empty(), "ground truth has no segments");

  std::map<int, std::vector<Index>> members;
  for (Index i = 0; i < gt.ids.size(); ++i)
    if (gt.ids(i) != PanopticMap::kVoid) members[gt.ids(i)].push_back(i);

  SampledPoints out;
  for (const auto& [id, info] : gt.segments) {
    auto it = members.find(id);
    require(it != members.end(), "segment " + std::to_string(id) + " has no pixels");
    const std::vector<Index>& pixels = it->second;

    std::size_t k = static_cast<std::size_t>(spec.points_per_target);
    if (k > pixels.size()) {
      out.warnings.push_back("segment " + std::to_string(id) + " has " + std::to_string(pixels.size()) +
                             " pixels, fewer than the " + std::to_string(k) + " requested; taking all of them");
      k = pixels.size();
    }

    std::vector<double> w = sampling_weights(pixels, gt.shape, spec.strategy, spec.center_form);
    std::vector<bool> taken(pixels.size(), false);
    std::mt19937_64 gen = segment_stream(spec.seed, id);
    for (std::size_t draw = 0; draw < k; ++draw) {
      double total = 0.0;
      for (std::size_t q = 0; q < pixels.size(); ++q)
        if (!taken[q]) total += w[q];
      const bool flat = !(total > 0.0);  // every remaining weight is zero
      if (flat) total = static_cast<double>(pixels.size() - draw);
      const double u = uniform01(gen) * total;

      std::size_t pick = pixels.size();
      double acc = 0.0;
      for (std::size_t q = 0; q < pixels.size(); ++q) {
        if (taken[q]) continue;
        const double wq = flat ? 1.0 : w[q];
        if (wq <= 0.0) continue;
        acc += wq;
        pick = q;
        if (u < acc) break;
      }
      taken[pick] = true;
      const Index p = pixels[pick];
      out.points.push_back({gt.shape.col(p), gt.shape.row(p), info.class_id, id, info.kind});
    }
  }
  return out;
}

}  // namespace pointpan
