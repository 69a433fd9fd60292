#include "pointpan/fields.hpp"

#include <limits>
#include <set>

namespace pointpan {

std::string to_string(SegmentKind kind) { return kind == SegmentKind::thing ? "thing" : "stuff"; }

SegmentKind parse_kind(const std::string& s) {
  if (s == "thing") return SegmentKind::thing;
  if (s == "stuff") return SegmentKind::stuff;
  throw ValidationError("unknown segment kind '" + s + "'");
}

Eigen::VectorXi PanopticMap::class_map() const {
  Eigen::VectorXi out(ids.size());
  for (Index i = 0; i < ids.size(); ++i) {
    const int id = ids(i);
    if (id == kVoid) {
      out(i) = -1;
      continue;
    }
    auto it = segments.find(id);
    require(it != segments.end(), "segment id " + std::to_string(id) + " missing from segment table");
    out(i) = it->second.class_id;
  }
  return out;
}

bool operator==(const PanopticMap& a, const PanopticMap& b) {
  return a.shape == b.shape && a.ids == b.ids && a.segments == b.segments;
}

LabeledPixelSet expand_points(const std::vector<PointLabel>& points, int side, GridShape shape) {
  require(side >= 1 && side % 2 == 1, "label square side must be odd and >= 1");
  const Index r = (side - 1) / 2;
  const Index n = shape.pixels();

  constexpr Index kNone = -1;
  std::vector<Index> claimant(n, kNone);
  std::vector<Index> best_d2(n, std::numeric_limits<Index>::max());
  std::vector<bool> conflict(n, false);

  for (Index p = 0; p < static_cast<Index>(points.size()); ++p) {
    const PointLabel& pt = points[p];
    require(shape.contains(pt.y, pt.x), "point outside the image");
    for (Index y = std::max<Index>(0, pt.y - r); y <= std::min(shape.height - 1, pt.y + r); ++y)
      for (Index x = std::max<Index>(0, pt.x - r); x <= std::min(shape.width - 1, pt.x + r); ++x) {
        const Index i = shape.index(y, x);
        const Index d2 = (y - pt.y) * (y - pt.y) + (x - pt.x) * (x - pt.x);
        if (claimant[i] == kNone) {
          claimant[i] = p;
          best_d2[i] = d2;
          continue;
        }
        const PointLabel& cur = points[claimant[i]];
        if (cur.class_id != pt.class_id) {
          conflict[i] = true;
          continue;
        }
        if (d2 < best_d2[i] || (d2 == best_d2[i] && pt.target_id < cur.target_id)) {
          claimant[i] = p;
          best_d2[i] = d2;
        }
      }
  }

  LabeledPixelSet out;
  for (Index i = 0; i < n; ++i) {
    if (claimant[i] == kNone || conflict[i]) continue;
    const PointLabel& pt = points[claimant[i]];
    out.entries.push_back({i, pt.class_id, pt.target_id});
  }
  return out;
}

std::optional<Violation> validate(const PanopticMap& map) {
  if (map.ids.size() != map.shape.pixels())
    return Violation{"id count does not match shape", -1, static_cast<double>(map.ids.size())};
  for (Index i = 0; i < map.ids.size(); ++i) {
    const int id = map.ids(i);
    if (id < 0) return Violation{"negative segment id", i, static_cast<double>(id)};
    if (id != PanopticMap::kVoid && !map.segments.contains(id))
      return Violation{"segment id missing from table", i, static_cast<double>(id)};
  }
  std::set<int> stuff_classes;
  for (const auto& [id, info] : map.segments) {
    if (id == PanopticMap::kVoid) return Violation{"segment table uses the void id", -1, 0.0};
    if (info.class_id < 0) return Violation{"negative class id", -1, static_cast<double>(info.class_id)};
    if (info.kind == SegmentKind::stuff && !stuff_classes.insert(info.class_id).second)
      return Violation{"duplicate stuff segment for class", -1, static_cast<double>(info.class_id)};
  }
  return std::nullopt;
}

std::optional<Violation> validate(const std::vector<PointLabel>& points, GridShape shape, Index classes) {
  std::map<int, std::pair<int, SegmentKind>> targets;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const PointLabel& p = points[k];
    if (!shape.contains(p.y, p.x)) return Violation{"point out of bounds", static_cast<Index>(k), 0.0};
    if (p.class_id < 0 || p.class_id >= classes)
      return Violation{"point class out of range", static_cast<Index>(k), static_cast<double>(p.class_id)};
    auto [it, inserted] = targets.try_emplace(p.target_id, p.class_id, p.kind);
    if (!inserted && (it->second.first != p.class_id || it->second.second != p.kind))
      return Violation{"points of one target disagree on class or kind", static_cast<Index>(k),
                       static_cast<double>(p.target_id)};
  }
  return std::nullopt;
}

}  // namespace pointpan
