#include "pointpan/metrics.hpp"

#include <set>

namespace pointpan {

double ClassStats::pq() const {
  const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn);
  return denom > 0.0 ? iou_sum / denom : 0.0;
}

double ClassStats::sq() const { return tp > 0 ? iou_sum / static_cast<double>(tp) : 0.0; }

double ClassStats::rq() const {
  const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn);
  return denom > 0.0 ? static_cast<double>(tp) / denom : 0.0;
}

namespace {

/// Stuff segments of one class collapse onto the smallest id of that class.
std::map<int, int> stuff_merge(const PanopticMap& m) {
  std::map<int, int> first_stuff;
  std::map<int, int> remap;
  for (const auto& [id, info] : m.segments) {
    if (info.kind == SegmentKind::stuff) {
      auto [it, inserted] = first_stuff.try_emplace(info.class_id, id);
      remap[id] = it->second;
    } else {
      remap[id] = id;
    }
  }
  return remap;
}

void check_classes(const PanopticMap& m, const PqOptions& opts, const char* which) {
  for (const auto& [id, info] : m.segments) {
    require(info.class_id >= 0, std::string(which) + ": negative class id");
    if (opts.num_classes)
      require(info.class_id < *opts.num_classes,
              std::string(which) + ": unknown class id " + std::to_string(info.class_id));
  }
}

void check_ids(const PanopticMap& m, const char* which) {
  require(m.ids.size() == m.shape.pixels(), std::string(which) + ": ids do not match the shape");
  for (Index i = 0; i < m.ids.size(); ++i)
    require(m.ids(i) == PanopticMap::kVoid || m.segments.contains(m.ids(i)),
            std::string(which) + ": id " + std::to_string(m.ids(i)) + " missing from segment table");
}

}  // namespace

void PqAccumulator::add(const PanopticMap& pred, const PanopticMap& gt) {
  require(pred.shape == gt.shape, "prediction and ground truth shapes differ");
  // Several stuff segments per class are allowed here; they are merged below.
  check_ids(pred, "prediction");
  check_ids(gt, "ground truth");
  check_classes(pred, opts_, "prediction");
  check_classes(gt, opts_, "ground truth");

  const std::map<int, int> pred_remap = stuff_merge(pred);
  const std::map<int, int> gt_remap = stuff_merge(gt);

  std::map<int, Index> pred_area, gt_area, pred_on_void;
  std::map<std::pair<int, int>, Index> inter;
  for (Index i = 0; i < gt.ids.size(); ++i) {
    const int g = gt.ids(i) == PanopticMap::kVoid ? 0 : gt_remap.at(gt.ids(i));
    const int p = pred.ids(i) == PanopticMap::kVoid ? 0 : pred_remap.at(pred.ids(i));
    if (p != 0) {
      ++pred_area[p];
      if (g == 0) ++pred_on_void[p];
    }
    if (g != 0) ++gt_area[g];
    if (g != 0 && p != 0) ++inter[{g, p}];
  }

  auto touch = [&](int class_id, SegmentKind kind) -> ClassStats& {
    auto [it, inserted] = stats_.try_emplace(class_id);
    if (inserted) {
      it->second.kind = kind;
    } else {
      require(it->second.kind == kind, "class " + std::to_string(class_id) + " is both thing and stuff");
    }
    return it->second;
  };

  std::set<int> gt_matched, pred_matched;
  for (const auto& [key, count] : inter) {
    const auto [g, p] = key;
    const SegmentInfo& gi = gt.segments.at(g);
    const SegmentInfo& pi = pred.segments.at(p);
    if (gi.class_id != pi.class_id) continue;
    const Index uni = pred_area.at(p) + gt_area.at(g) - count - (pred_on_void.contains(p) ? pred_on_void.at(p) : 0);
    const double iou = static_cast<double>(count) / static_cast<double>(uni);
    if (iou > 0.5) {
      ClassStats& cs = touch(gi.class_id, gi.kind);
      ++cs.tp;
      cs.iou_sum += iou;
      gt_matched.insert(g);
      pred_matched.insert(p);
    }
  }
  for (const auto& [g, area] : gt_area) {
    if (gt_matched.contains(g)) continue;
    const SegmentInfo& gi = gt.segments.at(g);
    ++touch(gi.class_id, gi.kind).fn;
  }
  for (const auto& [p, area] : pred_area) {
    if (pred_matched.contains(p)) continue;
    const Index on_void = pred_on_void.contains(p) ? pred_on_void.at(p) : 0;
    if (static_cast<double>(on_void) / static_cast<double>(area) > 0.5) continue;
    const SegmentInfo& pi = pred.segments.at(p);
    ++touch(pi.class_id, pi.kind).fp;
  }
}

void PqAccumulator::merge(const PqAccumulator& other) {
  for (const auto& [c, s] : other.stats_) {
    auto [it, inserted] = stats_.try_emplace(c, s);
    if (inserted) continue;
    require(it->second.kind == s.kind, "class " + std::to_string(c) + " is both thing and stuff");
    it->second.iou_sum += s.iou_sum;
    it->second.tp += s.tp;
    it->second.fp += s.fp;
    it->second.fn += s.fn;
  }
}

PqReport PqAccumulator::report() const {
  PqReport r;
  r.per_class = stats_;
  auto accumulate = [](QualityTriple& q, const ClassStats& s) {
    q.pq += s.pq();
    q.sq += s.sq();
    q.rq += s.rq();
    ++q.classes;
  };
  auto finish = [](QualityTriple& q) {
    if (q.classes == 0) return;
    const double n = static_cast<double>(q.classes);
    q.pq /= n;
    q.sq /= n;
    q.rq /= n;
  };
  for (const auto& [c, s] : stats_) {
    if (s.tp + s.fp + s.fn == 0) continue;
    accumulate(r.all, s);
    accumulate(s.kind == SegmentKind::thing ? r.things : r.stuff, s);
  }
  finish(r.all);
  finish(r.things);
  finish(r.stuff);
  return r;
}

PqReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt, PqOptions opts) {
  PqAccumulator acc(opts);
  acc.add(pred, gt);
  return acc.report();
}

IouReport mean_iou(const Eigen::VectorXi& pred_classes, const Eigen::VectorXi& gt_classes) {
  require(pred_classes.size() == gt_classes.size(), "prediction and ground truth sizes differ");
  std::map<int, Index> inter, uni_gt, uni_pred;
  std::set<int> present;
  for (Index i = 0; i < gt_classes.size(); ++i) {
    const int g = gt_classes(i);
    if (g < 0) continue;
    const int p = pred_classes(i);
    present.insert(g);
    ++uni_gt[g];
    if (p >= 0) ++uni_pred[p];
    if (p == g) ++inter[g];
  }
  IouReport r;
  for (int c : present) {
    const Index in = inter.contains(c) ? inter.at(c) : 0;
    const Index un = uni_gt.at(c) + (uni_pred.contains(c) ? uni_pred.at(c) : 0) - in;
    r.per_class[c] = static_cast<double>(in) / static_cast<double>(un);
    r.mean += r.per_class[c];
  }
  if (!present.empty()) r.mean /= static_cast<double>(present.size());
  return r;
}

IouReport mean_iou(const PanopticMap& pred, const PanopticMap& gt) {
  require(pred.shape == gt.shape, "prediction and ground truth shapes differ");
  return mean_iou(pred.class_map(), gt.class_map());
}

}  // namespace pointpan
