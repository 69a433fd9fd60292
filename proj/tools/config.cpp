#include "config.hpp"

#include <set>
#include <sstream>

namespace pointpan::cli {

namespace {

using nlohmann::json;

std::string to_string(Normalization n) { return n == Normalization::global ? "global" : "per_label"; }
std::string to_string(ContrastiveDenominator d) { return d == ContrastiveDenominator::targets ? "targets" : "points"; }

Normalization parse_normalization(const std::string& s) {
  if (s == "global") return Normalization::global;
  if (s == "per_label") return Normalization::per_label;
  throw ValidationError("unknown normalization '" + s + "'");
}

ContrastiveDenominator parse_denominator(const std::string& s) {
  if (s == "targets") return ContrastiveDenominator::targets;
  if (s == "points") return ContrastiveDenominator::points;
  throw ValidationError("unknown contrastive denominator '" + s + "'");
}

/// Reads known keys of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), where_ + " must be a JSON object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ValidationError("unknown config key '" + prefix() + key + "'");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config key '" + prefix() + key + "' has the wrong type");
    }
  }

  template <typename Parse, typename T>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse(s);
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::check() const {
  require(std::isfinite(lambda_b) && lambda_b >= 0.0, "lambda_b must be finite and >= 0");
  require(std::isfinite(lambda_m) && lambda_m >= 0.0, "lambda_m must be finite and >= 0");
  require(tau > 0.0, "tau must be > 0");
  require(expand_side >= 1 && expand_side % 2 == 1, "expand_side must be odd and >= 1");
  require(affinity.kernel >= 3 && affinity.kernel % 2 == 1, "affinity.kernel must be odd and >= 3");
  require(affinity.dilation >= 1, "affinity.dilation must be >= 1");
  require(affinity.threshold > 0.0 && affinity.threshold < 1.0, "affinity.threshold must lie in (0,1)");
  require(affinity.theta > 0.0, "affinity.theta must be > 0");
  require(amplify >= 0.0, "amplify must be >= 0");
  require(points_per_target >= 1, "points_per_target must be >= 1");
  require(synthetic.size >= 16, "synthetic.size must be >= 16");
  require(synthetic.n_targets >= 1, "synthetic.n_targets must be >= 1");
  require(synthetic.max_targets == 0 || synthetic.max_targets >= synthetic.n_targets,
          "synthetic.max_targets must be 0 or >= n_targets");
  require(synthetic.count >= 1, "synthetic.count must be >= 1");
  require(synthetic.thing_classes >= 1, "synthetic.thing_classes must be >= 1");
  require(synthetic.corruption >= 0.0 && synthetic.corruption <= 1.0, "synthetic.corruption must lie in [0,1]");
  require(synthetic.feature_dims >= 1, "synthetic.feature_dims must be >= 1");
  for (double v : ablation.lambda_b_grid) require(std::isfinite(v) && v >= 0.0, "ablation grid values must be >= 0");
  for (double v : ablation.lambda_m_grid) require(std::isfinite(v) && v >= 0.0, "ablation grid values must be >= 0");
}

nlohmann::json to_json(const RunConfig& c) {
  json strategies = json::array();
  for (auto s : c.ablation.strategies) strategies.push_back(to_string(s));
  return {
      {"lambda_b", c.lambda_b},
      {"lambda_m", c.lambda_m},
      {"tau", c.tau},
      {"expand_side", c.expand_side},
      {"affinity",
       {{"kernel", c.affinity.kernel},
        {"dilation", c.affinity.dilation},
        {"threshold", c.affinity.threshold},
        {"theta", c.affinity.theta}}},
      {"amplify", c.amplify},
      {"normalization", to_string(c.normalization)},
      {"contrastive_denominator", to_string(c.contrastive_denominator)},
      {"strategy", to_string(c.strategy)},
      {"points_per_target", c.points_per_target},
      {"center_form", to_string(c.center_form)},
      {"seed", c.seed},
      {"write_boundary", c.write_boundary},
      {"synthetic",
       {{"size", c.synthetic.size},
        {"n_targets", c.synthetic.n_targets},
        {"max_targets", c.synthetic.max_targets},
        {"count", c.synthetic.count},
        {"thing_classes", c.synthetic.thing_classes},
        {"corruption", c.synthetic.corruption},
        {"touching", c.synthetic.touching},
        {"feature_dims", c.synthetic.feature_dims}}},
      {"ablation",
       {{"lambda_b_grid", c.ablation.lambda_b_grid},
        {"lambda_m_grid", c.ablation.lambda_m_grid},
        {"strategies", strategies}}},
      {"paths",
       {{"data_dir", c.paths.data_dir},
        {"stem", c.paths.stem},
        {"image", c.paths.image},
        {"semantic", c.paths.semantic},
        {"features", c.paths.features},
        {"points", c.paths.points},
        {"masks", c.paths.masks},
        {"pred_dir", c.paths.pred_dir},
        {"gt_dir", c.paths.gt_dir}}},
  };
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  {
    ObjectReader r(j, "");
    r.get("lambda_b", c.lambda_b);
    r.get("lambda_m", c.lambda_m);
    r.get("tau", c.tau);
    r.get("expand_side", c.expand_side);
    r.get("amplify", c.amplify);
    r.get_enum("normalization", c.normalization, parse_normalization);
    r.get_enum("contrastive_denominator", c.contrastive_denominator, parse_denominator);
    r.get_enum("strategy", c.strategy, parse_strategy);
    r.get("points_per_target", c.points_per_target);
    r.get_enum("center_form", c.center_form, parse_center_form);
    r.get("seed", c.seed);
    r.get("write_boundary", c.write_boundary);
    if (const json* a = r.sub("affinity")) {
      ObjectReader ar(*a, "affinity");
      ar.get("kernel", c.affinity.kernel);
      ar.get("dilation", c.affinity.dilation);
      ar.get("threshold", c.affinity.threshold);
      ar.get("theta", c.affinity.theta);
    }
    if (const json* s = r.sub("synthetic")) {
      ObjectReader sr(*s, "synthetic");
      sr.get("size", c.synthetic.size);
      sr.get("n_targets", c.synthetic.n_targets);
      sr.get("max_targets", c.synthetic.max_targets);
      sr.get("count", c.synthetic.count);
      sr.get("thing_classes", c.synthetic.thing_classes);
      sr.get("corruption", c.synthetic.corruption);
      sr.get("touching", c.synthetic.touching);
      sr.get("feature_dims", c.synthetic.feature_dims);
    }
    if (const json* a = r.sub("ablation")) {
      ObjectReader ar(*a, "ablation");
      ar.get("lambda_b_grid", c.ablation.lambda_b_grid);
      ar.get("lambda_m_grid", c.ablation.lambda_m_grid);
      std::vector<std::string> strategies;
      ar.get("strategies", strategies);
      for (const auto& s : strategies) c.ablation.strategies.push_back(parse_strategy(s));
    }
    if (const json* p = r.sub("paths")) {
      ObjectReader pr(*p, "paths");
      pr.get("data_dir", c.paths.data_dir);
      pr.get("stem", c.paths.stem);
      pr.get("image", c.paths.image);
      pr.get("semantic", c.paths.semantic);
      pr.get("features", c.paths.features);
      pr.get("points", c.paths.points);
      pr.get("masks", c.paths.masks);
      pr.get("pred_dir", c.paths.pred_dir);
      pr.get("gt_dir", c.paths.gt_dir);
    }
  }
  c.check();
  return c;
}

void apply_override(nlohmann::json& j, const std::string& key, const std::string& value) {
  require(!key.empty(), "empty override key");
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    if (!node->contains(parts[k])) (*node)[parts[k]] = json::object();
    node = &(*node)[parts[k]];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  (*node)[parts.back()] = parsed;
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      throw ValidationError("bad number '" + item + "' in list");
    }
  }
  return out;
}

}  // namespace pointpan::cli
