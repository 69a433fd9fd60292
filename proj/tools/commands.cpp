#include "commands.hpp"

#include "pointpan/engine.hpp"
#include "pointpan/io.hpp"
#include "pointpan/losses.hpp"
#include "pointpan/metrics.hpp"
#include "pointpan/sampler.hpp"
#include "pointpan/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace pointpan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stem_seed(std::uint64_t seed, const std::string& stem) { return splitmix64(seed ^ fnv1a64(stem)); }

namespace {

struct Execution {
  int jobs = 1;
  fs::path out_dir;
};

/// Collects the files a command writes, relative to the output directory.
class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}

  fs::path file(const std::string& rel) {
    std::lock_guard lock(mu_);
    files_.insert(rel);
    return root_ / rel;
  }

  /// Stem form for panoptic maps: records both the .png and the .json.
  fs::path panoptic(const std::string& rel_stem) {
    std::lock_guard lock(mu_);
    files_.insert(rel_stem + ".png");
    files_.insert(rel_stem + ".json");
    return root_ / rel_stem;
  }

  json digests() const {
    json out = json::array();
    for (const auto& rel : files_) {
      std::ostringstream hex;
      hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(io::read_text(root_ / rel));
      out.push_back({{"path", rel}, {"fnv1a64", hex.str()}});
    }
    return out;
  }

 private:
  fs::path root_;
  std::mutex mu_;
  std::set<std::string> files_;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> list_stems(const fs::path& dir, const std::string& ext) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext) stems.push_back(entry.path().stem().string());
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw IoError("no " + ext + " files in " + dir.string());
  return stems;
}

/// Input files of one image.
struct SceneFiles {
  std::string stem;
  fs::path image, semantic, features, points, gt;
};

std::vector<SceneFiles> scene_files(const RunConfig& c) {
  std::vector<SceneFiles> out;
  if (!c.paths.data_dir.empty()) {
    const fs::path d = c.paths.data_dir;
    for (const auto& stem : list_stems(d / "semantic", ".bin")) {
      if (!c.paths.stem.empty() && stem != c.paths.stem) continue;
      out.push_back({stem, d / "images" / (stem + ".png"), d / "semantic" / (stem + ".bin"),
                     d / "features" / (stem + ".bin"), d / "points" / (stem + ".jsonl"), d / "gt" / stem});
    }
    if (out.empty()) throw IoError("stem '" + c.paths.stem + "' not found in " + d.string());
    return out;
  }
  require(!c.paths.semantic.empty() && !c.paths.points.empty(),
          "set paths.data_dir, or paths.semantic and paths.points");
  SceneFiles f;
  f.stem = c.paths.stem.empty() ? fs::path(c.paths.points).stem().string() : c.paths.stem;
  f.image = c.paths.image;
  f.semantic = c.paths.semantic;
  f.features = c.paths.features;
  f.points = c.paths.points;
  out.push_back(f);
  return out;
}

struct SceneInputs {
  std::string stem;
  std::optional<RgbImage<double>> image;
  CostModel<double> model;
  std::vector<PointLabel> points;
};

struct Needs {
  bool image = false;
  bool boundary = false;
  bool features = false;
};

SceneInputs load_scene(const SceneFiles& f, const RunConfig& c, Needs needs) {
  SceneInputs s;
  s.stem = f.stem;
  s.model.semantic = io::read_semantic(f.semantic);
  require_valid(s.model.semantic, f.semantic.string());
  s.model.lambda_b = c.lambda_b;
  s.model.lambda_m = c.lambda_m;
  const GridShape shape = s.model.semantic.shape;
  if (needs.image || needs.boundary) {
    require(!f.image.empty(), "an RGB image is required (paths.image)");
    s.image = io::read_rgb_png(f.image);
    require(s.image->shape == shape, f.image.string() + ": image shape differs from the semantic field");
    if (needs.boundary) s.model.boundary = sobel_boundary(rgb_to_lab(*s.image));
  }
  if (needs.features) {
    require(!f.features.empty(), "a feature field is required (paths.features)");
    s.model.manifold = io::read_features(f.features);
    require_valid(*s.model.manifold, f.features.string());
    require(s.model.manifold->shape == shape, f.features.string() + ": feature field shape differs");
  }
  s.points = io::read_points(f.points);
  return s;
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct CommandResult {
  json timings = json::object();
};

fs::path require_out_dir(const Execution& exec) {
  require(!exec.out_dir.empty(), "--out-dir is required");
  return exec.out_dir;
}

// ---------------------------------------------------------------- make-synthetic

CommandResult cmd_make_synthetic(const RunConfig& c, const Execution& exec, OutputSet& outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  const SyntheticConfig& sc = c.synthetic;
  std::vector<std::string> warnings(static_cast<std::size_t>(sc.count));
  detail::parallel_for(sc.count, exec.jobs, [&](Index k) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", static_cast<int>(k));
    const std::string stem = name;
    const std::uint64_t base = stem_seed(c.seed, stem);
    SceneSpec spec;
    spec.size = sc.size;
    spec.n_targets = sc.n_targets;
    if (sc.max_targets > sc.n_targets)
      spec.n_targets += static_cast<int>(splitmix64(base ^ 0x9e3779b97f4a7c15ULL) %
                                         static_cast<std::uint64_t>(sc.max_targets - sc.n_targets + 1));
    spec.thing_classes = sc.thing_classes;
    spec.corruption = sc.corruption;
    spec.touching = sc.touching;
    spec.feature_dims = sc.feature_dims;
    spec.seed = splitmix64(base + 1);
    const SyntheticScene scene = make_scene(spec);

    io::write_rgb_png(outputs.file("images/" + stem + ".png"), scene.image);
    io::write_panoptic(outputs.panoptic("gt/" + stem), scene.gt);
    io::write_field(outputs.file("semantic/" + stem + ".bin"), scene.semantic.shape, scene.semantic.probs);
    io::write_field(outputs.file("features/" + stem + ".bin"), scene.features.shape, scene.features.features);
    const SampledPoints sampled =
        sample_points(scene.gt, {c.strategy, c.points_per_target, base, c.center_form});
    io::write_points(outputs.file("points/" + stem + ".jsonl"), sampled.points);
    for (const auto& w : sampled.warnings) warnings[static_cast<std::size_t>(k)] += stem + ": " + w + "\n";
  });
  for (const auto& w : warnings) out << w;
  out << "wrote " << sc.count << " scenes to " << exec.out_dir.string() << "\n";
  return {{{"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- sample-points

fs::path gt_dir(const RunConfig& c) {
  if (!c.paths.gt_dir.empty()) return c.paths.gt_dir;
  require(!c.paths.data_dir.empty(), "set paths.gt_dir or paths.data_dir");
  return fs::path(c.paths.data_dir) / "gt";
}

CommandResult cmd_sample_points(const RunConfig& c, const Execution& exec, OutputSet& outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  const fs::path gdir = gt_dir(c);
  const auto stems = list_stems(gdir, ".json");
  std::vector<std::string> warnings(stems.size());
  detail::parallel_for(static_cast<Index>(stems.size()), exec.jobs, [&](Index k) {
    const std::string& stem = stems[static_cast<std::size_t>(k)];
    const PanopticMap gt = io::read_panoptic(gdir / stem);
    const SampledPoints sampled =
        sample_points(gt, {c.strategy, c.points_per_target, stem_seed(c.seed, stem), c.center_form});
    io::write_points(outputs.file("points/" + stem + ".jsonl"), sampled.points);
    for (const auto& w : sampled.warnings) warnings[static_cast<std::size_t>(k)] += stem + ": " + w + "\n";
  });
  for (const auto& w : warnings) out << w;
  out << "sampled points for " << stems.size() << " images\n";
  return {{{"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- pseudo-mask

PseudoMaskOptions mask_options(const RunConfig& c, int inner_jobs) {
  PseudoMaskOptions o;
  o.normalization = c.normalization;
  o.exec.jobs = inner_jobs;
  return o;
}

/// Images run in parallel; a single image parallelizes over its labels instead.
std::pair<int, int> split_jobs(std::size_t images, int jobs) {
  return images > 1 ? std::pair{jobs, 1} : std::pair{1, jobs};
}

CommandResult cmd_pseudo_mask(const RunConfig& c, const Execution& exec, OutputSet& outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto files = scene_files(c);
  const auto [outer, inner] = split_jobs(files.size(), exec.jobs);
  const Needs needs{false, c.lambda_b > 0.0 || c.write_boundary, c.lambda_m > 0.0};
  detail::parallel_for(static_cast<Index>(files.size()), outer, [&](Index k) {
    const SceneFiles& f = files[static_cast<std::size_t>(k)];
    SceneInputs s = load_scene(f, c, needs);
    const PanopticMap map = pseudo_mask(s.model, s.points, mask_options(c, inner));
    io::write_panoptic(outputs.panoptic("masks/" + f.stem), map);
    io::write_rgb_png(outputs.file("vis/" + f.stem + ".png"), io::visualize(map));
    if (c.write_boundary) io::write_boundary_png(outputs.file("boundary/" + f.stem + ".png"), *s.model.boundary);
  });
  out << "wrote pseudo-masks for " << files.size() << " images to " << exec.out_dir.string() << "\n";
  return {{{"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- losses

json report_json(const LossReport& r) { return {{"value", r.value}, {"n_terms", r.n_terms}, {"vacuous", r.vacuous}}; }

CommandResult cmd_losses(const RunConfig& c, const Execution& exec, OutputSet* outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto files = scene_files(c);
  const auto [outer, inner] = split_jobs(files.size(), exec.jobs);
  const bool own_masks = c.paths.masks.empty();
  const Needs needs{true, own_masks && c.lambda_b > 0.0, true};
  std::vector<json> rows(files.size());
  std::vector<std::array<LossReport, 3>> reports(files.size());
  detail::parallel_for(static_cast<Index>(files.size()), outer, [&](Index k) {
    const SceneFiles& f = files[static_cast<std::size_t>(k)];
    SceneInputs s = load_scene(f, c, needs);
    const GridShape shape = s.model.shape();
    if (auto v = validate(s.points, shape, s.model.semantic.classes()))
      throw ValidationError(f.points.string() + ": " + v->what);
    const PanopticMap masks = own_masks ? pseudo_mask(s.model, s.points, mask_options(c, inner))
                                        : io::read_panoptic(fs::path(c.paths.masks) / f.stem);
    require(masks.shape == shape, "mask shape differs from the semantic field");
    const AffinityGraph graph = build_affinity(rgb_to_lab(*s.image), c.affinity.kernel, c.affinity.dilation,
                                               c.affinity.threshold, c.affinity.theta);
    auto& r = reports[static_cast<std::size_t>(k)];
    r[0] = partial_ce(s.model.semantic, expand_points(s.points, c.expand_side, shape));
    r[1] = color_prior(s.model.semantic, graph, c.amplify);
    r[2] = contrastive(*s.model.manifold, s.points, masks, c.tau, c.contrastive_denominator);
    rows[static_cast<std::size_t>(k)] = {{"stem", f.stem},
                                         {"partial_ce", report_json(r[0])},
                                         {"color_prior", report_json(r[1])},
                                         {"contrastive", report_json(r[2])}};
  });
  json mean = json::object();
  const char* names[3] = {"partial_ce", "color_prior", "contrastive"};
  for (int l = 0; l < 3; ++l) {
    std::vector<double> values;
    for (const auto& r : reports)
      if (!r[static_cast<std::size_t>(l)].vacuous) values.push_back(r[static_cast<std::size_t>(l)].value);
    mean[names[l]] = values.empty() ? json(nullptr) : json(pairwise_sum(values) / static_cast<double>(values.size()));
  }
  const json doc = {{"images", rows}, {"mean", mean}};
  const std::string text = doc.dump(2) + "\n";
  if (outputs) io::write_text(outputs->file("losses.json"), text);
  out << text;
  return {{{"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- eval

json triple_json(const QualityTriple& t) {
  return {{"pq", t.pq}, {"sq", t.sq}, {"rq", t.rq}, {"classes", t.classes}};
}

json pq_json(const PqReport& r, std::size_t images) {
  json per_class = json::array();
  for (const auto& [cls, s] : r.per_class)
    per_class.push_back({{"class_id", cls},
                         {"kind", to_string(s.kind)},
                         {"pq", s.pq()},
                         {"sq", s.sq()},
                         {"rq", s.rq()},
                         {"tp", s.tp},
                         {"fp", s.fp},
                         {"fn", s.fn}});
  return {{"images", images},
          {"all", triple_json(r.all)},
          {"things", triple_json(r.things)},
          {"stuff", triple_json(r.stuff)},
          {"per_class", per_class}};
}

std::string pq_table(const PqReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "" << std::right << std::setw(8) << "PQ" << std::setw(8) << "SQ"
     << std::setw(8) << "RQ" << std::setw(9) << "classes" << "\n";
  const std::pair<const char*, const QualityTriple*> rows[] = {
      {"All", &r.all}, {"Things", &r.things}, {"Stuff", &r.stuff}};
  for (const auto& [name, t] : rows)
    os << std::left << std::setw(8) << name << std::right << std::setw(8) << fixed(100.0 * t->pq, 1)
       << std::setw(8) << fixed(100.0 * t->sq, 1) << std::setw(8) << fixed(100.0 * t->rq, 1) << std::setw(9)
       << t->classes << "\n";
  return os.str();
}

/// Accumulates PQ over images, each image scored independently and merged in
/// stem order.
template <typename ScoreOne>
PqReport score_images(std::size_t n, int jobs, ScoreOne&& score_one) {
  std::vector<PqAccumulator> acc(n);
  detail::parallel_for(static_cast<Index>(n), jobs, [&](Index k) { score_one(k, acc[static_cast<std::size_t>(k)]); });
  PqAccumulator total;
  for (const auto& a : acc) total.merge(a);
  return total.report();
}

CommandResult cmd_eval(const RunConfig& c, const Execution& exec, OutputSet& outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  require(!c.paths.pred_dir.empty(), "paths.pred_dir is required");
  const fs::path gdir = gt_dir(c), pdir = c.paths.pred_dir;
  const auto stems = list_stems(gdir, ".json");
  for (const auto& p : list_stems(pdir, ".json"))
    require(std::binary_search(stems.begin(), stems.end(), p), "prediction '" + p + "' has no ground truth");
  const PqReport report = score_images(stems.size(), exec.jobs, [&](Index k, PqAccumulator& acc) {
    const std::string& stem = stems[static_cast<std::size_t>(k)];
    acc.add(io::read_panoptic(pdir / stem), io::read_panoptic(gdir / stem));
  });
  io::write_text(outputs.file("report.json"), pq_json(report, stems.size()).dump(2) + "\n");
  const std::string table = pq_table(report);
  io::write_text(outputs.file("report.txt"), table);
  out << table;
  return {{{"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- ablate

CommandResult cmd_ablate(const RunConfig& c, const Execution& exec, OutputSet& outputs, std::ostream& out) {
  const auto t0 = Clock::now();
  const AblationConfig& a = c.ablation;
  require(!a.lambda_b_grid.empty() && !a.lambda_m_grid.empty(), "the ablation grid is empty");
  require(!c.paths.data_dir.empty(), "ablate needs paths.data_dir");
  const auto files = scene_files(c);
  const bool any_b = std::any_of(a.lambda_b_grid.begin(), a.lambda_b_grid.end(), [](double v) { return v > 0; });
  const bool any_m = std::any_of(a.lambda_m_grid.begin(), a.lambda_m_grid.end(), [](double v) { return v > 0; });

  std::vector<SceneInputs> scenes(files.size());
  std::vector<PanopticMap> gts(files.size());
  detail::parallel_for(static_cast<Index>(files.size()), exec.jobs, [&](Index k) {
    const auto i = static_cast<std::size_t>(k);
    scenes[i] = load_scene(files[i], c, {false, any_b, any_m});
    gts[i] = io::read_panoptic(files[i].gt);
  });
  const double load_ms = elapsed_ms(t0);

  std::vector<std::optional<SamplingStrategy>> strategies;
  if (a.strategies.empty()) strategies.push_back(std::nullopt);
  for (auto s : a.strategies) strategies.push_back(s);

  std::ostringstream csv;
  csv << "strategy,lambda_b,lambda_m,pq,sq,rq,pq_th,pq_st\n";
  for (const auto& strategy : strategies) {
    std::vector<std::vector<PointLabel>> points(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i)
      points[i] = strategy ? sample_points(gts[i], {*strategy, c.points_per_target, stem_seed(c.seed, scenes[i].stem),
                                                    c.center_form})
                                 .points
                           : scenes[i].points;
    for (double lb : a.lambda_b_grid)
      for (double lm : a.lambda_m_grid) {
        for (auto& s : scenes) {
          s.model.lambda_b = lb;
          s.model.lambda_m = lm;
        }
        const PqReport r = score_images(scenes.size(), exec.jobs, [&](Index k, PqAccumulator& acc) {
          const auto i = static_cast<std::size_t>(k);
          acc.add(pseudo_mask(scenes[i].model, points[i], mask_options(c, 1)), gts[i]);
        });
        csv << (strategy ? to_string(*strategy) : "dataset") << "," << fixed(lb, 4) << "," << fixed(lm, 4) << ","
            << fixed(r.all.pq) << "," << fixed(r.all.sq) << "," << fixed(r.all.rq) << "," << fixed(r.things.pq)
            << "," << fixed(r.stuff.pq) << "\n";
      }
  }
  io::write_text(outputs.file("ablate.csv"), csv.str());
  out << csv.str();
  return {{{"load", load_ms}, {"total", elapsed_ms(t0)}}};
}

// ---------------------------------------------------------------- dispatch

using Command = std::function<CommandResult(const RunConfig&, const Execution&, OutputSet&, std::ostream&)>;

Command find_command(const std::string& name) {
  if (name == "make-synthetic") return cmd_make_synthetic;
  if (name == "sample-points") return cmd_sample_points;
  if (name == "pseudo-mask") return cmd_pseudo_mask;
  if (name == "eval") return cmd_eval;
  if (name == "ablate") return cmd_ablate;
  throw ValidationError("unknown command '" + name + "'");
}

/// Runs a file-producing command and writes its manifest next to the outputs.
json run_recorded(const std::string& name, const RunConfig& c, const Execution& exec, std::ostream& out) {
  const fs::path root = require_out_dir(exec);
  OutputSet outputs(root);
  CommandResult result;
  if (name == "losses")
    result = cmd_losses(c, exec, &outputs, out);
  else
    result = find_command(name)(c, exec, outputs, out);
  json manifest = {{"command", name},
                   {"config", to_json(c)},
                   {"outputs", outputs.digests()},
                   {"execution", {{"jobs", exec.jobs}, {"out_dir", exec.out_dir.string()}}},
                   {"timings_ms", result.timings}};
  io::write_text(root / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

struct Invocation {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, json>> flags;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out_dir;
};

RunConfig resolve_config(const Invocation& inv) {
  json j = json::object();
  if (!inv.config_path.empty()) {
    try {
      j = json::parse(io::read_text(inv.config_path));
    } catch (const json::parse_error& e) {
      throw ValidationError(inv.config_path + ": " + e.what());
    }
  }
  for (const auto& [key, value] : inv.flags) {
    json* node = &j;
    std::stringstream ss(key);
    std::string part, last;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) node = &(*node)[parts[k]];
    (*node)[parts.back()] = value;
  }
  for (const auto& s : inv.sets) {
    const auto eq = s.find('=');
    require(eq != std::string::npos, "--set expects key=value, got '" + s + "'");
    apply_override(j, s.substr(0, eq), s.substr(eq + 1));
  }
  if (inv.seed) j["seed"] = *inv.seed;
  return config_from_json(j);
}

void add_common(CLI::App* sub, Invocation& inv, bool needs_out) {
  sub->add_option("--config", inv.config_path, "JSON config file");
  sub->add_option("--set", inv.sets, "Override a config key, e.g. --set affinity.kernel=7");
  sub->add_option("--seed", inv.seed, "Random seed");
  sub->add_option("--jobs", inv.jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* o = sub->add_option("--out-dir", inv.out_dir, "Output directory");
  if (needs_out) o->required();
}

template <typename T>
void add_flag_option(CLI::App* sub, Invocation& inv, const std::string& flag, const std::string& key,
                     const std::string& help) {
  sub->add_option_function<T>(flag, [&inv, key](const T& v) { inv.flags.emplace_back(key, json(v)); }, help);
}

void add_list_option(CLI::App* sub, Invocation& inv, const std::string& flag, const std::string& key,
                     const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&inv, key](const std::string& v) { inv.flags.emplace_back(key, json(parse_number_list(v))); }, help);
}

void add_scene_paths(CLI::App* sub, Invocation& inv) {
  add_flag_option<std::string>(sub, inv, "--data", "paths.data_dir", "Dataset directory");
  add_flag_option<std::string>(sub, inv, "--stem", "paths.stem", "Restrict to one image, or name the output");
  add_flag_option<std::string>(sub, inv, "--image", "paths.image", "RGB PNG");
  add_flag_option<std::string>(sub, inv, "--semantic", "paths.semantic", "Semantic field blob");
  add_flag_option<std::string>(sub, inv, "--features", "paths.features", "Feature field blob");
  add_flag_option<std::string>(sub, inv, "--points", "paths.points", "Point labels (JSON lines)");
  add_flag_option<double>(sub, inv, "--lambda-b", "lambda_b", "Boundary weight");
  add_flag_option<double>(sub, inv, "--lambda-m", "lambda_m", "Manifold weight");
}

void add_sampling(CLI::App* sub, Invocation& inv) {
  add_flag_option<std::string>(sub, inv, "--strategy", "strategy", "uniform, center or border");
  add_flag_option<int>(sub, inv, "--k", "points_per_target", "Points per target");
}

int replay(const fs::path& manifest_path, std::optional<int> jobs, const std::string& out_dir, bool verify,
           std::ostream& out, std::ostream& err) {
  json m;
  try {
    m = json::parse(io::read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  require(m.is_object() && m.contains("command") && m.contains("config") && m.contains("execution"),
          manifest_path.string() + ": not a run manifest");
  const RunConfig c = config_from_json(m.at("config"));
  Execution exec;
  exec.jobs = jobs.value_or(m.at("execution").value("jobs", 1));
  exec.out_dir = out_dir.empty() ? fs::path(m.at("execution").value("out_dir", "")) : fs::path(out_dir);
  const json fresh = run_recorded(m.at("command").get<std::string>(), c, exec, out);
  if (verify && fresh.at("outputs") != m.at("outputs")) {
    err << "pointpan: replay outputs differ from " << manifest_path.string() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dense panoptic pseudo-masks from point labels", "pointpan"};
  app.require_subcommand(1);
  Invocation inv;

  auto* synth = app.add_subcommand("make-synthetic", "Generate colored-blob scenes with ideal fields");
  add_common(synth, inv, true);
  add_flag_option<int>(synth, inv, "--count", "synthetic.count", "Number of scenes");
  add_flag_option<Index>(synth, inv, "--size", "synthetic.size", "Side length in pixels");
  add_flag_option<int>(synth, inv, "--n-targets", "synthetic.n_targets", "Targets per scene");
  add_flag_option<int>(synth, inv, "--max-targets", "synthetic.max_targets", "Upper bound for a random count");
  add_flag_option<double>(synth, inv, "--corruption", "synthetic.corruption", "Semantic field corruption");
  add_flag_option<bool>(synth, inv, "--touching", "synthetic.touching", "Place same-class touching pairs");
  add_sampling(synth, inv);

  auto* sample = app.add_subcommand("sample-points", "Sample point labels from ground-truth maps");
  add_common(sample, inv, true);
  add_flag_option<std::string>(sample, inv, "--data", "paths.data_dir", "Dataset directory");
  add_flag_option<std::string>(sample, inv, "--gt", "paths.gt_dir", "Ground-truth directory");
  add_sampling(sample, inv);

  auto* mask = app.add_subcommand("pseudo-mask", "Generate panoptic pseudo-masks");
  add_common(mask, inv, true);
  add_scene_paths(mask, inv);

  auto* losses = app.add_subcommand("losses", "Report the weak-supervision losses");
  add_common(losses, inv, false);
  add_scene_paths(losses, inv);
  add_flag_option<std::string>(losses, inv, "--masks", "paths.masks", "Directory of target masks");

  auto* eval = app.add_subcommand("eval", "Panoptic quality of predictions against ground truth");
  add_common(eval, inv, true);
  add_flag_option<std::string>(eval, inv, "--pred", "paths.pred_dir", "Prediction directory");
  add_flag_option<std::string>(eval, inv, "--gt", "paths.gt_dir", "Ground-truth directory");
  add_flag_option<std::string>(eval, inv, "--data", "paths.data_dir", "Dataset directory (uses its gt/)");

  auto* ablate = app.add_subcommand("ablate", "PQ of pseudo-masks over a lambda grid and sampling strategies");
  add_common(ablate, inv, true);
  add_flag_option<std::string>(ablate, inv, "--data", "paths.data_dir", "Dataset directory");
  add_list_option(ablate, inv, "--lambda-b-grid", "ablation.lambda_b_grid", "Comma-separated lambda_b values");
  add_list_option(ablate, inv, "--lambda-m-grid", "ablation.lambda_m_grid", "Comma-separated lambda_m values");
  ablate->add_option_function<std::string>(
      "--strategies",
      [&inv](const std::string& v) {
        json list = json::array();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) list.push_back(item);
        inv.flags.emplace_back("ablation.strategies", list);
      },
      "Comma-separated sampling strategies; omit to use the dataset's points");

  std::string manifest_path, replay_out;
  std::optional<int> replay_jobs;
  bool verify = false;
  auto* rep = app.add_subcommand("replay", "Re-run a command from its manifest");
  rep->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rep->add_option("--jobs", replay_jobs, "Worker threads")->check(CLI::PositiveNumber);
  rep->add_option("--out-dir", replay_out, "Output directory (default: the recorded one)");
  rep->add_flag("--verify", verify, "Fail when the outputs differ from the recorded digests");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rep->parsed()) return replay(manifest_path, replay_jobs, replay_out, verify, out, err);
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig c = resolve_config(inv);
    Execution exec{inv.jobs, inv.out_dir};
    if (sub == losses && inv.out_dir.empty()) {
      cmd_losses(c, exec, nullptr, out);
      return 0;
    }
    run_recorded(sub->get_name(), c, exec, out);
    return 0;
  } catch (const ValidationError& e) {
    err << "pointpan: validation error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "pointpan: I/O error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "pointpan: I/O error: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    err << "pointpan: validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "pointpan: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pointpan::cli
