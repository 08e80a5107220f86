#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cpath/augment.hpp"
#include "cpath/cluster.hpp"
#include "cpath/config.hpp"
#include "cpath/data.hpp"
#include "cpath/errors.hpp"
#include "cpath/eval.hpp"
#include "cpath/features.hpp"
#include "cpath/gradsuite.hpp"
#include "cpath/imaging.hpp"
#include "cpath/parallel.hpp"
#include "cpath/synth.hpp"
#include "cpath/train.hpp"

namespace fs = std::filesystem;

namespace cpath::cli {

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string log_level = "info";
};

// Thrown for bad flag values detected after parsing; maps to the usage exit code.
struct UsageError : Error {
  using Error::Error;
};

config::RunConfig load_config(const Globals& g) {
  config::RunConfig cfg = g.config.empty() ? config::from_document(config::parse_toml("")) : config::load(g.config);
  cfg.seed = resolve_seed(g.seed, std::getenv("CONTRASTIVE_PATH_SEED"), cfg.seed);
  cfg.pretrain.workers = g.workers;
  cfg.propagate_seed();
  return cfg;
}

void write_resolved_into(const config::RunConfig& cfg, const fs::path& dir) {
  config::write_resolved(cfg, (dir.empty() ? fs::path(".") : dir) / "resolved_config.toml");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

bool is_image_file(const fs::path& p) {
  static const std::set<std::string> exts{".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return exts.count(ext) > 0;
}

// ---- tile ----

struct TileArgs {
  std::string input;
  std::string out;
  int side = 224;
  int stride = 224;
  double min_fg = 0.5;
  std::string dataset;
  std::string organ = "unknown";
  std::string stain = "unknown";
  std::string resolution = "unknown";
};

int cmd_tile(const Globals& g, const TileArgs& a) {
  auto cfg = load_config(g);
  std::vector<fs::path> sources;
  for (const auto& e : fs::directory_iterator(a.input))
    if (e.is_regular_file() && is_image_file(e.path())) sources.push_back(e.path());
  std::sort(sources.begin(), sources.end());

  data::DatasetManifest ds;
  ds.dataset_id = a.dataset.empty() ? fs::path(a.input).lexically_normal().filename().string() : a.dataset;
  if (ds.dataset_id.empty()) ds.dataset_id = fs::absolute(a.input).parent_path().filename().string();
  ds.kind = data::SourceKind::wsi;
  ds.organ = a.organ;
  ds.stain = a.stain;
  ds.resolution = parse_resolution(a.resolution);

  imaging::TileOptions opt;
  opt.side = a.side;
  opt.stride = a.stride;
  opt.min_foreground = a.min_fg;
  const fs::path out(a.out);
  fs::create_directories(out);
  for (const auto& src : sources) {
    PatchMeta meta;
    meta.dataset_id = ds.dataset_id;
    meta.source_id = src.stem().string();
    meta.resolution = ds.resolution;
    auto patches = imaging::tile_source(read_image(src), opt, meta);
    std::sort(patches.begin(), patches.end(), [](const ImagePatch& l, const ImagePatch& r) {
      return std::tie(l.meta.source_id, l.meta.y, l.meta.x) < std::tie(r.meta.source_id, r.meta.y, r.meta.x);
    });
    for (const auto& p : patches) {
      const fs::path rel =
          fs::path(ds.dataset_id) / meta.source_id / (std::to_string(p.meta.y) + "_" + std::to_string(p.meta.x) + ".png");
      write_png(out / rel, p.image);
      ds.entries.push_back({rel.generic_string(), p.meta.source_id, p.meta.x, p.meta.y});
    }
    spdlog::info("{}: {} patches", src.filename().string(), patches.size());
  }
  const fs::path manifest = out / (ds.dataset_id + ".manifest.jsonl");
  if (ds.entries.empty()) {
    spdlog::warn("no patches passed the foreground filter ({} source images); writing an empty manifest",
                 sources.size());
    write_text(manifest, "");
  } else {
    data::write_manifest(manifest, {ds});
  }
  write_resolved_into(cfg, out);
  std::cout << ds.entries.size() << " patches -> " << manifest.string() << "\n";
  return kExitOk;
}

// ---- sample ----

struct SampleArgs {
  std::vector<std::string> manifests;
  std::optional<double> percent;
  std::optional<std::int64_t> cap;
  std::optional<std::int64_t> min;
  std::optional<std::int64_t> max;
  std::vector<std::string> organs;
  std::vector<std::string> resolutions;
  std::vector<std::string> stains;
  std::string out;
};

int cmd_sample(const Globals& g, const SampleArgs& a) {
  auto cfg = load_config(g);
  auto& pol = cfg.sampling;
  if (a.percent) pol.percent = *a.percent;
  if (a.cap) pol.per_wsi_cap = *a.cap;
  if (a.min) pol.per_dataset_min = *a.min;
  if (a.max) pol.per_dataset_max = *a.max;
  if (!a.organs.empty()) pol.filters.organs = {a.organs.begin(), a.organs.end()};
  if (!a.stains.empty()) pol.filters.stains = {a.stains.begin(), a.stains.end()};
  if (!a.resolutions.empty()) {
    pol.filters.resolutions.clear();
    for (const auto& r : a.resolutions) pol.filters.resolutions.insert(parse_resolution(r));
  }
  try {
    pol.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  std::vector<fs::path> paths(a.manifests.begin(), a.manifests.end());
  // validates tags and cross-file uniqueness of dataset ids
  data::ManifestCollection all = data::load_manifests(paths);
  std::map<std::string, fs::path> home;
  for (const auto& p : paths)
    for (const auto& ds : data::load_manifests({p})) home[ds.dataset_id] = p.parent_path();

  const fs::path out(a.out);
  const fs::path list_dir = fs::absolute(out).parent_path();
  for (auto& ds : all) {
    for (auto& e : ds.entries) {
      fs::path p(e.path);
      if (p.is_relative()) p = fs::absolute(home[ds.dataset_id] / p);
      if (!fs::exists(p)) throw IoError("dataset " + ds.dataset_id + ": missing file " + p.string());
      e.path = p.lexically_normal().lexically_relative(list_dir).generic_string();
    }
  }

  std::vector<data::SampledEntry> picked;
  try {
    picked = data::build_pretraining_set(all, pol);
  } catch (const ConfigError& e) {
    throw Error(e.what());
  }
  if (picked.empty()) throw Error("sampling produced an empty training list");
  data::write_entry_list(out, picked);
  write_resolved_into(cfg, out.parent_path());
  std::cout << picked.size() << " entries -> " << out.string() << "\n";
  return kExitOk;
}

// ---- pretrain ----

struct PretrainArgs {
  std::string list;
  std::string out;
  std::optional<int> epochs;
  std::optional<std::int64_t> inject_nan_at;
};

int cmd_pretrain(const Globals& g, const PretrainArgs& a) {
  auto cfg = load_config(g);
  if (a.epochs) cfg.pretrain.epochs = *a.epochs;
  cfg.pretrain.inject_nan_at_step = a.inject_nan_at;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto entries = data::read_entry_list(a.list);
  const auto images = train::load_images(entries, cfg.pretrain.encoder.input_side, fs::path(a.list).parent_path());
  const fs::path out(a.out);
  fs::create_directories(out);
  write_resolved_into(cfg, out);
  spdlog::info("pretraining on {} images for {} epochs", images.size(), cfg.pretrain.epochs);
  const auto result = train::pretrain(images, cfg.pretrain, out);
  std::cout << "steps " << result.steps << ", final loss "
            << (result.trace.empty() ? 0.0 : result.trace.back().mean_loss) << "\n";
  return kExitOk;
}

// ---- probe / finetune ----

struct EvalArgs {
  std::vector<std::string> checkpoints;
  bool random = false;
  std::string data;
  std::string labels;
  std::vector<double> percents;
  std::optional<int> repeats;
  std::optional<int> epochs;
  std::string out;
};

eval::LabeledSet load_labeled(const fs::path& labels, const fs::path& root, int side) {
  std::istringstream in(read_text(labels));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(labels.string() + ": empty labels file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  eval::LabeledSet set;
  if (line == "path,label") {
    set.targets.task = eval::Task::classification;
  } else if (line == "path,value") {
    set.targets.task = eval::Task::regression;
  } else {
    throw ParseError(labels.string() + ": header must be 'path,label' or 'path,value'");
  }
  int row = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError(labels.string() + ": row " + std::to_string(row) + ": expected 2 columns");
    const fs::path path = root / line.substr(0, comma);
    const std::string field = line.substr(comma + 1);
    try {
      std::size_t pos = 0;
      if (set.targets.task == eval::Task::classification) {
        const int label = std::stoi(field, &pos);
        if (label < 0) throw std::invalid_argument("negative");
        set.targets.labels.push_back(label);
        max_label = std::max(max_label, label);
      } else {
        set.targets.values.push_back(std::stod(field, &pos));
      }
      if (pos != field.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(labels.string() + ": row " + std::to_string(row) + ": bad target '" + field + "'");
    }
    RgbImage img = read_image(path);
    if (img.width != side || img.height != side) img = augment::resize_bilinear(img, side, side);
    set.images.push_back(std::move(img));
  }
  if (set.targets.task == eval::Task::classification) set.targets.num_classes = std::max(2, max_label + 1);
  set.validate();
  return set;
}

int cmd_eval(const Globals& g, const EvalArgs& a, eval::Mode mode) {
  auto cfg = load_config(g);
  auto& protocol = cfg.eval;
  protocol.mode = mode;
  if (a.repeats) protocol.repeats = *a.repeats;
  if (a.epochs) protocol.epochs = *a.epochs;
  if (!a.percents.empty()) cfg.eval_percents = a.percents;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (a.checkpoints.empty() && !a.random) throw UsageError("give at least one --checkpoint or --random");

  std::vector<model::Model> models;
  std::vector<std::string> names;
  for (const auto& c : a.checkpoints) {
    models.push_back(model::load_checkpoint(c));
    names.push_back(fs::path(c).stem().string());
  }
  if (a.random) {
    const auto& enc = models.empty() ? cfg.pretrain.encoder : models.front().encoder_config();
    const auto& proj = models.empty() ? cfg.pretrain.projection : models.front().projection_config();
    models.push_back(model::Model::init(enc, proj, cfg.seed));
    names.push_back("random");
  }
  const int side = models.front().encoder_config().input_side;
  for (const auto& m : models)
    if (m.encoder_config().input_side != side) throw Error("all encoders must share one input side");

  const auto set = load_labeled(a.labels, a.data, side);
  std::vector<eval::NamedEncoder> inits;
  for (std::size_t i = 0; i < models.size(); ++i) inits.push_back({names[i], &models[i]});
  const auto rows = eval::sweep(inits, set, cfg.eval_percents, protocol);

  const fs::path out(a.out);
  fs::create_directories(out);
  eval::write_results_csv(rows, out / "results.csv");
  write_resolved_into(cfg, out);
  for (const auto& r : rows)
    if (r.run == "mean") std::cout << r.init << " " << r.percent << "% " << r.metric_name << " " << r.value << "\n";
  return kExitOk;
}

// ---- features ----

struct FeaturesArgs {
  std::string checkpoint;
  bool random = false;
  std::string list;
  std::string root;
  std::string out;
};

int cmd_features(const Globals& g, const FeaturesArgs& a) {
  auto cfg = load_config(g);
  const model::Model m = a.checkpoint.empty()
                             ? model::Model::init(cfg.pretrain.encoder, cfg.pretrain.projection, cfg.seed)
                             : model::load_checkpoint(a.checkpoint);
  const int side = m.encoder_config().input_side;
  const fs::path list(a.list);
  std::vector<RgbImage> images;
  if (list.extension() == ".csv") {
    const fs::path root = a.root.empty() ? list.parent_path() : fs::path(a.root);
    images = load_labeled(list, root, side).images;
  } else {
    const fs::path root = a.root.empty() ? list.parent_path() : fs::path(a.root);
    images = train::load_images(data::read_entry_list(list), side, root);
  }
  const auto features = encode_features(m, images);
  save_features(features, a.out);
  write_resolved_into(cfg, fs::path(a.out).parent_path());
  std::cout << features.rows << " x " << features.cols << " -> " << a.out << "\n";
  return kExitOk;
}

// ---- cluster ----

struct ClusterArgs {
  std::string features;
  std::optional<int> k;
  std::vector<int> elbow;
  std::optional<int> batch;
  std::optional<int> iters;
  std::string out;
};

int cmd_cluster(const Globals& g, const ClusterArgs& a) {
  auto cfg = load_config(g);
  if (a.k) cfg.cluster.k = *a.k;
  if (a.batch) cfg.cluster.batch = *a.batch;
  if (a.iters) cfg.cluster.iters = *a.iters;
  if (!a.elbow.empty()) cfg.elbow_ks = a.elbow;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto features = load_features(a.features);
  const fs::path out(a.out);
  fs::create_directories(out);
  if (!a.elbow.empty()) {
    if (!std::is_sorted(a.elbow.begin(), a.elbow.end())) throw UsageError("--elbow values must be ascending");
    const auto rows = cluster::elbow_scan(features, a.elbow, cfg.cluster);
    write_text(out / "elbow.csv", cluster::format_elbow_csv(rows));
    for (const auto& r : rows) std::cout << "k=" << r.k << " explained_variance=" << r.explained_variance << "\n";
  } else {
    if (cfg.cluster.k > features.rows) throw UsageError("k exceeds the number of feature rows");
    const auto model = cluster::minibatch_kmeans(features, cfg.cluster);
    cluster::write_assignments(model, out / "assignments.csv");
    cluster::save_centroids(model, out / "centroids.sslh");
    std::cout << "k=" << model.k << " inertia=" << model.inertia
              << " explained_variance=" << cluster::explained_variance(features, model) << "\n";
  }
  write_resolved_into(cfg, out);
  return kExitOk;
}

// ---- report ----

int cmd_report(const Globals&, const std::string& results, const std::string& out) {
  const auto rows = eval::read_results_csv(results);
  write_text(out, eval::render_sweep_svg(rows));
  std::cout << rows.size() << " rows -> " << out << "\n";
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(const std::string& mode, bool corrupt) {
  tg::SuiteResult result;
  if (mode == "ops") {
    result = tg::check_ops(1e-6, corrupt);
  } else {
    result = tg::check_pipeline(1e-5);
    if (corrupt) {
      auto extra = tg::check_ops(1e-6, true);
      result.cases.push_back(extra.cases.back());
    }
  }
  for (const auto& c : result.cases) {
    std::printf("%-32s %-4s max_rel_error=%.3g (tol %.0e)\n", c.name.c_str(), c.report.passed ? "ok" : "FAIL",
                c.report.max_rel_error(), c.report.tolerance);
  }
  return result.passed() ? kExitOk : kExitRuntime;
}

// ---- synth ----

struct SynthArgs {
  int count = 2000;
  std::string out;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  auto cfg = load_config(g);
  if (a.count < 1) throw UsageError("--count must be positive");
  const auto set = synth::generate_textures(a.count, synth::TextureOptions{}, cfg.seed);
  const fs::path out(a.out);
  data::DatasetManifest ds;
  ds.dataset_id = "synthetic_textures";
  std::string labels = "path,label\n";
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.png", i);
    const std::string rel = std::string("images/") + name;
    write_png(out / rel, set.images[i]);
    ds.entries.push_back({rel, "img_" + std::to_string(i), 0, 0});
    labels += rel + "," + std::to_string(set.labels[i]) + "\n";
  }
  write_text(out / "labels.csv", labels);
  data::write_manifest(out / "synthetic.manifest.jsonl", {ds});
  write_resolved_into(cfg, out);
  std::cout << set.images.size() << " images -> " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (env && *env) {
    const std::string s(env);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      if (s.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || pos == 0) throw ConfigError("CONTRASTIVE_PATH_SEED must be a non-negative integer, got '" + s + "'");
    return v;
  }
  return config_seed;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Contrastive self-supervised pretraining and evaluation for histology patches", "cpath"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed (overrides CONTRASTIVE_PATH_SEED and the config)");
  app.add_option("--workers", g.workers, "worker threads; never changes results")->check(CLI::Range(1, 256));
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  TileArgs tile;
  auto* c_tile = app.add_subcommand("tile", "cut source images into foreground patches");
  c_tile->add_option("--input", tile.input, "directory of source images")->required()->check(CLI::ExistingDirectory);
  c_tile->add_option("--out", tile.out, "output directory")->required();
  c_tile->add_option("--side", tile.side, "patch side")->check(CLI::Range(1, 1 << 16));
  c_tile->add_option("--stride", tile.stride, "grid stride")->check(CLI::Range(1, 1 << 16));
  c_tile->add_option("--min-fg", tile.min_fg, "minimum foreground fraction")->check(CLI::Range(0.0, 1.0));
  c_tile->add_option("--dataset", tile.dataset, "dataset id (default: input directory name)");
  c_tile->add_option("--organ", tile.organ);
  c_tile->add_option("--stain", tile.stain);
  c_tile->add_option("--resolution", tile.resolution)->check(CLI::IsMember({"10x", "20x", "40x", "unknown"}));

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "draw a pretraining list from dataset manifests");
  c_sample->add_option("--manifests", sample.manifests, "manifest files")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--percent", sample.percent, "percentage of each dataset");
  c_sample->add_option("--cap", sample.cap, "maximum patches per whole-slide source");
  c_sample->add_option("--min", sample.min, "per-dataset minimum");
  c_sample->add_option("--max", sample.max, "per-dataset maximum");
  c_sample->add_option("--filter-organ", sample.organs);
  c_sample->add_option("--filter-resolution", sample.resolutions)
      ->check(CLI::IsMember({"10x", "20x", "40x", "unknown"}));
  c_sample->add_option("--filter-stain", sample.stains);
  c_sample->add_option("--out", sample.out, "training list (JSON lines)")->required();

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "contrastive pretraining");
  c_pre->add_option("--list", pre.list, "training list from `sample`")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "output directory")->required();
  c_pre->add_option("--epochs", pre.epochs, "override pretrain.epochs")->check(CLI::PositiveNumber);
  c_pre->add_option("--inject-nan-at", pre.inject_nan_at)->group("");

  EvalArgs probe, ft;
  auto add_eval = [&](const char* name, const char* help, EvalArgs& a) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--checkpoint", a.checkpoints, "encoder checkpoint(s)")->check(CLI::ExistingFile);
    c->add_flag("--random", a.random, "also evaluate a randomly initialized encoder");
    c->add_option("--data", a.data, "root directory of the labeled images")->required()->check(CLI::ExistingDirectory);
    c->add_option("--labels", a.labels, "CSV with header path,label or path,value")->required()->check(CLI::ExistingFile);
    c->add_option("--percent", a.percents, "label percentages (default from config)");
    c->add_option("--repeats", a.repeats)->check(CLI::PositiveNumber);
    c->add_option("--epochs", a.epochs)->check(CLI::NonNegativeNumber);
    c->add_option("--out", a.out, "output directory")->required();
    return c;
  };
  auto* c_probe = add_eval("probe", "linear probe on frozen features", probe);
  auto* c_ft = add_eval("finetune", "fine-tune encoder and head", ft);

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "encode images into a feature file");
  auto* feat_ckpt = c_feat->add_option("--checkpoint", feat.checkpoint)->check(CLI::ExistingFile);
  c_feat->add_flag("--random", feat.random, "use a randomly initialized encoder")->excludes(feat_ckpt);
  c_feat->add_option("--list", feat.list, "training list (.jsonl) or labels CSV")->required()->check(CLI::ExistingFile);
  c_feat->add_option("--root", feat.root, "base directory for relative paths (default: list directory)");
  c_feat->add_option("--out", feat.out, "feature file")->required();

  ClusterArgs clu;
  auto* c_clu = app.add_subcommand("cluster", "mini-batch k-means on features");
  c_clu->add_option("--features", clu.features)->required()->check(CLI::ExistingFile);
  auto* k_opt = c_clu->add_option("--k", clu.k)->check(CLI::PositiveNumber);
  c_clu->add_option("--elbow", clu.elbow, "ascending list of k values")->delimiter(',')->excludes(k_opt);
  c_clu->add_option("--batch", clu.batch)->check(CLI::PositiveNumber);
  c_clu->add_option("--iters", clu.iters)->check(CLI::PositiveNumber);
  c_clu->add_option("--out", clu.out, "output directory")->required();

  std::string results, svg;
  auto* c_rep = app.add_subcommand("report", "plot a results CSV");
  c_rep->add_option("--results", results)->required()->check(CLI::ExistingFile);
  c_rep->add_option("--out", svg, "SVG file")->required();

  std::string gc_mode = "ops";
  bool corrupt = false;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  c_gc->add_option("--mode", gc_mode)->check(CLI::IsMember({"ops", "full"}));
  c_gc->add_flag("--corrupt-op", corrupt)->group("");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "generate the two-family synthetic texture set");
  c_syn->add_option("--count", syn.count);
  c_syn->add_option("--out", syn.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  auto logger = spdlog::get("cpath");
  if (!logger) logger = spdlog::stderr_color_mt("cpath");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  set_num_threads(g.workers);

  try {
    if (c_tile->parsed()) return cmd_tile(g, tile);
    if (c_sample->parsed()) return cmd_sample(g, sample);
    if (c_pre->parsed()) return cmd_pretrain(g, pre);
    if (c_probe->parsed()) return cmd_eval(g, probe, eval::Mode::linear_probe);
    if (c_ft->parsed()) return cmd_eval(g, ft, eval::Mode::fine_tune);
    if (c_feat->parsed()) return cmd_features(g, feat);
    if (c_clu->parsed()) return cmd_cluster(g, clu);
    if (c_rep->parsed()) return cmd_report(g, results, svg);
    if (c_gc->parsed()) return cmd_gradcheck(gc_mode, corrupt);
    if (c_syn->parsed()) return cmd_synth(g, syn);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("cpath");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cpath::cli
