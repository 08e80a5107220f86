#include "cpath/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cpath/errors.hpp"

namespace cpath::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Removes a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

Value::Scalar parse_scalar(const std::string& raw, const std::string& where) {
  const std::string t = trim(raw);
  if (t.empty()) throw ParseError(where + ": missing value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') throw ParseError(where + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      if (t[i] == '\\' && i + 2 < t.size()) {
        const char e = t[++i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else if (t[i] == '"') {
        throw ParseError(where + ": unexpected quote inside string");
      } else {
        out += t[i];
      }
    }
    return out;
  }
  if (t == "true") return true;
  if (t == "false") return false;
  std::string num;
  for (char c : t)
    if (c != '_') num += c;
  const bool is_float = num.find_first_of(".eE") != std::string::npos || num == "inf" || num == "nan";
  std::size_t pos = 0;
  try {
    if (is_float) {
      const double v = std::stod(num, &pos);
      if (pos == num.size()) return v;
    } else {
      const long long v = std::stoll(num, &pos);
      if (pos == num.size()) return static_cast<std::int64_t>(v);
    }
  } catch (const std::exception&) {
  }
  throw ParseError(where + ": cannot parse value '" + t + "'");
}

std::vector<std::string> split_array(const std::string& body, const std::string& where) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_string) throw ParseError(where + ": unterminated string in array");
  if (!trim(cur).empty()) items.push_back(cur);
  for (const auto& it : items)
    if (trim(it).empty()) throw ParseError(where + ": empty array element");
  return items;
}

std::string type_name(const Value::Scalar& s) {
  switch (s.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    default: return "boolean";
  }
}

// Typed accessors over one section, tracking which keys were consumed.
class Section {
 public:
  Section(const Document& doc, const std::string& name) : name_(name) {
    auto it = doc.find(name);
    if (it != doc.end()) values_ = &it->second;
  }

  ~Section() = default;

  void finish() const {
    if (!values_) return;
    for (const auto& [key, v] : *values_) {
      if (!used_.count(key)) {
        throw ConfigError("line " + std::to_string(v.line) + ": unknown key '" + qualified(key) + "'");
      }
    }
  }

  const Value* find(const std::string& key) {
    used_.insert(key);
    if (!values_) return nullptr;
    auto it = values_->find(key);
    return it == values_->end() ? nullptr : &it->second;
  }

  void get(const std::string& key, double& out) {
    if (auto* v = find(key)) out = number(*v, key);
  }
  void get(const std::string& key, int& out) {
    if (auto* v = find(key)) out = static_cast<int>(integer(*v, key));
  }
  void get(const std::string& key, std::int64_t& out) {
    if (auto* v = find(key)) out = integer(*v, key);
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      const auto i = integer(*v, key);
      if (i < 0) throw ConfigError(where(*v, key) + " must be non-negative");
      out = static_cast<std::uint64_t>(i);
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto* v = find(key)) {
      scalar_only(*v, key);
      if (!std::holds_alternative<bool>(v->scalar)) throw ConfigError(where(*v, key) + " must be a boolean");
      out = std::get<bool>(v->scalar);
    }
  }
  void get(const std::string& key, std::string& out) {
    if (auto* v = find(key)) out = string(*v, key);
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (auto* v = find(key)) out = number(*v, key);
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (auto* v = find(key)) {
      out.clear();
      for (const auto& s : array(*v, key)) out.push_back(number_of(s, *v, key));
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (auto* v = find(key)) {
      out.clear();
      for (const auto& s : array(*v, key)) {
        if (!std::holds_alternative<std::int64_t>(s)) throw ConfigError(where(*v, key) + " must hold integers");
        out.push_back(static_cast<int>(std::get<std::int64_t>(s)));
      }
    }
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    if (auto* v = find(key)) {
      out.clear();
      for (const auto& s : array(*v, key)) {
        if (!std::holds_alternative<std::string>(s)) throw ConfigError(where(*v, key) + " must hold strings");
        out.push_back(std::get<std::string>(s));
      }
    }
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  std::string where(const Value& v, const std::string& key) const {
    return "line " + std::to_string(v.line) + ": '" + qualified(key) + "'";
  }
  void scalar_only(const Value& v, const std::string& key) const {
    if (v.array) throw ConfigError(where(v, key) + " must be a single value, not an array");
  }
  const std::vector<Value::Scalar>& array(const Value& v, const std::string& key) const {
    if (!v.array) throw ConfigError(where(v, key) + " must be an array");
    return *v.array;
  }
  double number_of(const Value::Scalar& s, const Value& v, const std::string& key) const {
    if (std::holds_alternative<double>(s)) return std::get<double>(s);
    if (std::holds_alternative<std::int64_t>(s)) return static_cast<double>(std::get<std::int64_t>(s));
    throw ConfigError(where(v, key) + " must be a number, got " + type_name(s));
  }
  double number(const Value& v, const std::string& key) const {
    scalar_only(v, key);
    return number_of(v.scalar, v, key);
  }
  std::int64_t integer(const Value& v, const std::string& key) const {
    scalar_only(v, key);
    if (!std::holds_alternative<std::int64_t>(v.scalar)) {
      throw ConfigError(where(v, key) + " must be an integer, got " + type_name(v.scalar));
    }
    return std::get<std::int64_t>(v.scalar);
  }
  std::string string(const Value& v, const std::string& key) const {
    scalar_only(v, key);
    if (!std::holds_alternative<std::string>(v.scalar)) {
      throw ConfigError(where(v, key) + " must be a string, got " + type_name(v.scalar));
    }
    return std::get<std::string>(v.scalar);
  }

  std::string name_;
  const std::map<std::string, Value>* values_ = nullptr;
  std::set<std::string> used_;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename T, typename F>
std::string list(const T& items, F&& fmt) {
  std::string out = "[";
  bool first = true;
  for (const auto& it : items) {
    if (!first) out += ", ";
    out += fmt(it);
    first = false;
  }
  return out + "]";
}

}  // namespace

Document parse_toml(const std::string& text) {
  Document doc;
  doc[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ParseError(where + ": invalid section name '" + section + "'");
      if (doc.count(section) && section != "") throw ParseError(where + ": duplicate section [" + section + "]");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError(where + ": invalid key '" + key + "'");
    const std::string rhs = trim(line.substr(eq + 1));
    Value v;
    v.line = line_no;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') throw ParseError(where + ": unterminated array");
      v.array.emplace();
      for (const auto& item : split_array(rhs.substr(1, rhs.size() - 2), where))
        v.array->push_back(parse_scalar(item, where));
    } else {
      v.scalar = parse_scalar(rhs, where);
    }
    auto& sec = doc[section];
    if (sec.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    sec.emplace(key, std::move(v));
  }
  return doc;
}

void RunConfig::propagate_seed() {
  pretrain.seed = seed;
  sampling.seed = seed;
  eval.seed = seed;
  cluster.seed = seed;
}

void RunConfig::validate() const {
  if (profile != "desk" && profile != "paper") throw ConfigError("profile must be 'desk' or 'paper'");
  pretrain.validate();
  sampling.validate();
  eval.validate();
  cluster.validate();
  if (eval_percents.empty()) throw ConfigError("eval.percents must not be empty");
  for (double p : eval_percents)
    if (!(p > 0.0 && p <= 100.0)) throw ConfigError("eval.percents entries must lie in (0, 100]");
}

RunConfig from_document(const Document& doc) {
  static const std::set<std::string> known{"", "data", "augment", "optim", "pretrain", "eval", "cluster"};
  for (const auto& [name, values] : doc) {
    if (!known.count(name)) {
      const int line = values.empty() ? 0 : values.begin()->second.line;
      throw ConfigError("unknown section [" + name + "]" + (line ? " near line " + std::to_string(line) : ""));
    }
  }
  RunConfig c;
  Section top(doc, "");
  top.get("seed", c.seed);
  top.finish();

  Section pre(doc, "pretrain");
  pre.get("profile", c.profile);
  if (c.profile == "paper") {
    c.pretrain = train::PretrainConfig::paper();
  } else if (c.profile != "desk") {
    throw ConfigError("pretrain.profile must be 'desk' or 'paper', got '" + c.profile + "'");
  }
  auto& p = c.pretrain;
  pre.get("batch_size", p.batch_size);
  pre.get("temperature", p.temperature);
  pre.get("epochs", p.epochs);
  pre.get("checkpoint_every", p.checkpoint_every);
  pre.get("workers", p.workers);
  pre.get("queue_depth", p.queue_depth);
  pre.get("input_side", p.encoder.input_side);
  pre.get("stage_channels", p.encoder.stage_channels);
  pre.get("blocks_per_stage", p.encoder.blocks_per_stage);
  pre.get("residual", p.encoder.residual);
  pre.get("hidden_dim", p.projection.hidden_dim);
  pre.get("out_dim", p.projection.out_dim);
  pre.finish();

  Section opt(doc, "optim");
  std::string kind = optim::to_string(p.optimizer.kind);
  opt.get("kind", kind);
  p.optimizer.kind = optim::parse_optim_kind(kind);
  std::optional<double> lr;
  opt.get("lr", lr);
  p.optimizer.base_lr = lr ? *lr : optim::lr_for(p.optimizer.kind, p.batch_size);
  opt.get("weight_decay", p.optimizer.weight_decay);
  opt.get("beta1", p.optimizer.beta1);
  opt.get("beta2", p.optimizer.beta2);
  opt.get("eps", p.optimizer.eps);
  opt.get("momentum", p.optimizer.momentum);
  opt.get("trust_coefficient", p.optimizer.trust_coefficient);
  opt.get("trust_clip", p.optimizer.trust_clip);
  opt.finish();

  Section aug(doc, "augment");
  auto& a = p.augment;
  aug.get("random_crop", a.random_crop);
  aug.get("crop_min_area", a.crop_min_area);
  aug.get("crop_max_area", a.crop_max_area);
  aug.get("aspect_min", a.aspect_min);
  aug.get("aspect_max", a.aspect_max);
  aug.get("rotate", a.rotate);
  aug.get("flip_prob", a.flip_prob);
  std::string jitter = augment::to_string(a.jitter);
  aug.get("jitter", jitter);
  a.jitter = augment::parse_jitter_preset(jitter);
  aug.get("blur_prob", a.blur_prob);
  aug.get("blur_sigma_min", a.blur_sigma_min);
  aug.get("blur_sigma_max", a.blur_sigma_max);
  aug.get("blur_kernel_fraction", a.blur_kernel_fraction);
  aug.finish();

  Section dat(doc, "data");
  auto& s = c.sampling;
  dat.get("percent", s.percent);
  dat.get("per_wsi_cap", s.per_wsi_cap);
  dat.get("per_dataset_min", s.per_dataset_min);
  dat.get("per_dataset_max", s.per_dataset_max);
  std::vector<std::string> organs, resolutions, stains;
  dat.get("organs", organs);
  dat.get("resolutions", resolutions);
  dat.get("stains", stains);
  s.filters.organs = {organs.begin(), organs.end()};
  s.filters.stains = {stains.begin(), stains.end()};
  for (const auto& r : resolutions) s.filters.resolutions.insert(parse_resolution(r));
  dat.finish();

  Section ev(doc, "eval");
  auto& e = c.eval;
  std::string mode = eval::to_string(e.mode);
  ev.get("mode", mode);
  e.mode = eval::parse_mode(mode);
  ev.get("label_percent", e.label_percent);
  ev.get("percents", c.eval_percents);
  ev.get("repeats", e.repeats);
  ev.get("epochs", e.epochs);
  ev.get("batch_size", e.batch_size);
  ev.get("lr", e.lr);
  ev.get("weight_decay", e.weight_decay);
  ev.get("standardize", e.standardize);
  ev.get("cache_features", e.cache_features);
  ev.get("resample_split", e.resample_split);
  ev.finish();

  Section cl(doc, "cluster");
  cl.get("k", c.cluster.k);
  cl.get("batch", c.cluster.batch);
  cl.get("iters", c.cluster.iters);
  cl.get("ks", c.elbow_ks);
  cl.finish();

  c.propagate_seed();
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_document(parse_toml(ss.str()));
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_toml(const RunConfig& c, bool with_workers) {
  const auto& p = c.pretrain;
  const auto& o = p.optimizer;
  const auto& a = p.augment;
  const auto& s = c.sampling;
  const auto& e = c.eval;
  auto str = [](const std::string& v) { return quote(v); };
  auto integer = [](int v) { return std::to_string(v); };
  std::ostringstream out;
  out << "seed = " << c.seed << "\n\n";
  out << "[pretrain]\n"
      << "profile = " << quote(c.profile) << "\n"
      << "batch_size = " << p.batch_size << "\n"
      << "temperature = " << num(p.temperature) << "\n"
      << "epochs = " << p.epochs << "\n"
      << "checkpoint_every = " << p.checkpoint_every << "\n";
  if (with_workers) out << "workers = " << p.workers << "\n";
  out << "queue_depth = " << p.queue_depth << "\n"
      << "input_side = " << p.encoder.input_side << "\n"
      << "stage_channels = " << list(p.encoder.stage_channels, integer) << "\n"
      << "blocks_per_stage = " << p.encoder.blocks_per_stage << "\n"
      << "residual = " << (p.encoder.residual ? "true" : "false") << "\n"
      << "hidden_dim = " << p.projection.hidden_dim << "\n"
      << "out_dim = " << p.projection.out_dim << "\n\n";
  out << "[optim]\n"
      << "kind = " << quote(optim::to_string(o.kind)) << "\n"
      << "lr = " << num(o.base_lr) << "\n"
      << "weight_decay = " << num(o.weight_decay) << "\n"
      << "beta1 = " << num(o.beta1) << "\n"
      << "beta2 = " << num(o.beta2) << "\n"
      << "eps = " << num(o.eps) << "\n"
      << "momentum = " << num(o.momentum) << "\n"
      << "trust_coefficient = " << num(o.trust_coefficient) << "\n";
  if (o.trust_clip) out << "trust_clip = " << num(*o.trust_clip) << "\n";
  out << "\n[augment]\n"
      << "random_crop = " << (a.random_crop ? "true" : "false") << "\n"
      << "crop_min_area = " << num(a.crop_min_area) << "\n"
      << "crop_max_area = " << num(a.crop_max_area) << "\n"
      << "aspect_min = " << num(a.aspect_min) << "\n"
      << "aspect_max = " << num(a.aspect_max) << "\n"
      << "rotate = " << (a.rotate ? "true" : "false") << "\n"
      << "flip_prob = " << num(a.flip_prob) << "\n"
      << "jitter = " << quote(augment::to_string(a.jitter)) << "\n"
      << "blur_prob = " << num(a.blur_prob) << "\n"
      << "blur_sigma_min = " << num(a.blur_sigma_min) << "\n"
      << "blur_sigma_max = " << num(a.blur_sigma_max) << "\n"
      << "blur_kernel_fraction = " << num(a.blur_kernel_fraction) << "\n\n";
  std::vector<std::string> res;
  for (auto r : s.filters.resolutions) res.push_back(to_string(r));
  out << "[data]\n"
      << "percent = " << num(s.percent) << "\n"
      << "per_wsi_cap = " << s.per_wsi_cap << "\n"
      << "per_dataset_min = " << s.per_dataset_min << "\n"
      << "per_dataset_max = " << s.per_dataset_max << "\n"
      << "organs = " << list(s.filters.organs, str) << "\n"
      << "resolutions = " << list(res, str) << "\n"
      << "stains = " << list(s.filters.stains, str) << "\n\n";
  out << "[eval]\n"
      << "mode = " << quote(eval::to_string(e.mode)) << "\n"
      << "label_percent = " << num(e.label_percent) << "\n"
      << "percents = " << list(c.eval_percents, [](double v) { return num(v); }) << "\n"
      << "repeats = " << e.repeats << "\n"
      << "epochs = " << e.epochs << "\n"
      << "batch_size = " << e.batch_size << "\n"
      << "lr = " << num(e.learning_rate()) << "\n"
      << "weight_decay = " << num(e.weight_decay) << "\n"
      << "standardize = " << (e.standardize ? "true" : "false") << "\n"
      << "cache_features = " << (e.cache_features ? "true" : "false") << "\n"
      << "resample_split = " << (e.resample_split ? "true" : "false") << "\n\n";
  out << "[cluster]\n"
      << "k = " << c.cluster.k << "\n"
      << "batch = " << c.cluster.batch << "\n"
      << "iters = " << c.cluster.iters << "\n"
      << "ks = " << list(c.elbow_ks, integer) << "\n";
  return out.str();
}

void write_resolved(const RunConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_toml(cfg, false);
}

}  // namespace cpath::config
