#include "dtm/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace dtm {

namespace {

class LineError : public ConfigError {
 public:
  LineError(int line, const std::string& msg) : ConfigError("line " + std::to_string(line) + ": " + msg) {}
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

/// Drops a trailing # comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && in_str) {
      ++i;
    } else if (s[i] == '"') {
      in_str = !in_str;
    } else if (s[i] == '#' && !in_str) {
      return s.substr(0, i);
    }
  }
  return s;
}

class ValueParser {
 public:
  ValueParser(std::string_view s, int line) : s_(s), line_(line) {}

  nlohmann::json parse() {
    auto v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw LineError(line_, msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  nlohmann::json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    return scalar();
  }

  nlohmann::json string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    ++pos_;
    nlohmann::json arr = nlohmann::json::array();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    while (true) {
      auto v = value();
      if (v.is_array()) fail("nested arrays are not supported");
      arr.push_back(std::move(v));
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return arr;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end])))
      ++end;
    std::string tok(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok)
      if (c != '_') digits.push_back(c);
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                          digits == "+inf" || digits == "-inf" || digits == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = digits.data() + (digits.size() > 0 && digits[0] == '+' ? 1 : 0);
      const auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc() && p == digits.data() + digits.size()) return v;
      fail("cannot parse value '" + tok + "'");
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(digits, &used);
      if (used != digits.size()) fail("cannot parse value '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("cannot parse value '" + tok + "'");
    }
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

/// Reads typed values from one section and remembers which keys were used.
class Section {
 public:
  Section(const nlohmann::json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      node_ = &root.at(name);
      if (!node_->is_object()) throw ConfigError("[" + name + "] must be a table");
    }
  }

  const nlohmann::json* find(const std::string& key) {
    used_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const auto* v = find(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) bad(key, "a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) bad(key, "a string");
      out = v->get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) bad(key, "a number");
      out = v->get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) bad(key, "a non-negative integer");
      out = static_cast<T>(v->get<std::int64_t>());
    } else {
      if (!v->is_number_integer()) bad(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) bad(key, "an integer in range");
      out = static_cast<T>(x);
    }
  }

  void read_list(const std::string& key, std::vector<double>& out) {
    const auto* v = find(key);
    if (!v) return;
    if (v->is_number()) {
      out = {v->get<double>()};
      return;
    }
    if (!v->is_array()) bad(key, "a number or array of numbers");
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number()) bad(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  /// Rejects keys that were never read, except nested tables named in `children`.
  void finish(const std::set<std::string>& children = {}) const {
    if (!node_) return;
    for (const auto& [k, v] : node_->items())
      if (!used_.count(k) && !children.count(k)) throw ConfigError("unknown key '" + k + "' in [" + name_ + "]");
  }

  const nlohmann::json* node() const { return node_; }

 private:
  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    throw ConfigError("[" + name_ + "] " + key + " must be " + what);
  }

  std::string name_;
  const nlohmann::json* node_ = nullptr;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* current = &root;
  std::set<std::string> seen_tables;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view raw = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw LineError(line_no, "malformed table header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!seen_tables.insert(name).second) throw LineError(line_no, "duplicate table [" + name + "]");
      current = &root;
      std::size_t p = 0;
      while (true) {
        const auto dot = name.find('.', p);
        const std::string part = name.substr(p, dot == std::string::npos ? std::string::npos : dot - p);
        if (!bare_key(part)) throw LineError(line_no, "invalid table name '" + name + "'");
        if (!current->contains(part)) (*current)[part] = nlohmann::json::object();
        current = &(*current)[part];
        if (!current->is_object()) throw LineError(line_no, "'" + part + "' is already a value");
        if (dot == std::string::npos) break;
        p = dot + 1;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw LineError(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (!bare_key(key)) throw LineError(line_no, "invalid key '" + key + "'");
    if (current->contains(key)) throw LineError(line_no, "duplicate key '" + key + "'");
    (*current)[key] = ValueParser(trim(line.substr(eq + 1)), line_no).parse();
  }
  return root;
}

nlohmann::json read_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_toml(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

NoiseSchedule ScheduleSection::build() const {
  if (mebm) return mebm_schedule();
  if (grid == "uniform") return NoiseSchedule::uniform(steps, kappa_pixel, kappa_label, dt);
  if (grid == "geometric") return NoiseSchedule::geometric(steps, kappa_pixel, kappa_label, dt, ratio);
  throw ConfigError("[schedule] grid must be 'uniform' or 'geometric', got '" + grid + "'");
}

void RunConfig::validate() const {
  require(graph.side >= 2, "[graph] side must be >= 2");
  try {
    build_pattern(graph.pattern);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[graph] pattern: ") + e.what());
  }
  require(graph.n_visible >= 1, "[graph] n_visible must be >= 1");
  require(graph.n_labels >= 0, "[graph] n_labels must be >= 0");
  require(graph.n_visible + graph.n_labels <= graph.side * graph.side, "[graph] n_visible + n_labels exceeds side^2 nodes");
  require(schedule.steps >= 1 || schedule.mebm, "[schedule] steps must be >= 1");
  require(schedule.kappa_pixel > 0 && schedule.kappa_label > 0, "[schedule] kappa values must be > 0");
  require(schedule.dt > 0 && schedule.ratio > 0, "[schedule] dt and ratio must be > 0");
  try {
    schedule.build().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[schedule] ") + e.what());
  }
  require(data.source == "synthetic" || data.source == "idx", "[data] source must be 'synthetic' or 'idx'");
  require(data.threshold >= 0 && data.threshold <= 255, "[data] threshold must lie in 0..255");
  require(data.bits_per_pixel >= 1, "[data] bits_per_pixel must be >= 1");
  require(data.label_classes >= 1 && data.repetitions >= 1, "[data] label_classes and repetitions must be >= 1");
  require(data.limit >= 0, "[data] limit must be >= 0");
  if (data.source == "synthetic") {
    require(data.bits >= 1 && data.modes >= 1 && data.n >= 1, "[data] bits, modes and n must be >= 1");
    require(data.flip >= 0 && data.flip < 0.5, "[data] flip must lie in [0, 0.5)");
    require(!data.conditional, "[data] conditional training needs an idx source with labels");
  } else {
    require(!data.images.empty(), "[data] images path is required for idx sources");
    require(!data.conditional || !data.labels.empty(), "[data] conditional=true requires a labels path");
  }
  const int label_cols = data.conditional ? data.label_classes * data.repetitions : 0;
  require(graph.n_labels == label_cols, "[graph] n_labels (" + std::to_string(graph.n_labels) +
                                            ") must equal label_classes x repetitions (" +
                                            std::to_string(label_cols) + ") when conditional, else 0");
  try {
    train.validate(schedule.mebm ? 1 : schedule.steps);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }
  require(sample.k_mix >= 1 && sample.n_samples >= 1, "[sample] k_mix and n_samples must be >= 1");
  require(init_scale >= 0, "init_scale must be >= 0");
  try {
    energy.params.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[energy] ") + e.what());
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kSections{"graph", "schedule", "data", "train", "sample", "energy", "init_scale"};
  for (const auto& [k, v] : j.items())
    if (!kSections.count(k)) throw ConfigError("unknown section [" + k + "]");
  RunConfig c;
  if (j.contains("init_scale")) {
    if (!j.at("init_scale").is_number()) throw ConfigError("init_scale must be a number");
    c.init_scale = j.at("init_scale").get<double>();
  }

  Section g(j, "graph");
  g.read("side", c.graph.side);
  g.read("pattern", c.graph.pattern);
  g.read("n_visible", c.graph.n_visible);
  g.read("n_labels", c.graph.n_labels);
  g.read("seed", c.graph.seed);
  g.finish();

  Section s(j, "schedule");
  s.read("steps", c.schedule.steps);
  s.read("kappa_pixel", c.schedule.kappa_pixel);
  s.read("kappa_label", c.schedule.kappa_label);
  s.read("grid", c.schedule.grid);
  s.read("dt", c.schedule.dt);
  s.read("ratio", c.schedule.ratio);
  s.read("mebm", c.schedule.mebm);
  s.finish();

  Section d(j, "data");
  d.read("source", c.data.source);
  d.read("images", c.data.images);
  d.read("labels", c.data.labels);
  d.read("threshold", c.data.threshold);
  d.read("bits_per_pixel", c.data.bits_per_pixel);
  d.read("conditional", c.data.conditional);
  d.read("label_classes", c.data.label_classes);
  d.read("repetitions", c.data.repetitions);
  d.read("limit", c.data.limit);
  d.read("bits", c.data.bits);
  d.read("modes", c.data.modes);
  d.read("flip", c.data.flip);
  d.read("n", c.data.n);
  d.read("seed", c.data.seed);
  d.finish();

  Section t(j, "train");
  auto& tc = c.train;
  t.read("epochs", tc.epochs);
  t.read("batch_size", tc.batch_size);
  t.read("learning_rate", tc.learning_rate);
  std::string opt = "sgd";
  t.read("optimizer", opt);
  if (opt == "sgd")
    tc.optimizer = Optimizer::sgd;
  else if (opt == "adam")
    tc.optimizer = Optimizer::adam;
  else
    throw ConfigError("[train] optimizer must be 'sgd' or 'adam', got '" + opt + "'");
  t.read("adam_beta1", tc.adam_beta1);
  t.read("adam_beta2", tc.adam_beta2);
  t.read("adam_eps", tc.adam_eps);
  t.read("k_grad", tc.k_grad);
  t.read("burn_in", tc.burn_in);
  t.read("replicas", tc.replicas);
  t.read_list("lambda_init", tc.lambda_init);
  t.read("persistent", tc.persistent);
  t.read("seed", tc.seed);
  t.finish({"acp"});
  if (t.node() && t.node()->contains("acp")) {
    Section a(*t.node(), "acp");
    a.read("enabled", tc.acp.enabled);
    a.read("epsilon", tc.acp.epsilon);
    a.read("delta", tc.acp.delta);
    a.read("lambda_min", tc.acp.lambda_min);
    a.read("probe_interval", tc.acp.probe_interval);
    a.read("probe_conditions", tc.acp.probe_conditions);
    a.read("probe_chains", tc.acp.probe_chains);
    a.read("probe_span", tc.acp.probe_span);
    a.finish();
  }

  Section sm(j, "sample");
  sm.read("k_mix", c.sample.k_mix);
  sm.read("n_samples", c.sample.n_samples);
  sm.read("seed", c.sample.seed);
  sm.finish();

  Section e(j, "energy");
  std::string preset;
  e.read("scenario", preset);
  if (!preset.empty()) c.energy = energy_scenario(preset);
  auto& p = c.energy.params;
  e.read("e_rng", p.e_rng);
  e.read("tau_ratio", p.tau_ratio);
  e.read("c_bias", p.c_bias);
  e.read("v_dd", p.v_dd);
  e.read("duty_gamma", p.duty_gamma);
  e.read("eta", p.eta);
  e.read("cell_side", p.cell_side);
  e.read("v_thermal", p.v_thermal);
  e.read("v_sig_mult", p.v_sig_mult);
  e.read("v_clk_mult", p.v_clk_mult);
  auto& ctx = c.energy.context;
  e.read("T", ctx.steps);
  e.read("K", ctx.sweeps);
  e.read("N", ctx.nodes);
  e.read("N_data", ctx.data_nodes);
  e.read("L", ctx.side);
  std::string pattern = ctx.pattern.name;
  e.read("pattern", pattern);
  try {
    ctx.pattern = build_pattern(pattern);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("[energy] pattern: ") + ex.what());
  }
  e.finish();

  c.validate();
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  const auto& p = c.energy.params;
  const auto& ctx = c.energy.context;
  return {{"init_scale", c.init_scale},
          {"graph",
           {{"side", c.graph.side},
            {"pattern", c.graph.pattern},
            {"n_visible", c.graph.n_visible},
            {"n_labels", c.graph.n_labels},
            {"seed", c.graph.seed}}},
          {"schedule",
           {{"steps", c.schedule.steps},
            {"kappa_pixel", c.schedule.kappa_pixel},
            {"kappa_label", c.schedule.kappa_label},
            {"grid", c.schedule.grid},
            {"dt", c.schedule.dt},
            {"ratio", c.schedule.ratio},
            {"mebm", c.schedule.mebm}}},
          {"data",
           {{"source", c.data.source},
            {"images", c.data.images},
            {"labels", c.data.labels},
            {"threshold", c.data.threshold},
            {"bits_per_pixel", c.data.bits_per_pixel},
            {"conditional", c.data.conditional},
            {"label_classes", c.data.label_classes},
            {"repetitions", c.data.repetitions},
            {"limit", c.data.limit},
            {"bits", c.data.bits},
            {"modes", c.data.modes},
            {"flip", c.data.flip},
            {"n", c.data.n},
            {"seed", c.data.seed}}},
          {"train", train_config_to_json(c.train)},
          {"sample", {{"k_mix", c.sample.k_mix}, {"n_samples", c.sample.n_samples}, {"seed", c.sample.seed}}},
          {"energy",
           {{"e_rng", p.e_rng},
            {"tau_ratio", p.tau_ratio},
            {"c_bias", p.c_bias},
            {"v_dd", p.v_dd},
            {"duty_gamma", p.duty_gamma},
            {"eta", p.eta},
            {"cell_side", p.cell_side},
            {"v_thermal", p.v_thermal},
            {"v_sig_mult", p.v_sig_mult},
            {"v_clk_mult", p.v_clk_mult},
            {"T", ctx.steps},
            {"K", ctx.sweeps},
            {"N", ctx.nodes},
            {"N_data", ctx.data_nodes},
            {"L", ctx.side},
            {"pattern", ctx.pattern.name}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto tree = read_toml(path);
  try {
    return run_config_from_json(tree);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

EnergySection energy_scenario(const std::string& name) {
  if (name == "reference") return EnergySection{};
  throw ConfigError("unknown energy scenario '" + name + "' (known: reference)");
}

}  // namespace dtm
