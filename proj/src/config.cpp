#include "influence_gate/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace influence_gate {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(trim(part));
  return out;
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw ConfigError(key + ": '" + s + "' is not a number");
  return v;
}

long parse_long(const std::string& s, const std::string& key) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(key + ": '" + s + "' is not an integer");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& base_dir) {
  KeyValueConfig cfg;
  cfg.base_dir_ = base_dir;
  std::stringstream ss(text);
  int line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.entries_[key] = Entry{value, line_no};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path();
  return parse(buf.str(), dir.empty() ? "." : dir.string());
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

const KeyValueConfig::Entry& KeyValueConfig::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
  it->second.used = true;
  return it->second;
}

std::string KeyValueConfig::str(const std::string& key) const { return at(key).value; }
std::string KeyValueConfig::str(const std::string& key, const std::string& fallback) const {
  return has(key) ? str(key) : fallback;
}
double KeyValueConfig::num(const std::string& key) const { return parse_double(str(key), key); }
double KeyValueConfig::num(const std::string& key, double fallback) const {
  return has(key) ? num(key) : fallback;
}
long KeyValueConfig::integer(const std::string& key, long fallback) const {
  return has(key) ? parse_long(str(key), key) : fallback;
}
bool KeyValueConfig::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}
std::vector<double> KeyValueConfig::nums(const std::string& key) const {
  std::vector<double> out;
  for (const auto& w : split(str(key), ',')) out.push_back(parse_double(w, key));
  return out;
}
std::vector<std::string> KeyValueConfig::words(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& w : split(str(key), ','))
    if (!w.empty()) out.push_back(w);
  return out;
}

std::vector<std::string> KeyValueConfig::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!e.used) out.push_back(k + " (line " + std::to_string(e.line) + ")");
  return out;
}

namespace {

std::vector<int> one_based_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  for (const auto& w : split(text, ',')) {
    long v = parse_long(w, key);
    if (v < 1) throw ConfigError(key + ": case labels are 1-based");
    out.push_back(static_cast<int>(v - 1));
  }
  return out;
}

MeasureRequest parse_measure(const std::string& token) {
  // KL | Delta1:2 | Bdd:1@0.5
  MeasureRequest m;
  auto colon = token.find(':');
  m.measure = measure_from_string(token.substr(0, colon));
  if (colon != std::string::npos) {
    std::string rest = token.substr(colon + 1);
    auto at = rest.find('@');
    long c = parse_long(rest.substr(0, at), "estimate.measures");
    if (c < 1) throw ConfigError("estimate.measures: coordinates are 1-based");
    m.coordinate = static_cast<int>(c - 1);
    if (at != std::string::npos) m.threshold = parse_double(rest.substr(at + 1), "estimate.measures");
  }
  bool needs_coord = m.measure == Measure::Delta1 || m.measure == Measure::Delta2 ||
                     m.measure == Measure::Bdd;
  if (needs_coord && m.coordinate < 0)
    throw ConfigError("estimate.measures: " + token + " needs a coordinate, e.g. Delta1:2");
  return m;
}

}  // namespace

RunConfig run_config_from(const KeyValueConfig& kv) {
  RunConfig rc;
  std::string model = kv.str("model");
  if (model == "linear") rc.model = ModelKind::Linear;
  else if (model == "mm") rc.model = ModelKind::MM;
  else if (model == "logit") rc.model = ModelKind::Logit;
  else throw ConfigError("model must be linear, mm or logit; got '" + model + "'");

  // data
  std::filesystem::path p = kv.str("data.path");
  if (p.is_relative()) p = std::filesystem::path(kv.base_dir()) / p;
  rc.data_path = p.lexically_normal().string();
  rc.schema.kind = rc.model;
  if (rc.model == ModelKind::MM) {
    rc.schema.concentration = kv.str("data.concentration", "concentration");
    rc.schema.velocity = kv.str("data.velocity", "velocity");
  } else {
    rc.schema.response = kv.str("data.response");
    rc.schema.design = kv.has("data.design") ? kv.words("data.design") : std::vector<std::string>{};
    rc.schema.intercept = kv.flag("data.intercept", true);
    if (rc.schema.design.empty() && !rc.schema.intercept)
      throw ConfigError("data.design is empty and data.intercept is false");
  }

  // priors
  if (rc.model == ModelKind::Linear) {
    std::string t = kv.str("prior.type", "noninformative");
    if (t == "conjugate") {
      rc.linear_prior.conjugate = true;
      rc.linear_prior.alpha = kv.num("prior.alpha");
      rc.linear_prior.beta = kv.num("prior.beta");
      rc.linear_prior.theta_family = kv.str("prior.theta", "normal");
      if (rc.linear_prior.theta_family != "normal" && rc.linear_prior.theta_family != "t")
        throw ConfigError("prior.theta must be normal or t");
      if (kv.has("prior.theta.mean")) rc.linear_prior.theta_mean = kv.nums("prior.theta.mean");
      rc.linear_prior.theta_scale = kv.num("prior.theta.scale", 10);
      rc.linear_prior.theta_dof = kv.num("prior.theta.dof", 5);
      if (!(rc.linear_prior.alpha > 0) || !(rc.linear_prior.beta > 0))
        throw ConfigError("prior.alpha and prior.beta must be positive");
      if (!(rc.linear_prior.theta_scale > 0)) throw ConfigError("prior.theta.scale must be positive");
    } else if (t != "noninformative") {
      throw ConfigError("prior.type for the linear model must be noninformative or conjugate");
    }
  } else if (rc.model == ModelKind::MM) {
    rc.kappa_prior.dof = kv.num("prior.kappa.dof", 3);
    rc.kappa_prior.scale = kv.num("prior.kappa.scale", 1);
    if (!(rc.kappa_prior.dof > 0) || !(rc.kappa_prior.scale > 0))
      throw ConfigError("prior.kappa.dof and prior.kappa.scale must be positive");
  } else {
    auto& lp = rc.logit_prior;
    lp.family = kv.str("prior.type", "laplace");
    if (lp.family == "laplace") {
      if (kv.has("logit.epsilon")) lp.epsilon = kv.nums("logit.epsilon");
      for (double e : lp.epsilon)
        if (!(e > 0)) throw ConfigError("logit.epsilon entries must be positive");
    } else if (lp.family == "normal" || lp.family == "t") {
      lp.scale = kv.num("prior.scale", 10);
      lp.dof = kv.num("prior.dof", 3);
      if (!(lp.scale > 0) || !(lp.dof > 0)) throw ConfigError("prior.scale and prior.dof must be positive");
    } else {
      throw ConfigError("prior.type for the logit model must be laplace, normal or t");
    }
    lp.multistart = kv.flag("logit.multistart", false);
  }

  // deletion: exactly one of the three forms
  int forms = kv.has("deletion.sets") + kv.has("deletion.scan_size") + kv.has("deletion.kfold");
  if (forms != 1)
    throw ConfigError("exactly one of deletion.sets, deletion.scan_size, deletion.kfold is required");
  if (kv.has("deletion.sets")) {
    rc.deletion.mode = DeletionSpec::Mode::Sets;
    std::string s = kv.str("deletion.sets");
    if (s == "singletons") {
      rc.deletion.singletons = true;
    } else {
      for (const auto& part : split(s, ';')) {
        if (part == "empty") rc.deletion.sets.push_back({});
        else rc.deletion.sets.push_back(one_based_list(part, "deletion.sets"));
      }
    }
  } else if (kv.has("deletion.scan_size")) {
    rc.deletion.mode = DeletionSpec::Mode::ScanSize;
    rc.deletion.scan_size = static_cast<int>(kv.integer("deletion.scan_size", 0));
    if (rc.deletion.scan_size < 1) throw ConfigError("deletion.scan_size must be at least 1");
  } else {
    rc.deletion.mode = DeletionSpec::Mode::KFold;
    rc.deletion.folds = static_cast<int>(kv.integer("deletion.kfold", 0));
    rc.deletion.partitions = static_cast<int>(kv.integer("deletion.partitions", 1));
    if (rc.deletion.folds < 2) throw ConfigError("deletion.kfold must be at least 2");
    if (rc.deletion.partitions < 1) throw ConfigError("deletion.partitions must be at least 1");
  }

  if (kv.has("r")) rc.r_values = kv.nums("r");
  for (double r : rc.r_values)
    if (!(r > 1)) throw ConfigError("r values must exceed 1");
  rc.mm_grid_size = static_cast<int>(kv.integer("mm.grid_size", 4096));

  // sampler
  rc.sampler.seed = static_cast<std::uint64_t>(kv.integer("sampler.seed", 1));
  rc.sampler.draws = static_cast<int>(kv.integer("sampler.draws", 10000));
  rc.sampler.burn_in = static_cast<int>(kv.integer("sampler.burn_in", 1000));
  rc.sampler.thin = static_cast<int>(kv.integer("sampler.thin", 1));
  rc.sampler.warmup = static_cast<int>(kv.integer("sampler.warmup", 4000));
  rc.sampler.adapt = kv.flag("sampler.adapt", true);
  if (kv.has("sampler.proposal_scale")) rc.sampler.proposal_scale = kv.nums("sampler.proposal_scale");
  rc.chains = static_cast<int>(kv.integer("sampler.chains", 1));
  validate(rc.sampler);
  if (rc.chains < 1) throw ConfigError("sampler.chains must be at least 1");

  // estimate
  if (kv.has("estimate.measures"))
    for (const auto& w : kv.words("estimate.measures")) rc.measures.push_back(parse_measure(w));
  else
    for (Measure m : {Measure::KL, Measure::Hellinger, Measure::ChiSq, Measure::CPO})
      rc.measures.push_back({m, -1, 0});
  if (kv.has("estimate.log_c_hat")) rc.log_c_hat = kv.num("estimate.log_c_hat");
  rc.likelihood_bounded = kv.flag("estimate.likelihood_bounded", false);

  // verify
  rc.top_fraction = kv.num("verify.top_fraction", 0.01);
  if (!(rc.top_fraction > 0) || rc.top_fraction > 0.2)
    throw ConfigError("verify.top_fraction must lie in (0, 0.2]");
  if (kv.has("verify.scaling.m_grid")) {
    rc.scaling_grid.clear();
    for (double v : kv.nums("verify.scaling.m_grid")) rc.scaling_grid.push_back(static_cast<int>(v));
  }
  rc.scaling_replications = static_cast<int>(kv.integer("verify.scaling.replications", 200));
  rc.plots = kv.flag("verify.plots", true);

  // scan
  if (kv.has("scan.flag")) rc.scan_flag = one_based_list(kv.str("scan.flag"), "scan.flag");
  rc.scan_top = static_cast<int>(kv.integer("scan.top", 100));
  if (rc.scan_top < 1) throw ConfigError("scan.top must be at least 1");

  if (kv.has("output.dir")) {
    std::filesystem::path o = kv.str("output.dir");
    if (o.is_relative()) o = std::filesystem::path(kv.base_dir()) / o;
    rc.output_dir = o.lexically_normal().string();
  }

  auto stray = kv.unused();
  if (!stray.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& s : stray) msg += " " + s;
    throw ConfigError(msg);
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) { return run_config_from(KeyValueConfig::load(path)); }

}  // namespace influence_gate
