#include "bscen/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bscen/errors.hpp"

namespace bscen {

using nlohmann::json;

namespace {

// Object view that records which keys were read so leftovers can be rejected.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Obj child(const std::string& key) { return Obj(raw(key), sub(key)); }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) throw InputError(sub(key) + " must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw InputError(sub(key) + " must be an integer");
    return v.get<int>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw InputError(sub(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw InputError(sub(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw InputError(sub(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    std::vector<double> out;
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw InputError(sub(key) + " must be a number or a list of numbers");
    for (const auto& e : v) {
      if (!e.is_number()) throw InputError(sub(key) + " must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    const json& v = raw(key);
    std::vector<std::string> out;
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw InputError(sub(key) + " must be a string or a list of strings");
    for (const auto& e : v) {
      if (!e.is_string()) throw InputError(sub(key) + " must contain only strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  template <typename E>
  E choice(const std::string& key, E fallback, const std::vector<std::pair<std::string, E>>& options) {
    if (!has(key)) return fallback;
    const std::string s = string(key, "");
    for (const auto& [name, value] : options) {
      if (name == s) return value;
    }
    std::string allowed;
    for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
    throw InputError(sub(key) + ": unknown value '" + s + "' (expected one of " + allowed + ")");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw InputError(where() + ": unknown key '" + it.key() + "'");
    }
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

std::vector<int> parse_horizons(const json& v, const std::string& where) {
  std::vector<int> out;
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw InputError(where + " must contain integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  if (v.is_object()) {
    Obj o(v, where);
    const int from = o.integer("from", 1);
    const int to = o.integer("to", from);
    o.finish();
    if (to < from) throw InputError(where + ": 'to' is before 'from'");
    for (int h = from; h <= to; ++h) out.push_back(h);
    return out;
  }
  throw InputError(where + " must be an integer, a list or {\"from\", \"to\"}");
}

std::vector<std::pair<std::string, double>> parse_weights(const json& v, const std::string& where) {
  std::vector<std::pair<std::string, double>> out;
  if (v.is_string()) return {{v.get<std::string>(), 1.0}};
  if (!v.is_object() || v.empty()) throw InputError(where + " must be a name or a non-empty {name: weight} object");
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (!it.value().is_number()) throw InputError(where + "." + it.key() + " must be a number");
    out.emplace_back(it.key(), it.value().get<double>());
  }
  return out;
}

RestrictionTemplate restrictions_from_json(const json& j, int default_horizon, const std::string& where) {
  Obj o(j, where);
  RestrictionTemplate t;
  t.horizon = o.integer("horizon", default_horizon);
  t.hard_variance = o.number("hard_variance", kHardVariance);
  if (!(t.hard_variance > 0.0)) throw InputError(o.sub("hard_variance") + " must be positive");
  if (o.has("restrictions")) {
    const json& list = o.raw("restrictions");
    if (!list.is_array()) throw InputError(o.sub("restrictions") + " must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Obj e(list[i], o.sub("restrictions") + "[" + std::to_string(i) + "]");
      RestrictionEntry entry;
      const std::string kind = e.string("kind", "obs");
      if (kind != "obs" && kind != "shock") throw InputError(e.sub("kind") + " must be 'obs' or 'shock'");
      entry.on_shocks = kind == "shock";
      if (!e.has("horizons")) throw InputError(e.where() + ": missing 'horizons'");
      entry.horizons = parse_horizons(e.raw("horizons"), e.sub("horizons"));
      if (!e.has("weights")) throw InputError(e.where() + ": missing 'weights'");
      entry.weights = parse_weights(e.raw("weights"), e.sub("weights"));
      if (!e.has("target")) throw InputError(e.where() + ": missing 'target'");
      entry.targets = e.numbers("target", {});
      entry.hardness = e.choice<Hardness>("hardness", Hardness::hard,
                                          {{"hard", Hardness::hard}, {"soft", Hardness::soft}, {"sd-scaled", Hardness::sd_scaled}});
      entry.variance = e.number("variance", 1.0);
      entry.scale = e.number("scale", 1.0);
      entry.relative_to_last = e.boolean("relative_to_last", false);
      e.finish();
      t.entries.push_back(std::move(entry));
    }
  }
  o.finish();
  if (t.horizon < 1) throw InputError(where + ": 'horizon' must be a positive integer");
  for (const auto& e : t.entries) {
    for (int h : e.horizons) {
      if (h < 1 || h > t.horizon) {
        throw InputError(where + ": horizon " + std::to_string(h) + " outside 1.." + std::to_string(t.horizon));
      }
    }
  }
  return t;
}

// Inline object or path to a restriction file.
RestrictionTemplate restrictions_field(Obj& o, const std::string& key, int horizon, const std::filesystem::path& base) {
  const json& v = o.raw(key);
  if (v.is_string()) {
    std::filesystem::path p = v.get<std::string>();
    if (p.is_relative()) p = base / p;
    return load_restrictions(p, horizon);
  }
  return restrictions_from_json(v, horizon, o.sub(key));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw InputError("checkpoint: bad shape for " + what);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InputError("checkpoint: bad shape for " + what);
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index size, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) throw InputError("checkpoint: bad length for " + what);
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

RestrictionTemplate parse_restrictions(const std::string& text, int default_horizon) {
  return restrictions_from_json(parse_json(text, "restriction file"), default_horizon, "restrictions");
}

RestrictionTemplate load_restrictions(const std::filesystem::path& path, int default_horizon) {
  return restrictions_from_json(parse_json(read_text_file(path), path.string()), default_horizon, path.string());
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json root = parse_json(text, "config");
  Obj o(root, "");
  RunConfig c;
  c.base_dir = base_dir;
  c.canonical = root.dump();
  c.command = o.string("command", "");

  if (o.has("data")) {
    Obj d = o.child("data");
    c.data.path = d.string("path", "");
    if (!c.data.path.empty() && c.data.path.is_relative()) c.data.path = base_dir / c.data.path;
    c.data.p = d.integer("p", 4);
    if (d.has("transforms")) {
      const json& t = d.raw("transforms");
      if (!t.is_object()) throw InputError("data.transforms must be a {name: code} object");
      for (auto it = t.begin(); it != t.end(); ++it) {
        if (!it.value().is_number_integer()) throw InputError("data.transforms." + it.key() + " must be an integer code");
        c.data.transforms[it.key()] = it.value().get<int>();
      }
    }
    d.finish();
    if (c.data.p < 1) throw InputError("data.p must be at least 1");
  }

  SamplerConfig& s = c.sampler;
  if (o.has("model")) {
    Obj m = o.child("model");
    s.backend = m.choice<Backend>("backend", Backend::bart, {{"bart", Backend::bart}, {"linear", Backend::linear}});
    s.trees = m.integer("trees", s.trees);
    s.heteroskedastic = m.boolean("heteroskedastic", s.heteroskedastic);
    s.tree_prior.alpha = m.number("alpha", s.tree_prior.alpha);
    s.tree_prior.beta = m.number("beta", s.tree_prior.beta);
    if (m.has("move_probs")) {
      const auto mp = m.numbers("move_probs", {});
      if (mp.size() != 4) throw InputError("model.move_probs needs grow, prune, change and swap probabilities");
      std::copy(mp.begin(), mp.end(), s.tree_prior.move_probs.begin());
    }
    s.leaf_k = m.number("leaf_k", s.leaf_k);
    s.intercept = m.boolean("intercept", s.intercept);
    s.intercept_variance = m.number("intercept_variance", s.intercept_variance);
    s.nu = m.number("nu", s.nu);
    s.A = m.number("A", s.A);
    s.hyper_shape = m.choice<HyperShape>("hyper_shape", s.hyper_shape,
                                         {{"sample_size", HyperShape::sample_size}, {"conjugate", HyperShape::conjugate}});
    s.s_bar = m.integer("s_bar", s.s_bar);
    s.a_p = m.number("a_p", s.a_p);
    s.b_p = m.number("b_p", s.b_p);
    m.finish();
  }
  if (o.has("sampler")) {
    Obj m = o.child("sampler");
    s.n_burn = m.integer("n_burn", s.n_burn);
    s.n_save = m.integer("n_save", s.n_save);
    s.thin = m.integer("thin", s.thin);
    s.seed = m.unsigned_integer("seed", s.seed);
    s.progress = m.boolean("progress", s.progress);
    c.pgas.particles = m.integer("particles", c.pgas.particles);
    c.pgas.ancestor = m.choice<AncestorWeighting>(
        "ancestor", c.pgas.ancestor, {{"lag_window", AncestorWeighting::lag_window}, {"one_step", AncestorWeighting::one_step}});
    c.pgas.simulate_future_outliers = m.boolean("future_outliers", c.pgas.simulate_future_outliers);
    m.finish();
  }
  s.validate();
  if (c.pgas.particles < 2) throw InputError("sampler.particles must be at least 2");

  if (o.has("forecast")) {
    Obj f = o.child("forecast");
    c.forecast.horizon = f.integer("horizon", 0);
    c.forecast.augment = f.boolean("augment", false);
    if (f.has("restrictions")) c.forecast.restrictions = restrictions_field(f, "restrictions", c.forecast.horizon, base_dir);
    f.finish();
    if (c.forecast.restrictions) {
      if (c.forecast.horizon == 0) c.forecast.horizon = c.forecast.restrictions->horizon;
      if (c.forecast.restrictions->horizon != c.forecast.horizon) {
        throw InputError("forecast.horizon disagrees with the restriction file horizon");
      }
    }
    if (c.forecast.horizon < 1) throw InputError("forecast.horizon must be a positive integer");
  }

  if (o.has("girf")) {
    Obj g = o.child("girf");
    GirfTask& t = c.girf;
    GirfSpec& spec = t.spec;
    spec.variant = g.choice<GirfVariant>("variant", GirfVariant::sgirf,
                                         {{"ugirf", GirfVariant::ugirf}, {"sgirf", GirfVariant::sgirf}, {"rgirf", GirfVariant::rgirf}});
    spec.mode = g.choice<GirfMode>("mode", GirfMode::pgas, {{"pgas", GirfMode::pgas}, {"recursive", GirfMode::recursive}});
    spec.H = g.integer("horizon", 20);
    t.shock = g.string("shock", "");
    spec.sizes = g.numbers("sizes", {1.0});
    spec.d0 = g.number("d0", 0.0);
    spec.scale_by_size = g.boolean("scale", true);
    spec.expectation = g.boolean("expectation", false);
    spec.shared_noise = g.boolean("shared_noise", true);
    spec.free_other_shocks = g.boolean("free_other_shocks", false);
    spec.hard_variance = g.number("hard_variance", kHardVariance);
    spec.pin_non_driving = g.boolean("pin_non_driving", true);
    spec.non_driving_variance = g.number("non_driving_variance", 1.0);
    spec.keep_origins = g.boolean("keep_origins", false);
    t.origins = g.string("origins", "last");
    if (g.has("cumulate")) {
      const json& v = g.raw("cumulate");
      if (v.is_string() && v.get<std::string>() == "differenced") {
        t.cumulate_differenced = true;
      } else if (v.is_string() && v.get<std::string>() == "none") {
        t.cumulate_differenced = false;
      } else if (v.is_array()) {
        t.cumulate_given = true;
        for (const auto& e : v) {
          if (!e.is_string()) throw InputError("girf.cumulate must list variable names");
          t.cumulate.push_back(e.get<std::string>());
        }
      } else {
        throw InputError("girf.cumulate must be \"differenced\", \"none\" or a list of names");
      }
    }
    if (g.has("restricted")) {
      const json& v = g.raw("restricted");
      if (!v.is_array()) throw InputError("girf.restricted must be a list");
      for (std::size_t i = 0; i < v.size(); ++i) t.restricted.push_back(parse_weights(v[i], "girf.restricted[" + std::to_string(i) + "]"));
    }
    if (g.has("driving")) t.driving = g.strings("driving");
    if (g.has("scenario")) spec.scenario = restrictions_field(g, "scenario", spec.H, base_dir);
    if (g.has("baseline")) spec.baseline = restrictions_field(g, "baseline", spec.H, base_dir);
    g.finish();
    if (spec.H < 1) throw InputError("girf.horizon must be a positive integer");
    if (spec.variant != GirfVariant::ugirf && t.shock.empty()) throw InputError("girf.shock names the shocked variable");
    if (spec.variant == GirfVariant::ugirf && spec.scenario.entries.empty()) {
      throw InputError("girf.scenario is required for an unorthogonalized GIRF");
    }
  }

  if (o.has("verify")) {
    Obj v = o.child("verify");
    VerifyTask& t = c.verify;
    if (v.has("particles")) {
      t.particles.clear();
      for (double p : v.numbers("particles", {})) t.particles.push_back(static_cast<int>(p));
    }
    t.draws = v.integer("draws", t.draws);
    t.burn = v.integer("burn", t.burn);
    t.T = v.integer("T", t.T);
    t.H = v.integer("horizon", t.H);
    t.data_seed = v.unsigned_integer("data_seed", t.data_seed);
    t.irf_draws = v.integer("irf_draws", t.irf_draws);
    v.finish();
    for (int p : t.particles) {
      if (p < 2) throw InputError("verify.particles entries must be at least 2");
    }
    if (t.draws < 1 || t.burn < 0 || t.T < 50 || t.H < 20 || t.irf_draws < 1) {
      throw InputError("verify: draws >= 1, burn >= 0, T >= 50 and horizon >= 20 are required");
    }
  }

  c.quantiles = o.numbers("quantiles", c.quantiles);
  for (double q : c.quantiles) {
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantiles must lie in [0, 1]");
  }
  std::sort(c.quantiles.begin(), c.quantiles.end());
  c.output = o.string("output", "out");
  if (c.output.is_relative()) c.output = base_dir / c.output;
  o.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GirfSpec resolve_girf_task(const GirfTask& task, const Panel& panel, const DataConfig& data) {
  GirfSpec spec = task.spec;
  const Eigen::Index n = panel.n();
  auto index = [&](const std::string& name, const std::string& what) {
    const auto it = std::find(panel.names.begin(), panel.names.end(), name);
    if (it == panel.names.end()) throw InputError(what + ": variable '" + name + "' not found");
    return static_cast<Eigen::Index>(it - panel.names.begin());
  };
  if (spec.variant != GirfVariant::ugirf) spec.shock = index(task.shock, "girf.shock");

  spec.cumulate.assign(static_cast<std::size_t>(n), false);
  if (task.cumulate_given) {
    for (const auto& name : task.cumulate) spec.cumulate[static_cast<std::size_t>(index(name, "girf.cumulate"))] = true;
  } else if (task.cumulate_differenced) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto it = data.transforms.find(panel.names[static_cast<std::size_t>(i)]);
      const int code = it == data.transforms.end() ? 0 : it->second;
      spec.cumulate[static_cast<std::size_t>(i)] = is_differenced(transform_code_from_int(code));
    }
  }
  if (std::none_of(spec.cumulate.begin(), spec.cumulate.end(), [](bool b) { return b; })) spec.cumulate.clear();

  spec.restricted = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(task.restricted.size()), n);
  for (std::size_t r = 0; r < task.restricted.size(); ++r) {
    for (const auto& [name, w] : task.restricted[r]) spec.restricted(static_cast<Eigen::Index>(r), index(name, "girf.restricted")) += w;
  }
  spec.driving.clear();
  for (const auto& name : task.driving) spec.driving.push_back(index(name, "girf.driving"));

  spec.origins.clear();
  if (task.origins == "last") {
    spec.origins.push_back(panel.T() - 1);
  } else if (task.origins == "all") {
    for (Eigen::Index t = 0; t < panel.T(); ++t) spec.origins.push_back(t);
  } else {
    const auto colon = task.origins.find(':');
    if (colon == std::string::npos) throw InputError("girf.origins must be \"last\", \"all\" or \"FROM:TO\"");
    const Quarter from = Quarter::parse(task.origins.substr(0, colon));
    const Quarter to = Quarter::parse(task.origins.substr(colon + 1));
    for (Eigen::Index t = 0; t < panel.T(); ++t) {
      const Quarter q = panel.dates[static_cast<std::size_t>(t)];
      if (from <= q && q <= to) spec.origins.push_back(t);
    }
    if (spec.origins.empty()) throw InputError("girf.origins: no sample period falls in " + task.origins);
  }
  spec.validate(n, panel.T());
  return spec;
}

std::string save_checkpoint(const ModelState& state) {
  json j;
  j["format"] = "bscen-checkpoint";
  j["version"] = 1;
  j["sweep"] = state.sweep_index;
  j["n"] = state.cov.n();
  if (const auto* lin = std::get_if<LinearBackend>(&state.mean)) {
    j["backend"] = "linear";
    j["k"] = lin->coef.A.cols();
    j["A"] = matrix_json(lin->coef.A);
    j["intercept"] = vector_json(lin->coef.intercept);
    j["has_intercept"] = lin->coef.has_intercept;
    j["lambda2"] = matrix_json(lin->shrinkage.lambda2);
    j["nu_local"] = matrix_json(lin->shrinkage.nu);
    j["tau2"] = lin->shrinkage.tau2;
    j["xi"] = lin->shrinkage.xi;
  } else {
    const auto& bart = std::get<BartBackend>(state.mean);
    j["backend"] = "bart";
    j["k"] = bart.ranges.lo.size();
    json forests = json::array();
    for (const auto& f : bart.forests) {
      json trees = json::array();
      for (const auto& t : f.trees) trees.push_back(t.to_records());
      forests.push_back(std::move(trees));
    }
    j["forests"] = std::move(forests);
    json leaf = json::array();
    for (const auto& l : bart.leaf_priors) leaf.push_back(l.variance);
    j["leaf_variance"] = std::move(leaf);
    j["range_lo"] = bart.ranges.lo;
    j["range_hi"] = bart.ranges.hi;
    j["range_splittable"] = bart.ranges.splittable;
  }
  j["Sigma"] = matrix_json(state.cov.Sigma);
  j["a"] = vector_json(state.cov.a);
  j["s"] = state.outlier.s;
  j["p_out"] = state.outlier.p_out;
  return j.dump(1) + "\n";
}

ModelState load_checkpoint(const std::string& text, const Panel& panel) {
  const json j = parse_json(text, "checkpoint");
  try {
    if (j.value("format", "") != "bscen-checkpoint" || j.value("version", 0) != 1) {
      throw InputError("checkpoint: unrecognized format");
    }
    const auto n = j.at("n").get<Eigen::Index>();
    const auto k = j.at("k").get<Eigen::Index>();
    if (n != panel.n() || k != panel.k()) throw InputError("checkpoint dimensions do not match the data");
    SamplerConfig config;
    config.backend = j.at("backend").get<std::string>() == "linear" ? Backend::linear : Backend::bart;
    ModelState st;
    if (config.backend == Backend::linear) {
      LinearBackend lin;
      lin.coef.A = matrix_from(j.at("A"), n, k, "A");
      lin.coef.intercept = vector_from(j.at("intercept"), n, "intercept");
      lin.coef.has_intercept = j.at("has_intercept").get<bool>();
      lin.shrinkage.lambda2 = matrix_from(j.at("lambda2"), n, k, "lambda2");
      lin.shrinkage.nu = matrix_from(j.at("nu_local"), n, k, "nu_local");
      lin.shrinkage.tau2 = j.at("tau2").get<double>();
      lin.shrinkage.xi = j.at("xi").get<double>();
      config.intercept = lin.coef.has_intercept;
      st.mean = std::move(lin);
    } else {
      BartBackend bart;
      for (const auto& trees : j.at("forests")) {
        Forest f;
        for (const auto& records : trees) f.trees.push_back(DecisionTree::from_records(records.get<std::vector<std::array<double, 5>>>()));
        bart.forests.push_back(std::move(f));
      }
      if (static_cast<Eigen::Index>(bart.forests.size()) != n) throw InputError("checkpoint: one forest per variable expected");
      for (const auto& v : j.at("leaf_variance")) bart.leaf_priors.push_back(LeafPrior{v.get<double>()});
      bart.ranges.lo = j.at("range_lo").get<std::vector<double>>();
      bart.ranges.hi = j.at("range_hi").get<std::vector<double>>();
      bart.ranges.splittable = j.at("range_splittable").get<std::vector<int>>();
      config.trees = bart.forests.front().size();
      st.mean = std::move(bart);
    }
    st.config = config;
    st.cov = CovarianceState::initial(matrix_from(j.at("Sigma"), n, n, "Sigma"));
    st.cov.a = vector_from(j.at("a"), n, "a");
    st.outlier.s = j.at("s").get<std::vector<int>>();
    st.outlier.p_out = j.at("p_out").get<double>();
    st.sweep_index = j.at("sweep").get<long>();
    refresh_fit(st, panel.x);
    return st;
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace bscen
