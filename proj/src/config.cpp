#include "mflow/io/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mflow/circle/circle_map.hpp"
#include "mflow/sphere/expmap.hpp"
#include "mflow/sphere/recursive.hpp"
#include "mflow/torus/coupling.hpp"

namespace mflow {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <class T>
void read(const json& j, const std::string& path, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  const std::string where = join(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
    out = v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where, "expected a number");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(where, "expected a string");
    out = v.get<std::string>();
  } else {
    if (!v.is_array()) throw ConfigError(where, "expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& e = v[i];
      using E = typename T::value_type;
      const std::string at = where + "[" + std::to_string(i) + "]";
      if constexpr (std::is_integral_v<E>) {
        if (!e.is_number_integer()) throw ConfigError(at, "expected an integer");
      } else {
        if (!e.is_number()) throw ConfigError(at, "expected a number");
      }
      out.push_back(e.get<E>());
    }
  }
}

void positive(bool ok, const std::string& where, const std::string& what = "must be positive") {
  if (!ok) throw ConfigError(where, what);
}

bool is_sphere(const std::string& m) { return m.size() >= 2 && m[0] == 'S'; }

int sphere_dim(const std::string& m) { return std::stoi(m.substr(1)); }

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream os;
    os << "malformed JSON at line " << line << ", column " << col;
    throw ConfigError("", os.str());
  }
  require_object(j, "<root>");
  reject_unknown(j, "", {"name", "manifold", "flow", "target", "train", "data", "replicas", "out"});

  ExperimentConfig c;
  read(j, "", "name", c.name);
  if (!j.contains("manifold")) throw ConfigError("manifold", "required");
  read(j, "", "manifold", c.manifold);
  if (is_sphere(c.manifold)) {
    int d = 0;
    try {
      d = sphere_dim(c.manifold);
    } catch (const std::exception&) {
      throw ConfigError("manifold", "expected S<D>, T<D> or a C/I signature");
    }
    positive(d >= 2, "manifold", "spheres need D >= 2");
  } else {
    try {
      (void)ProductManifold::parse(c.manifold);
    } catch (const std::exception&) {
      throw ConfigError("manifold", "expected S<D>, T<D> or a C/I signature");
    }
  }

  if (!j.contains("flow")) throw ConfigError("flow", "required");
  const json& f = j.at("flow");
  require_object(f, "flow");
  read(f, "flow", "type", c.flow.type);
  if (c.flow.type.empty()) c.flow.type = is_sphere(c.manifold) ? "recursive" : "coupling";
  const std::set<std::string> common = {"type", "hidden", "init_jitter", "output_scale"};
  auto allow = [&](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    return extra;
  };
  if (c.flow.type == "coupling") {
    if (is_sphere(c.manifold)) throw ConfigError("flow.type", "coupling flows live on tori and interval products");
    reject_unknown(f, "flow", allow({"layers", "circle", "K", "interval_K", "frequencies"}));
  } else if (c.flow.type == "recursive") {
    if (!is_sphere(c.manifold)) throw ConfigError("flow.type", "recursive flows live on spheres");
    reject_unknown(f, "flow", allow({"N_T", "K_m", "K_s", "circle", "elide", "frequencies"}));
  } else if (c.flow.type == "expmap") {
    if (!is_sphere(c.manifold)) throw ConfigError("flow.type", "exp-map flows live on spheres");
    reject_unknown(f, "flow", {"type", "N_T", "K", "field", "init_slack", "init_scale"});
  } else {
    throw ConfigError("flow.type", "expected coupling, recursive or expmap");
  }
  read(f, "flow", "layers", c.flow.layers);
  read(f, "flow", "circle", c.flow.circle);
  read(f, "flow", "K", c.flow.K);
  read(f, "flow", "interval_K", c.flow.interval_K);
  read(f, "flow", "frequencies", c.flow.frequencies);
  read(f, "flow", "hidden", c.flow.hidden);
  read(f, "flow", "N_T", c.flow.N_T);
  read(f, "flow", "K_m", c.flow.K_m);
  read(f, "flow", "K_s", c.flow.K_s);
  read(f, "flow", "elide", c.flow.elide);
  read(f, "flow", "field", c.flow.field);
  read(f, "flow", "init_slack", c.flow.init_slack);
  read(f, "flow", "init_scale", c.flow.init_scale);
  read(f, "flow", "init_jitter", c.flow.init_jitter);
  read(f, "flow", "output_scale", c.flow.output_scale);
  try {
    (void)parse_family(c.flow.circle);
  } catch (const std::exception&) {
    throw ConfigError("flow.circle", "expected mobius, cs, ncp or fourier");
  }
  if (c.flow.type == "expmap") {
    try {
      (void)parse_field(c.flow.field);
    } catch (const std::exception&) {
      throw ConfigError("flow.field", "expected radial or polynomial");
    }
  }
  positive(c.flow.layers >= 1, "flow.layers");
  positive(c.flow.K >= 1 || (c.flow.circle == "fourier" && c.flow.type == "coupling"), "flow.K");
  positive(c.flow.interval_K >= 1, "flow.interval_K");
  positive(c.flow.N_T >= 1, "flow.N_T");
  positive(c.flow.K_m >= 1, "flow.K_m");
  positive(c.flow.K_s >= 1, "flow.K_s");
  for (std::size_t i = 0; i < c.flow.hidden.size(); ++i) positive(c.flow.hidden[i] >= 1, "flow.hidden[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < c.flow.frequencies.size(); ++i)
    positive(c.flow.frequencies[i] >= 1, "flow.frequencies[" + std::to_string(i) + "]");
  if (c.flow.circle == "fourier" && c.flow.frequencies.empty()) throw ConfigError("flow.frequencies", "required for fourier circles");
  positive(c.flow.init_jitter >= 0.0, "flow.init_jitter", "must be non-negative");
  positive(c.flow.output_scale >= 0.0, "flow.output_scale", "must be non-negative");

  if (j.contains("target")) {
    const json& t = j.at("target");
    require_object(t, "target");
    reject_unknown(t, "target", {"name", "beta"});
    read(t, "target", "name", c.target);
    read(t, "target", "beta", c.beta);
  }
  TargetKind kind{};
  try {
    kind = parse_target(c.target);
  } catch (const std::exception&) {
    throw ConfigError("target.name", "unknown target '" + c.target + "'");
  }
  positive(c.beta > 0.0, "target.beta");
  if (kind != TargetKind::Uniform && target_manifold(kind) != c.manifold) {
    throw ConfigError("target.name", "target lives on " + target_manifold(kind) + ", not " + c.manifold);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_object(t, "train");
    reject_unknown(t, "train", {"mode", "iterations", "batch", "lr", "seed", "eval_samples", "block", "parallel"});
    read(t, "train", "mode", c.mode);
    read(t, "train", "iterations", c.train.iterations);
    read(t, "train", "batch", c.train.batch);
    read(t, "train", "lr", c.train.lr);
    read(t, "train", "seed", c.train.seed);
    read(t, "train", "eval_samples", c.train.eval_samples);
    read(t, "train", "block", c.train.block);
    read(t, "train", "parallel", c.train.parallel);
  }
  if (c.mode != "kl" && c.mode != "mle") throw ConfigError("train.mode", "expected kl or mle");
  positive(c.train.iterations >= 1, "train.iterations");
  positive(c.train.batch >= 1, "train.batch");
  positive(c.train.lr > 0.0, "train.lr");
  positive(c.train.eval_samples >= 2, "train.eval_samples", "must be at least 2");
  positive(c.train.block >= 1, "train.block");

  if (j.contains("data")) {
    const json& d = j.at("data");
    require_object(d, "data");
    reject_unknown(d, "data", {"source", "kappa", "mu", "n", "path"});
    DataConfig dc;
    read(d, "data", "source", dc.source);
    read(d, "data", "kappa", dc.kappa);
    read(d, "data", "mu", dc.mu);
    read(d, "data", "n", dc.n);
    read(d, "data", "path", dc.path);
    if (dc.source == "vmf") {
      if (c.manifold != "S2") throw ConfigError("data.source", "vmf samples are generated on S2");
      positive(dc.kappa > 0.0, "data.kappa");
      positive(dc.n >= 1, "data.n");
      if (dc.mu.size() != 3) throw ConfigError("data.mu", "expected 3 numbers");
    } else if (dc.source == "csv") {
      if (dc.path.empty()) throw ConfigError("data.path", "required for csv data");
    } else {
      throw ConfigError("data.source", "expected vmf or csv");
    }
    c.data = dc;
  }
  if (c.mode == "mle" && !c.data) throw ConfigError("data", "required for maximum likelihood");

  read(j, "", "replicas", c.replicas);
  positive(c.replicas >= 1, "replicas");
  read(j, "", "out", c.out);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const ExperimentConfig& c) {
  json f = {{"type", c.flow.type}};
  if (c.flow.type == "expmap") {
    f["N_T"] = c.flow.N_T;
    f["K"] = c.flow.K;
    f["field"] = c.flow.field;
    f["init_slack"] = c.flow.init_slack;
    f["init_scale"] = c.flow.init_scale;
  } else {
    f["hidden"] = c.flow.hidden;
    f["circle"] = c.flow.circle;
    f["init_jitter"] = c.flow.init_jitter;
    f["output_scale"] = c.flow.output_scale;
    if (!c.flow.frequencies.empty()) f["frequencies"] = c.flow.frequencies;
    if (c.flow.type == "coupling") {
      f["layers"] = c.flow.layers;
      f["K"] = c.flow.K;
      f["interval_K"] = c.flow.interval_K;
    } else {
      f["N_T"] = c.flow.N_T;
      f["K_m"] = c.flow.K_m;
      f["K_s"] = c.flow.K_s;
      f["elide"] = c.flow.elide;
    }
  }
  json j = {{"name", c.name},
            {"manifold", c.manifold},
            {"flow", f},
            {"target", {{"name", c.target}, {"beta", c.beta}}},
            {"train",
             {{"mode", c.mode},
              {"iterations", c.train.iterations},
              {"batch", c.train.batch},
              {"lr", c.train.lr},
              {"seed", c.train.seed},
              {"eval_samples", c.train.eval_samples},
              {"block", c.train.block},
              {"parallel", c.train.parallel}}},
            {"replicas", c.replicas}};
  if (c.data) {
    j["data"] = {{"source", c.data->source}, {"kappa", c.data->kappa}, {"mu", c.data->mu}, {"n", c.data->n}};
    if (!c.data->path.empty()) j["data"]["path"] = c.data->path;
  }
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

std::unique_ptr<FlowModel> build_model(const ExperimentConfig& c) {
  const auto& f = c.flow;
  if (f.type == "expmap") {
    ExpMapSpec s;
    s.D = sphere_dim(c.manifold);
    s.passes = f.N_T;
    s.field = parse_field(f.field);
    s.K = f.K;
    s.init_slack = f.init_slack;
    s.init_scale = f.init_scale;
    return std::make_unique<ExpMapFlow>(s);
  }
  if (f.type == "recursive") {
    RecursiveSphereSpec s;
    s.D = sphere_dim(c.manifold);
    s.passes = f.N_T;
    s.height_K = f.K_s;
    s.circle = {parse_family(f.circle), f.K_m, f.frequencies};
    s.hidden = f.hidden;
    s.elide = f.elide;
    s.init_jitter = f.init_jitter;
    s.output_scale = f.output_scale;
    return std::make_unique<RecursiveSphereFlow>(s);
  }
  TorusFlowSpec s;
  s.manifold = ProductManifold::parse(c.manifold);
  s.circle = {parse_family(f.circle), f.K, f.frequencies};
  s.interval_K = f.interval_K;
  s.layers = f.layers;
  s.hidden = f.hidden;
  s.init_jitter = f.init_jitter;
  s.output_scale = f.output_scale;
  return std::make_unique<TorusFlow>(s);
}

Target build_target(const ExperimentConfig& c) { return Target(parse_target(c.target), c.beta, c.manifold); }

Dataset build_dataset(const ExperimentConfig& c, const FlowModel& model) {
  if (!c.data) throw ConfigError("data", "no data source configured");
  const auto& d = *c.data;
  if (d.source == "vmf") {
    std::mt19937_64 rng(c.train.seed ^ 0xD1B54A32D192ED03ULL);
    std::vector<double> mu = d.mu;
    double n = 0.0;
    for (double v : mu) n += v * v;
    n = std::sqrt(n);
    if (!(n > 0.0)) throw ConfigError("data.mu", "must be non-zero");
    for (double& v : mu) v /= n;
    return vmf_dataset(d.kappa, mu, static_cast<std::size_t>(d.n), rng);
  }
  std::ifstream in(d.path);
  if (!in) throw ConfigError("data.path", "cannot read " + d.path);
  Dataset out;
  out.dim = model.point_dim();
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (row == 1) continue;  // header
      throw ConfigError("data.path", "row " + std::to_string(row) + " is not numeric");
    }
    if (vals.size() != out.dim) throw ConfigError("data.path", "row " + std::to_string(row) + " has the wrong number of columns");
    out.points.insert(out.points.end(), vals.begin(), vals.end());
  }
  return out;
}

}  // namespace mflow
