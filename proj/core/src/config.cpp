#include "gibbslab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace gibbslab {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::kConfig, fmt::format("field '{}': {}", field, what));
}

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key))
      config_error(where.empty() ? key : where + "." + key, "unknown field");
  }
}

double get_number(const json& v, const std::string& field) {
  if (!v.is_number()) config_error(field, fmt::format("expected a number, got {}", v.type_name()));
  return v.get<double>();
}

std::int64_t get_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer())
    config_error(field, fmt::format("expected an integer, got {}", v.dump()));
  return v.get<std::int64_t>();
}

std::uint64_t get_unsigned(const json& v, const std::string& field) {
  const auto x = get_integer(v, field);
  if (x < 0) config_error(field, fmt::format("must be >= 0, got {}", x));
  return static_cast<std::uint64_t>(x);
}

int get_int(const json& v, const std::string& field) {
  const auto x = get_integer(v, field);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    config_error(field, "out of range");
  return static_cast<int>(x);
}

std::string get_string(const json& v, const std::string& field) {
  if (!v.is_string()) config_error(field, fmt::format("expected a string, got {}", v.type_name()));
  return v.get<std::string>();
}

/// A scalar is a one-element list.
std::vector<double> get_number_list(const json& v, const std::string& field) {
  if (!v.is_array()) return {get_number(v, field)};
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_number(v[i], fmt::format("{}[{}]", field, i)));
  return out;
}

std::vector<int> get_int_list(const json& v, const std::string& field) {
  if (!v.is_array()) return {get_int(v, field)};
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_int(v[i], fmt::format("{}[{}]", field, i)));
  return out;
}

Vector broadcast(const std::vector<double>& v, int d, const char* field) {
  if (v.size() == 1) return Vector::Constant(d, v[0]);
  if (static_cast<int>(v.size()) != d)
    config_error(fmt::format("world.{}", field),
                 fmt::format("has {} entries but the grid asks for d = {}", v.size(), d));
  return Eigen::Map<const Vector>(v.data(), d);
}

void parse_world(const json& j, WorldSpec& w) {
  if (!j.is_object()) config_error("world", "expected an object");
  reject_unknown(j, "world",
                 {"mu_s", "mu_t", "mu_0", "sigma_s2", "sigma_t2", "sigma_0_2", "sigma2", "d_phi"});
  if (j.contains("mu_s")) w.mu_s = get_number_list(j["mu_s"], "world.mu_s");
  if (j.contains("mu_t")) w.mu_t = get_number_list(j["mu_t"], "world.mu_t");
  if (j.contains("mu_0")) w.mu_0 = get_number_list(j["mu_0"], "world.mu_0");
  if (j.contains("sigma_s2")) w.sigma_s2 = get_number(j["sigma_s2"], "world.sigma_s2");
  if (j.contains("sigma_t2")) w.sigma_t2 = get_number(j["sigma_t2"], "world.sigma_t2");
  if (j.contains("sigma_0_2")) w.sigma_0_2 = get_number(j["sigma_0_2"], "world.sigma_0_2");
  if (j.contains("sigma2")) w.sigma2 = get_number(j["sigma2"], "world.sigma2");
  if (j.contains("d_phi")) w.d_phi = get_int(j["d_phi"], "world.d_phi");
}

void parse_grid(const json& j, GridSpec& g) {
  if (!j.is_object()) config_error("grid", "expected an object");
  reject_unknown(j, "grid", {"m", "n", "d", "gamma", "alpha"});
  if (j.contains("m")) g.m = get_int_list(j["m"], "grid.m");
  if (j.contains("n")) g.n = get_int_list(j["n"], "grid.n");
  if (j.contains("d")) g.d = get_int_list(j["d"], "grid.d");
  if (j.contains("gamma")) g.gamma = get_number_list(j["gamma"], "grid.gamma");
  if (j.contains("alpha")) g.alpha = get_number_list(j["alpha"], "grid.alpha");
}

void parse_sgld(const json& j, SgldConfig& s) {
  if (!j.is_object()) config_error("sgld", "expected an object");
  reject_unknown(j, "sgld", {"steps", "step_size", "burn_in", "thinning", "minibatch",
                             "override_stability"});
  if (j.contains("steps")) s.steps = get_int(j["steps"], "sgld.steps");
  if (j.contains("step_size")) s.step_size = get_number(j["step_size"], "sgld.step_size");
  if (j.contains("burn_in")) s.burn_in = get_int(j["burn_in"], "sgld.burn_in");
  if (j.contains("thinning")) s.thinning = get_int(j["thinning"], "sgld.thinning");
  if (j.contains("minibatch")) s.minibatch = get_int(j["minibatch"], "sgld.minibatch");
  if (j.contains("override_stability")) {
    if (!j["override_stability"].is_boolean())
      config_error("sgld.override_stability", "expected a boolean");
    s.override_stability = j["override_stability"].get<bool>();
  }
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::ClosedForm:
      return "ClosedForm";
    case Mode::MonteCarlo:
      return "MonteCarlo";
    case Mode::SGLD:
      return "SGLD";
    case Mode::Bounds:
      return "Bounds";
    case Mode::Asymptotics:
      return "Asymptotics";
    case Mode::Validate:
      return "Validate";
  }
  return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view s) {
  for (auto m : {Mode::ClosedForm, Mode::MonteCarlo, Mode::SGLD, Mode::Bounds, Mode::Asymptotics,
                 Mode::Validate})
    if (s == to_string(m)) return m;
  if (s == "closed-form") return Mode::ClosedForm;
  if (s == "monte-carlo" || s == "simulate") return Mode::MonteCarlo;
  if (s == "sgld") return Mode::SGLD;
  if (s == "bounds") return Mode::Bounds;
  if (s == "asymptotics") return Mode::Asymptotics;
  if (s == "validate") return Mode::Validate;
  return std::nullopt;
}

std::optional<OutputFormat> format_from_string(std::string_view s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  return std::nullopt;
}

std::optional<GibbsAlgorithm> algorithm_from_string(std::string_view s) {
  for (auto a :
       {GibbsAlgorithm::AlphaGibbs, GibbsAlgorithm::TwoStageGibbs, GibbsAlgorithm::Supervised})
    if (s == to_string(a)) return a;
  return std::nullopt;
}

GaussianMeanWorld WorldSpec::build(int d) const {
  GaussianMeanWorld w;
  w.d = d;
  w.d_phi = d_phi;
  w.d_c = d - d_phi;
  w.mu_s = broadcast(mu_s, d, "mu_s");
  w.mu_t = broadcast(mu_t, d, "mu_t");
  w.mu_0 = broadcast(mu_0, d, "mu_0");
  w.sigma_s2 = sigma_s2;
  w.sigma_t2 = sigma_t2;
  w.sigma_0_2 = sigma_0_2;
  w.sigma2 = sigma2;
  return w;
}

std::vector<GridPoint> GridSpec::points() const {
  std::vector<std::optional<double>> gammas(gamma.begin(), gamma.end());
  std::vector<std::optional<double>> alphas(alpha.begin(), alpha.end());
  if (gammas.empty()) gammas.emplace_back();
  if (alphas.empty()) alphas.emplace_back();
  std::vector<GridPoint> out;
  std::uint64_t index = 0;
  for (int dd : d)
    for (int mm : m)
      for (int nn : n)
        for (const auto& g : gammas)
          for (const auto& a : alphas) out.push_back({index++, mm, nn, dd, g, a});
  return out;
}

void ExperimentConfig::validate() const {
  if (trials < 1) config_error("trials", fmt::format("must be >= 1, got {}", trials));
  if (grid.m.empty()) config_error("grid.m", "must be nonempty");
  if (grid.n.empty()) config_error("grid.n", "must be nonempty");
  if (grid.d.empty()) config_error("grid.d", "must be nonempty");
  for (int v : grid.m)
    if (v < 1) config_error("grid.m", fmt::format("entries must be >= 1, got {}", v));
  for (int v : grid.n)
    if (v < 0) config_error("grid.n", fmt::format("entries must be >= 0, got {}", v));
  for (int v : grid.d)
    if (v < 1) config_error("grid.d", fmt::format("entries must be >= 1, got {}", v));
  for (double v : grid.gamma)
    if (!(v >= 0.0) || !std::isfinite(v))
      config_error("grid.gamma", fmt::format("entries must be finite and >= 0, got {}", v));
  for (double v : grid.alpha)
    if (!(v >= 0.0 && v <= 1.0))
      config_error("grid.alpha", fmt::format("entries must lie in [0, 1], got {}", v));
  if (algorithms.empty()) config_error("algorithms", "must be nonempty");
  if (world.d_phi < 0) config_error("world.d_phi", "must be >= 0");
  for (int v : grid.d) {
    if (world.d_phi >= v)
      config_error("world.d_phi", fmt::format("must be < d for every grid d, got d = {}", v));
    try {
      world.build(v).validate();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      config_error("world", e.what());
    }
  }
  if (!(z_threshold > 0.0)) config_error("z_threshold", "must be > 0");
  if (threads < 0) config_error("threads", "must be >= 0");
  if (inner_samples < 1) config_error("inner_samples", "must be >= 1");
  if (mode == Mode::SGLD) {
    try {
      sgld.validate();
    } catch (const Error& e) {
      config_error("sgld", e.what());
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, fmt::format("malformed document: {}", e.what()));
  }
  if (!j.is_object()) fail(ErrorCode::kConfig, "top level must be an object");
  reject_unknown(j, "",
                 {"world", "grid", "algorithms", "trials", "seed", "mode", "output_path", "format",
                  "z_threshold", "threads", "inner_samples", "sgld"});
  ExperimentConfig c;
  if (j.contains("world")) parse_world(j["world"], c.world);
  if (j.contains("grid")) parse_grid(j["grid"], c.grid);
  if (j.contains("algorithms")) {
    const auto& a = j["algorithms"];
    std::vector<std::string> names;
    if (a.is_array()) {
      for (std::size_t i = 0; i < a.size(); ++i)
        names.push_back(get_string(a[i], fmt::format("algorithms[{}]", i)));
    } else {
      names.push_back(get_string(a, "algorithms"));
    }
    c.algorithms.clear();
    for (const auto& name : names) {
      auto alg = algorithm_from_string(name);
      if (!alg)
        config_error("algorithms",
                     fmt::format("unknown algorithm '{}' (alpha, two-stage, supervised)", name));
      c.algorithms.push_back(*alg);
    }
  }
  if (j.contains("trials")) c.trials = get_unsigned(j["trials"], "trials");
  if (j.contains("seed")) c.seed = get_unsigned(j["seed"], "seed");
  if (j.contains("mode")) {
    const auto s = get_string(j["mode"], "mode");
    auto m = mode_from_string(s);
    if (!m) config_error("mode", fmt::format("unknown mode '{}'", s));
    c.mode = *m;
  }
  if (j.contains("output_path")) c.output_path = get_string(j["output_path"], "output_path");
  if (j.contains("format")) {
    const auto s = get_string(j["format"], "format");
    auto f = format_from_string(s);
    if (!f) config_error("format", fmt::format("unknown format '{}' (csv, json)", s));
    c.format = *f;
  }
  if (j.contains("z_threshold")) c.z_threshold = get_number(j["z_threshold"], "z_threshold");
  if (j.contains("threads")) c.threads = get_int(j["threads"], "threads");
  if (j.contains("inner_samples")) c.inner_samples = get_int(j["inner_samples"], "inner_samples");
  if (j.contains("sgld")) parse_sgld(j["sgld"], c.sgld);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace gibbslab
