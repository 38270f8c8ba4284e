#include "gibbslab/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "gibbslab/asymptotics.hpp"
#include "gibbslab/info.hpp"
#include "json.hpp"

namespace gibbslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string render(const Cell& c, bool exact) {
  return std::visit(
      [&](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, double>) {
          return exact ? fmt::format("{:.17g}", v) : fmt::format("{:.6g}", v);
        } else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) {
          return fmt::format("{}", v);
        } else {
          std::string s;
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ';';
            s += exact ? fmt::format("{}={:.17g}", v[i].first, v[i].second)
                       : fmt::format("{}={:.6g}", v[i].first, v[i].second);
          }
          return s;
        }
      },
      c);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::json to_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NamedValues>) {
          nlohmann::json obj = nlohmann::json::object();
          for (const auto& [k, x] : v) obj[k] = std::isfinite(x) ? nlohmann::json(x) : nullptr;
          return obj;
        } else if constexpr (std::is_same_v<T, double>) {
          return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
        } else {
          return v;
        }
      },
      c);
}

Cell num(double v) { return v; }
Cell count(std::int64_t v) { return v; }
Cell text(std::string_view v) { return std::string(v); }

struct PointContext {
  const ExperimentConfig& cfg;
  const GridPoint& p;
  GaussianMeanWorld world;
  std::uint64_t seed;
};

bool conjugate_defaults(const GridPoint& p) { return !p.gamma && !p.alpha; }

/// Effective γ (and α for the α-weighted algorithm) at a grid point.
std::pair<double, double> effective_params(GibbsAlgorithm alg, const GaussianMeanWorld& w,
                                           const GridPoint& p) {
  if (alg == GibbsAlgorithm::AlphaGibbs)
    return {p.gamma.value_or(w.alpha_gamma(p.m, p.n)), p.alpha.value_or(w.alpha_weight(p.m, p.n))};
  return {p.gamma.value_or(w.stage_two_gamma(p.m)), kNaN};
}

GaussianMeanWorld supervised_world(const GaussianMeanWorld& w) {
  GaussianMeanWorld s = w;
  s.d_phi = 0;
  s.d_c = w.d;
  s.mu_1_phi.reset();
  s.mu_2_c.reset();
  return s;
}

double closed_gen(GibbsAlgorithm alg, const GaussianMeanWorld& w, const GridPoint& p) {
  const auto [gamma, alpha] = effective_params(alg, w, p);
  if (alg == GibbsAlgorithm::AlphaGibbs) return gen_alpha_closed_weighted(w, p.m, p.n, gamma, alpha);
  const int dim = alg == GibbsAlgorithm::TwoStageGibbs ? w.d_c : w.d;
  if (gamma == 0.0) return 0.0;
  return 2.0 * dim * w.sigma_0_2 * w.sigma_t2 / (p.m * (w.sigma_0_2 + 1.0 / (2.0 * gamma)));
}

bool applicable(GibbsAlgorithm alg, const GridPoint& p) {
  return alg != GibbsAlgorithm::AlphaGibbs || p.n >= 1 || p.alpha.value_or(1.0) == 1.0;
}

void closed_form_rows(const PointContext& c, Table& t) {
  for (auto alg : c.cfg.algorithms) {
    if (!applicable(alg, c.p)) continue;
    const auto& w = c.world;
    const auto [gamma, alpha] = effective_params(alg, w, c.p);
    double iskl = kNaN, bias = kNaN, var = kNaN, total = kNaN;
    if (conjugate_defaults(c.p)) {
      switch (alg) {
        case GibbsAlgorithm::AlphaGibbs: {
          iskl = iskl_alpha(w, c.p.m, c.p.n) / (gamma * alpha);
          const auto e = excess_risk_alpha(w, c.p.m, c.p.n);
          bias = e.bias_sq;
          var = e.variance;
          total = e.total;
          break;
        }
        case GibbsAlgorithm::TwoStageGibbs:
        case GibbsAlgorithm::Supervised: {
          const auto ws = alg == GibbsAlgorithm::Supervised ? supervised_world(w) : w;
          iskl = iskl_beta(ws, c.p.m) / gamma;
          const auto e = excess_risk_two_stage(ws, c.p.m, c.p.n);
          bias = e.bias_sq_phi + e.bias_sq_c;
          var = e.variance_phi + e.variance_c;
          total = e.total;
          break;
        }
      }
    }
    t.add_row({text(to_string(alg)), count(c.p.m), count(c.p.n), count(w.d), count(w.d_c),
               num(gamma), num(alpha), num(closed_gen(alg, w, c.p)), num(iskl), num(bias),
               num(var), num(total)});
  }
}

void monte_carlo_rows(const PointContext& c, Table& t, PosteriorMode mode) {
  for (auto alg : c.cfg.algorithms) {
    if (!applicable(alg, c.p)) continue;
    GenOptions o;
    o.gamma = c.p.gamma;
    o.alpha = c.p.alpha;
    o.mode = mode;
    o.sgld = c.cfg.sgld;
    o.inner_samples = c.cfg.inner_samples;
    o.threads = c.cfg.threads;
    const auto g = estimate_gen(alg, c.world, c.p.m, c.p.n, c.cfg.trials, c.seed, o);
    const auto [gamma, alpha] = effective_params(alg, c.world, c.p);
    const double closed = closed_gen(alg, c.world, c.p);
    t.add_row({text(to_string(alg)), count(c.p.m), count(c.p.n), count(c.world.d), num(gamma),
               num(alpha), num(g.value), num(g.std_error),
               count(static_cast<std::int64_t>(g.trials)), num(closed),
               num(z_score(g.value, closed, g.std_error))});
  }
}

void bounds_rows(const PointContext& c, Table& t, RunReport& r) {
  for (auto alg : c.cfg.algorithms) {
    if (alg == GibbsAlgorithm::Supervised) continue;
    if (c.p.n < 1) continue;
    const auto checks = bounds_vs_gen(alg, c.world, c.p.m, c.p.n, c.cfg.trials, c.seed,
                                      c.cfg.threads);
    for (const auto& b : checks) {
      t.add_row({text(to_string(alg)), count(c.p.m), count(c.p.n), count(c.world.d),
                 text(b.label), text(b.regime), num(b.bound), count(b.certified ? 1 : 0),
                 num(b.gen_mc), num(b.std_error), count(b.holds ? 1 : 0)});
      if (!b.holds)
        r.failures.push_back(fmt::format("{} bound '{}' below gen at m={} n={} d={}",
                                         to_string(alg), b.label, c.p.m, c.p.n, c.world.d));
    }
  }
}

void asymptotics_rows(const PointContext& c, Table& t) {
  const auto& w = c.world;
  const GaussianLocationFamily family(w.d);
  const auto ps = w.source();
  const auto pt = w.target();
  const auto trials = c.cfg.trials;
  for (auto alg : c.cfg.algorithms) {
    MleAlgorithm mle = MleAlgorithm::Supervised;
    if (alg == GibbsAlgorithm::AlphaGibbs) mle = MleAlgorithm::AlphaWeighted;
    if (alg == GibbsAlgorithm::TwoStageGibbs) mle = MleAlgorithm::TwoStage;
    if (mle != MleAlgorithm::Supervised && c.p.n < 1) continue;
    const auto ex = excess_risk_decomposition(family, ps, pt, c.p.n, c.p.m, mle, trials, c.seed,
                                              w.d_phi, c.cfg.threads);
    double gen_it = kNaN, gen_ibar = kNaN;
    switch (mle) {
      case MleAlgorithm::Supervised: {
        const auto b = fisher_bundle(family, ps, pt, ex.w_t_star, 0, c.p.m, trials, c.seed);
        gen_it = gen_ibar = gen_alpha_mle(b, 0, c.p.m);
        break;
      }
      case MleAlgorithm::AlphaWeighted: {
        const auto b = fisher_bundle(family, ps, pt, ex.w_alg_star, c.p.n, c.p.m, trials, c.seed);
        gen_it = gen_alpha_mle(b, c.p.n, c.p.m, MleVariant::AppendixIt);
        gen_ibar = gen_alpha_mle(b, c.p.n, c.p.m, MleVariant::MainTextIbar);
        break;
      }
      case MleAlgorithm::TwoStage:
        gen_it = gen_ibar = gen_beta_mle(family, ex.w_alg_star.head(w.d_phi),
                                         ex.w_alg_star.tail(w.d_c), pt, c.p.m, trials, c.seed);
        break;
    }
    const auto emp = mle_gen_empirical(family, ps, pt, c.p.n, c.p.m, trials, c.seed, mle, w.d_phi,
                                       c.cfg.threads);
    t.add_row({text(to_string(mle)), count(c.p.m), count(c.p.n), count(w.d), num(ex.bias_sq),
               num(ex.variance), num(ex.total), num(ex.empirical_excess), num(gen_it),
               num(gen_ibar), num(emp.estimate), num(emp.std_error)});
  }
}

void validate_rows(const PointContext& c, Table& t, RunReport& r) {
  std::vector<ValidationResult> results;
  const int m = c.p.m, n = c.p.n;
  const auto trials = c.cfg.trials;
  const int th = c.cfg.threads;
  if (n >= 1) results.push_back(validate_theorem1(c.world, m, n, trials, c.seed, th));
  results.push_back(validate_theorem2(c.world, m, n, trials, c.seed, th));
  if (n >= 1) {
    results.push_back(validate_prop3(c.world, m, n, trials, c.seed, th));
    results.push_back(validate_theorem6(c.world, m, n, trials, c.seed, th));
  }
  results.push_back(validate_theorem7(c.world, m, n, trials, c.seed, th));
  for (const auto& v : results) {
    t.add_row({text(v.test), num(v.lhs), num(v.rhs), num(v.z), num(v.std_error),
               count(static_cast<std::int64_t>(v.trials)),
               Cell(v.seed), v.params});
    if (!(v.z <= c.cfg.z_threshold))
      r.failures.push_back(fmt::format("{} at m={} n={} d={}: z = {:.3g} > {}", v.test, m, n,
                                       c.world.d, v.z, c.cfg.z_threshold));
  }
}

std::vector<std::string> columns_for(Mode mode) {
  switch (mode) {
    case Mode::ClosedForm:
      return {"algorithm", "m", "n", "d", "d_c", "gamma", "alpha", "gen_closed",
              "iskl_over_gamma_alpha", "excess_bias_sq", "excess_variance", "excess_total"};
    case Mode::MonteCarlo:
    case Mode::SGLD:
      return {"algorithm", "m", "n", "d", "gamma", "alpha", "gen_mc", "std_error", "trials",
              "gen_closed", "z"};
    case Mode::Bounds:
      return {"algorithm", "m", "n", "d", "label", "regime", "bound", "certified", "gen_mc",
              "std_error", "holds"};
    case Mode::Asymptotics:
      return {"algorithm", "m", "n", "d", "bias_sq", "variance", "total", "empirical_excess",
              "gen_asymptotic", "gen_asymptotic_ibar", "gen_empirical", "std_error"};
    case Mode::Validate:
      return {"test", "lhs", "rhs", "z", "std_error", "trials", "seed", "params"};
  }
  return {};
}

}  // namespace

void Table::add_row(std::vector<Cell> row) {
  require(row.size() == columns.size(), ErrorCode::kInvalidArgument,
          fmt::format("row has {} cells, table has {} columns", row.size(), columns.size()));
  rows.push_back(std::move(row));
}

void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << csv_escape(table.columns[i]);
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(render(row[i], true));
    out << '\n';
  }
}

void write_json(const Table& table, std::ostream& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = to_json(row[i]);
    arr.push_back(std::move(obj));
  }
  out << arr.dump(2) << '\n';
}

void write_summary(const Table& table, std::ostream& out) {
  std::vector<std::size_t> width(table.columns.size());
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < width.size(); ++i) width[i] = table.columns[i].size();
  for (const auto& row : table.rows) {
    auto& r = cells.emplace_back();
    for (std::size_t i = 0; i < row.size(); ++i) {
      r.push_back(render(row[i], false));
      width[i] = std::max(width[i], r.back().size());
    }
  }
  auto line = [&](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{:<{}}  ", v[i], width[i]);
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out << s << '\n';
  };
  line(table.columns);
  for (const auto& r : cells) line(r);
}

void write_table(const Table& table, const std::string& path, OutputFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, fmt::format("cannot open '{}' for writing", path));
  if (format == OutputFormat::Csv)
    write_csv(table, out);
  else
    write_json(table, out);
  out.flush();
  if (!out) fail(ErrorCode::kIo, fmt::format("write to '{}' failed", path));
}

RunReport run_experiment(const ExperimentConfig& config, std::ostream& summary) {
  config.validate();
  RunReport report;
  report.table.columns = columns_for(config.mode);
  for (const auto& p : config.grid.points()) {
    const PointContext c{config, p, config.world.build(p.d), derive_seed(config.seed, p.index)};
    switch (config.mode) {
      case Mode::ClosedForm:
        closed_form_rows(c, report.table);
        break;
      case Mode::MonteCarlo:
        monte_carlo_rows(c, report.table, PosteriorMode::Exact);
        break;
      case Mode::SGLD:
        monte_carlo_rows(c, report.table, PosteriorMode::SGLD);
        break;
      case Mode::Bounds:
        bounds_rows(c, report.table, report);
        break;
      case Mode::Asymptotics:
        asymptotics_rows(c, report.table);
        break;
      case Mode::Validate:
        validate_rows(c, report.table, report);
        break;
    }
  }
  if (!config.output_path.empty()) write_table(report.table, config.output_path, config.format);

  summary << fmt::format("mode {}  grid points {}  trials {}  seed {}\n", to_string(config.mode),
                         config.grid.points().size(), config.trials, config.seed);
  write_summary(report.table, summary);
  for (const auto& f : report.failures) summary << "FAIL " << f << '\n';
  report.exit_code = report.failures.empty() ? kExitOk : kExitValidationFailure;
  return report;
}

}  // namespace gibbslab
