#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gibbslab/gaussian_world.hpp"
#include "gibbslab/harness.hpp"
#include "gibbslab/samplers.hpp"

namespace gibbslab {

enum class Mode { ClosedForm, MonteCarlo, SGLD, Bounds, Asymptotics, Validate };
enum class OutputFormat { Csv, Json };

std::string_view to_string(Mode m);
/// Accepts "ClosedForm" style names and "closed-form" style aliases.
std::optional<Mode> mode_from_string(std::string_view s);
std::optional<OutputFormat> format_from_string(std::string_view s);
std::optional<GibbsAlgorithm> algorithm_from_string(std::string_view s);

/// World parameters; vector fields given as a scalar are broadcast to d.
struct WorldSpec {
  std::vector<double> mu_s{0.0};
  std::vector<double> mu_t{0.0};
  std::vector<double> mu_0{0.0};
  double sigma_s2 = 1.0;
  double sigma_t2 = 1.0;
  double sigma_0_2 = 1.0;
  double sigma2 = 1.0;
  int d_phi = 0;

  GaussianMeanWorld build(int d) const;
};

struct GridPoint {
  std::uint64_t index = 0;
  int m = 1;
  int n = 1;
  int d = 1;
  std::optional<double> gamma;
  std::optional<double> alpha;
};

/// Cartesian product of the listed values; empty gamma/alpha lists mean the
/// conjugate defaults.
struct GridSpec {
  std::vector<int> m{1};
  std::vector<int> n{1};
  std::vector<int> d{1};
  std::vector<double> gamma;
  std::vector<double> alpha;

  std::vector<GridPoint> points() const;
};

struct ExperimentConfig {
  WorldSpec world;
  GridSpec grid;
  std::vector<GibbsAlgorithm> algorithms{GibbsAlgorithm::AlphaGibbs};
  std::uint64_t trials = 10000;
  std::uint64_t seed = 0;
  Mode mode = Mode::ClosedForm;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  /// Validation fails when any z exceeds this.
  double z_threshold = 4.0;
  int threads = 0;
  int inner_samples = 1000;
  SgldConfig sgld;

  /// Throws config errors naming the offending field.
  void validate() const;
};

/// Parses a JSON document whose keys mirror the ExperimentConfig fields.
/// Unknown keys and type mismatches are config errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace gibbslab
