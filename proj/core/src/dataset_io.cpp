#include "gibbslab/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace gibbslab {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, int line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    fail(ErrorCode::kIo, fmt::format("line {}: '{}' is not a number", line_no, s));
  return v;
}

std::string format_row(const Eigen::Ref<const Vector>& v) {
  std::string row;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) row += ',';
    row += fmt::format("{:.17g}", v[i]);
  }
  return row;
}

void write_header(std::ostream& out, char prefix, Eigen::Index d) {
  for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << prefix << i;
  out << '\n';
}

}  // namespace

std::optional<Role> role_from_filename(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("_source.csv")) return Role::Source;
  if (ends_with("_target.csv")) return Role::Target;
  return std::nullopt;
}

Dataset parse_dataset_csv(std::istream& in, Role role) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kIo, "missing CSV header");
  const auto header = split_fields(line);
  const int d = static_cast<int>(header.size());
  for (int i = 0; i < d; ++i)
    if (header[i] != fmt::format("x{}", i))
      fail(ErrorCode::kIo, fmt::format("header column {} is '{}', expected 'x{}'", i, header[i], i));
  std::vector<Vector> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (static_cast<int>(fields.size()) != d)
      fail(ErrorCode::kDimMismatch,
           fmt::format("line {}: {} fields, header has {}", line_no, fields.size(), d));
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = parse_double(fields[i], line_no);
    rows.push_back(std::move(v));
  }
  return Dataset::from_rows(rows, role, d);
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Role> role) {
  if (!role) role = role_from_filename(path);
  if (!role)
    fail(ErrorCode::kIo, fmt::format("{}: cannot infer source/target role from file name",
                                     path.string()));
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, fmt::format("{}: cannot open for reading", path.string()));
  try {
    return parse_dataset_csv(in, *role);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  write_header(out, 'x', data.dim());
  for (int j = 0; j < data.count(); ++j) out << format_row(data.sample(j)) << '\n';
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, fmt::format("{}: cannot open for writing", path.string()));
  write_dataset_csv(out, data);
}

void write_samples_csv(std::ostream& out, const Matrix& samples) {
  write_header(out, 'w', samples.rows());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out << format_row(samples.col(j)) << '\n';
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, fmt::format("{}: cannot open for writing", path.string()));
  write_samples_csv(out, samples);
}

}  // namespace gibbslab
