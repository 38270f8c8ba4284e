#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "gibbslab/core.hpp"

namespace gibbslab {

/// Role implied by a `*_source.csv` / `*_target.csv` file name, if any.
std::optional<Role> role_from_filename(const std::filesystem::path& path);

/// Reads a CSV with header `x0,...,x{d-1}`, one sample per row. The role is
/// `role` if given, else inferred from the file name.
Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Role> role = {});
Dataset parse_dataset_csv(std::istream& in, Role role);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// One hypothesis per row under header `w0,...`; `samples` is column-major.
void write_samples_csv(std::ostream& out, const Matrix& samples);
void write_samples_csv(const std::filesystem::path& path, const Matrix& samples);

}  // namespace gibbslab
