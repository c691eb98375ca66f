#pragma once

#include <iosfwd>
#include <string>

#include "nplme/models.hpp"

namespace nplme {

/// Reads a dataset CSV: optional '#' comment lines, a header row naming
/// `w,y` and optionally `x` and `group` (any order), then one row per
/// observation. Non-finite or unparsable values are rejected with the
/// 1-based data row index.
Dataset read_dataset_csv(std::istream& in, const std::string& origin = "<stream>");
Dataset read_dataset_csv_file(const std::string& path);

/// Writes `# seed=...,config_hash=...` followed by `w,y[,x][,group]` rows
/// at round-trip precision.
void write_dataset_csv(std::ostream& out, const Dataset& d);
void write_dataset_csv_file(const std::string& path, const Dataset& d);

/// Shortest decimal that round-trips the double.
std::string format_double(double v);

}  // namespace nplme
