#pragma once

#include "misfit/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace misfit {

/// Reads a scenario file: INI sections [scenario], [covariates], [truth],
/// [fit], [checks] and one [estimator.<name>] per estimator, in file order.
/// Lists are comma-separated; rows of a matrix-like value are separated by
/// '|'. Covariate indices in the file count from 1. Throws ParseError.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);

/// Real number; accepts "inf", "-inf" and simple fractions such as "1/3".
double parse_number(std::string_view text);
std::vector<double> parse_number_list(std::string_view text);

/// Grid of raw feature points: either "lo:hi:count" ranges, one per
/// coordinate and comma-separated (tensor product), or explicit points
/// separated by '|' with coordinates separated by ','.
std::vector<Vector> parse_grid(std::string_view text, Eigen::Index dimension);

/// Grid from a file holding one point per line (comma-separated coordinates);
/// blank lines and lines starting with '#' are skipped.
std::vector<Vector> read_grid_file(const std::filesystem::path& path, Eigen::Index dimension);

}  // namespace misfit
