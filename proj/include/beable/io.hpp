#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "beable/analysis.hpp"

namespace beable {

using Json = nlohmann::json;

/// {"dim": n, "data": [[re, im], ...]} with n * n row-major entries.
Json matrix_to_json(const CMatrix& m);
/// Also accepts real numbers in place of [re, im] pairs. ConfigError on malformed input.
CMatrix matrix_from_json(const Json& j);
HermitianOperator operator_from_json(const Json& j);

/// {"dim": n, "data": [[re, im], ...]} with n entries.
Json vector_to_json(const CVector& v);
CVector vector_from_json(const Json& j);
/// Normalizes the amplitudes when `normalize` is set, otherwise requires unit norm.
StateVector state_from_json(const Json& j, bool normalize = false);

/// {"dim", "cells", "labels", "resolution", "exhaustive"}. Index cells are
/// integer arrays; basis cells are arrays of column vectors of [re, im] pairs.
Json family_to_json(const ProjectorFamily& f);
ProjectorFamily family_from_json(const Json& j);

enum class OutputFormat { Csv, Json };
OutputFormat parse_format(const std::string& name);
const char* extension(OutputFormat format);

/// trajectory_id, event_time, from_index, to_index. Each trajectory starts
/// with a row at t0 whose from_index is -1 and to_index the initial index.
std::string trajectories_text(const std::vector<JumpTrajectory>& ensemble, OutputFormat format);
/// time, index, frequency.
std::string occupancy_text(const OccupancyStats& stats, OutputFormat format);
/// Column-named table: CSV header row, or a JSON object of arrays.
std::string table_text(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
                       OutputFormat format);

/// Shortest round-trip decimal form of a double.
std::string format_number(double x);

/// Writes through a temporary sibling file and renames it into place.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace beable
