#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace mlpsd {

using Json = nlohmann::ordered_json;

/// "%.17g"; enough digits for every double to round-trip.
std::string format_double(double v);

/// Compact one-line serialization with floating-point numbers written by
/// format_double. Non-finite numbers are written as null.
std::string dump_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

} // namespace mlpsd
