#pragma once

// Versioned JSON model files:
//   {format_version, model_type: "bods"|"gods"|"kgods", d, K, eta, nu, C,
//    normalize_rows, slack, W1, b1, W2, b2, seed, trained_n[, kernel_ridge]}
// W1/W2 are d x K matrices flattened row-major. Doubles are written in the
// shortest form that parses back to the identical value.

#include <filesystem>
#include <string>

#include "godsbox/models.hpp"

namespace godsbox::model_io {

inline constexpr int kFormatVersion = 1;

std::string to_json(const models::AnyModel& model, int indent = 2);
/// Throws ValidationError on schema violations (missing fields, wrong sizes,
/// unknown model type or version, non-orthonormal frames).
models::AnyModel from_json(const std::string& text);

void save(const std::filesystem::path& path, const models::AnyModel& model);
/// Throws IoError naming the path when it cannot be read.
models::AnyModel load(const std::filesystem::path& path);

std::string model_type(const models::AnyModel& model);

}  // namespace godsbox::model_io
