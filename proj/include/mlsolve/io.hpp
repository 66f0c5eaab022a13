#pragma once

// JSON artifacts: data vectors, solution files. Numbers are carried as
// decimal strings so exact parameters survive a round trip.

#include "mlsolve/certify.hpp"
#include "mlsolve/kinematics.hpp"
#include "mlsolve/models.hpp"

#include <optional>
#include <string>

namespace mlsolve {

/// Flat {"label": number} map. Integers, decimals and "p/q" strings are read exactly.
LabeledCounts parse_data(const std::string& json_text);
LabeledCounts read_data(const std::string& path);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

inline constexpr int solutions_format_version = 1;
inline constexpr int cache_format_version = 1;
inline constexpr const char* tool_version = "mlsolve 1.0";

/// A solutions file: the set plus the model it belongs to.
struct SolutionsFile {
    std::string model;
    std::string model_digest;
    SolutionSet set;
    std::optional<CertifySummary> summary;
};

std::string solutions_to_json(const SolutionSet& set, const ModelSpec& model,
                              const std::optional<CertifySummary>& summary = std::nullopt);
/// Throws FormatError on unknown versions and, when `model` is given, DataError
/// when the file belongs to another model.
SolutionsFile solutions_from_json(const std::string& text, const ModelSpec* model = nullptr);
void write_solutions(const SolutionSet& set, const ModelSpec& model, const std::string& path,
                     const std::optional<CertifySummary>& summary = std::nullopt);
SolutionsFile read_solutions(const std::string& path, const ModelSpec* model = nullptr);

/// Offline monodromy result for one model: generic parameters and all solutions there.
struct StartSystemCache {
    std::string model;
    std::string model_digest;
    std::vector<Complex> s_star;
    std::vector<std::vector<Complex>> solutions;
    std::uint64_t seed = 0;
    std::string tool = tool_version;
    std::optional<std::size_t> expected;
    bool complete = false;
    /// Linear models: real positive data and the solution in the domain there.
    std::optional<std::vector<Rational>> real_parameters;
    std::optional<std::vector<double>> real_start;
};

std::string cache_to_json(const StartSystemCache& cache);
StartSystemCache cache_from_json(const std::string& text);

} // namespace mlsolve
