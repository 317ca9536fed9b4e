#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mfbsde/constants.hpp"
#include "mfbsde/reflect.hpp"

namespace mfbsde {

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Resolved experiment configuration.
///
/// JSON layout (every key optional except `scenario`; unknown keys are rejected):
///
///     {
///       "scenario": "A_sine_constraint" | { inline scenario },
///       "grid": {"T": 1.0, "n": 64},
///       "ensemble": {"N": 100000, "seed": 1, "antithetic": true},
///       "backend": {"kind": "regression" | "lattice", "degree": 3},
///       "mode": "lipschitz" | "quadratic",
///       "picard": {"tol": 1e-4, "max_iter": 50, "slots": "implicit_y", "a_tilde": 0.0, "loss_tol": 1e-10},
///       "stitch": {"enabled": false, "intervals": 0},
///       "tolerances": {"constraint": 0.01, "flatness": 0.001},
///       "workers": 1,
///       "debug": {"inflate_k": 0.0},
///       "output": "out"
///     }
struct RunConfig {
    std::string scenario_name;
    ScenarioSpec scenario;
    std::size_t n = 64;
    std::size_t N = 100000;
    std::uint64_t seed = 1;
    bool antithetic = true;
    std::string backend = "regression";
    int degree = 3;
    std::optional<double> picard_tol;
    int max_iter = 50;
    std::optional<SlotPolicy> slots;
    double a_tilde = 0.0;
    double loss_tol = kLossTolerance;
    bool stitch = false;
    std::size_t intervals = 0;
    std::optional<double> eps_constraint;
    std::optional<double> eps_flat;
    unsigned workers = 1;
    double inflate_k = 0.0;
    std::string output;

    /// Every field with defaults filled in; embedded in summaries.
    nlohmann::json resolved() const;
};

RunConfig parse_config(const nlohmann::json& json);
/// Reads and parses a file; throws ConfigError on I/O or syntax errors.
RunConfig load_config(const std::string& path);

nlohmann::json scenario_to_json(const ScenarioSpec& scenario);
ScenarioSpec scenario_from_json(const nlohmann::json& json);

std::string to_string(SlotPolicy policy);
SlotPolicy parse_slots(const std::string& text);

/// Hex SHA-1 of "blob <size>\0<content>", as computed by git for file contents.
std::string git_blob_sha1(const std::string& content);
/// git_blob_sha1 of the scenario's canonical JSON.
std::string scenario_hash(const ScenarioSpec& scenario);

nlohmann::json constants_to_json(const ConstantsReport& report);

}  // namespace mfbsde
