#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "betaips/core.hpp"

namespace betaips {

// Dataset CSV: header x_0,...,x_{d-1},action,reward,propensity; one
// interaction per row. `num_actions` defaults to max(action) + 1.
//
// Throws ParseError (1-based data row, offending column) on malformed input
// and CommonSupportViolation for propensity <= 0.
LoggedDataset read_dataset(const std::filesystem::path& path,
                           std::optional<std::size_t> num_actions = {});
LoggedDataset parse_dataset(std::string_view text,
                            std::optional<std::size_t> num_actions = {});
void write_dataset(const std::filesystem::path& path, const LoggedDataset& data);
std::string format_dataset(const LoggedDataset& data);

// Policy file: first line "K,d", then K rows of d weights.
LinearSoftmaxPolicy read_policy(const std::filesystem::path& path);
void write_policy(const std::filesystem::path& path,
                  const LinearSoftmaxPolicy& policy);

inline constexpr std::string_view kResultsHeader =
    "experiment,estimator,seed,epoch,k_actions,inv_temperature,n_logged,"
    "metric_name,metric_value";

// Allowed metric_name values.
inline constexpr std::string_view kMetricNames[] = {
    "test_value", "grad_variance", "mse",      "bias_sq",
    "est_variance", "rel_abs_error", "beta_used"};

struct ResultRecord {
  std::string experiment;
  std::string estimator;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epoch;
  std::optional<std::size_t> k_actions;
  std::optional<double> inv_temperature;
  std::optional<std::size_t> n_logged;
  std::string metric_name;
  double metric_value = 0.0;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

// Throws ContractViolation for a metric name outside kMetricNames.
std::string format_results(std::span<const ResultRecord> records);
void write_results(const std::filesystem::path& path,
                   std::span<const ResultRecord> records);
std::vector<ResultRecord> read_results(const std::filesystem::path& path);

// Shortest decimal string that round-trips to the same double.
std::string format_real(double value);

// Writes via a sibling temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace betaips
