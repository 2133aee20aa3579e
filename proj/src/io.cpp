#include "betaips/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "betaips/errors.hpp"

namespace betaips {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  // Trailing blank lines are tolerated.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

bool parse_real(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(std::string_view field, Int& out) {
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::string row_error(std::size_t row, std::string_view column, std::string_view what) {
  return "row " + std::to_string(row) + ", column '" + std::string(column) +
         "': " + std::string(what);
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

LoggedDataset parse_dataset(std::string_view text,
                            std::optional<std::size_t> num_actions) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(0, "", "dataset file is empty (no header)");
  const auto header = split_fields(lines[0]);
  // Context columns first, then the three required columns in order.
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x_" + std::to_string(d)) ++d;
  if (d == 0) throw ParseError(0, "x_0", "header has no context columns x_0,...");
  const char* required[] = {"action", "reward", "propensity"};
  for (std::size_t j = 0; j < 3; ++j) {
    if (header.size() <= d + j || header[d + j] != required[j]) {
      throw ParseError(0, required[j],
                       "header is missing column '" + std::string(required[j]) +
                           "' (expected x_0,...,x_" + std::to_string(d - 1) +
                           ",action,reward,propensity)");
    }
  }
  if (header.size() != d + 3) {
    throw ParseError(0, std::string(header[d + 3]),
                     "unexpected extra header column '" + std::string(header[d + 3]) + "'");
  }

  struct Row {
    Vector x;
    std::size_t action;
    double reward;
    double propensity;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  std::size_t max_action = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != d + 3) {
      throw ParseError(row, fields.size() < d + 3 ? std::string(header[fields.size()]) : "",
                       row_error(row, fields.size() < d + 3 ? header[fields.size()] : "",
                                 "expected " + std::to_string(d + 3) + " fields, found " +
                                     std::to_string(fields.size())));
    }
    Row r{Vector(static_cast<Eigen::Index>(d)), 0, 0.0, 0.0};
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_real(fields[j], r.x[static_cast<Eigen::Index>(j)])) {
        throw ParseError(row, std::string(header[j]),
                         row_error(row, header[j], "not a finite number: '" +
                                                       std::string(fields[j]) + "'"));
      }
    }
    if (!parse_int(fields[d], r.action)) {
      throw ParseError(row, "action",
                       row_error(row, "action", "not a non-negative integer: '" +
                                                    std::string(fields[d]) + "'"));
    }
    if (!parse_real(fields[d + 1], r.reward)) {
      throw ParseError(row, "reward",
                       row_error(row, "reward", "not a finite number: '" +
                                                    std::string(fields[d + 1]) + "'"));
    }
    if (!parse_real(fields[d + 2], r.propensity)) {
      throw ParseError(row, "propensity",
                       row_error(row, "propensity", "not a finite number: '" +
                                                        std::string(fields[d + 2]) + "'"));
    }
    if (!(r.propensity > 0.0)) {
      throw CommonSupportViolation(
          row, "propensity",
          row_error(row, "propensity",
                    "propensity " + std::string(fields[d + 2]) +
                        " <= 0 violates the common-support assumption (every "
                        "logged action must have positive logging probability)"));
    }
    if (r.propensity > 1.0) {
      throw ParseError(row, "propensity",
                       row_error(row, "propensity", "propensity exceeds 1"));
    }
    if (num_actions && r.action >= *num_actions) {
      throw ParseError(row, "action",
                       row_error(row, "action", "action " + std::to_string(r.action) +
                                                    " out of range for K=" +
                                                    std::to_string(*num_actions)));
    }
    max_action = std::max(max_action, r.action);
    rows.push_back(std::move(r));
  }
  LoggedDataset data(d, num_actions.value_or(max_action + 1));
  data.reserve(rows.size());
  for (const Row& r : rows) data.add(r.x, r.action, r.reward, r.propensity);
  return data;
}

LoggedDataset read_dataset(const std::filesystem::path& path,
                           std::optional<std::size_t> num_actions) {
  return parse_dataset(read_text_file(path), num_actions);
}

std::string format_dataset(const LoggedDataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.context_dim(); ++j) {
    out += "x_" + std::to_string(j) + ",";
  }
  out += "action,reward,propensity\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.context(i);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      out += format_real(x[j]);
      out += ',';
    }
    out += std::to_string(data.action(i));
    out += ',';
    out += format_real(data.reward(i));
    out += ',';
    out += format_real(data.propensity(i));
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const LoggedDataset& data) {
  write_text_file(path, format_dataset(data));
}

LinearSoftmaxPolicy read_policy(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(0, "", "policy file is empty");
  const auto shape = split_fields(lines[0]);
  std::size_t k = 0;
  std::size_t d = 0;
  if (shape.size() != 2 || !parse_int(shape[0], k) || !parse_int(shape[1], d) ||
      k == 0 || d == 0) {
    throw ParseError(0, "", "policy header must be 'K,d' with positive integers");
  }
  if (lines.size() != k + 1) {
    throw ParseError(0, "", "policy file declares K=" + std::to_string(k) + " but has " +
                                std::to_string(lines.size() - 1) + " weight rows");
  }
  Matrix weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < k; ++a) {
    const auto fields = split_fields(lines[a + 1]);
    if (fields.size() != d) {
      throw ParseError(a + 1, "", "policy row " + std::to_string(a + 1) + " has " +
                                      std::to_string(fields.size()) + " values, expected " +
                                      std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      if (!parse_real(fields[j], v)) {
        throw ParseError(a + 1, std::to_string(j),
                         "policy row " + std::to_string(a + 1) + ": bad weight '" +
                             std::string(fields[j]) + "'");
      }
      weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return LinearSoftmaxPolicy(std::move(weights));
}

void write_policy(const std::filesystem::path& path,
                  const LinearSoftmaxPolicy& policy) {
  std::string out = std::to_string(policy.num_actions()) + "," +
                    std::to_string(policy.context_dim()) + "\n";
  const Matrix& w = policy.weights();
  for (Eigen::Index a = 0; a < w.rows(); ++a) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_real(w(a, j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::string format_results(std::span<const ResultRecord> records) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const ResultRecord& r : records) {
    if (std::find(std::begin(kMetricNames), std::end(kMetricNames), r.metric_name) ==
        std::end(kMetricNames)) {
      throw ContractViolation("unknown metric_name '" + r.metric_name + "'");
    }
    out += r.experiment + ',' + r.estimator + ',' + std::to_string(r.seed) + ',';
    if (r.epoch) out += std::to_string(*r.epoch);
    out += ',';
    if (r.k_actions) out += std::to_string(*r.k_actions);
    out += ',';
    if (r.inv_temperature) out += format_real(*r.inv_temperature);
    out += ',';
    if (r.n_logged) out += std::to_string(*r.n_logged);
    out += ',' + r.metric_name + ',' + format_real(r.metric_value) + '\n';
  }
  return out;
}

void write_results(const std::filesystem::path& path,
                   std::span<const ResultRecord> records) {
  write_text_file(path, format_results(records));
}

std::vector<ResultRecord> read_results(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != kResultsHeader) {
    throw ParseError(0, "", "results file header does not match the schema");
  }
  std::vector<ResultRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    if (f.size() != 9) throw ParseError(li, "", row_error(li, "", "expected 9 fields"));
    ResultRecord r;
    r.experiment = f[0];
    r.estimator = f[1];
    auto opt_size = [&](std::string_view s, const char* col) -> std::optional<std::size_t> {
      if (s.empty()) return std::nullopt;
      std::size_t v = 0;
      if (!parse_int(s, v)) throw ParseError(li, col, row_error(li, col, "bad integer"));
      return v;
    };
    if (!parse_int(f[2], r.seed)) throw ParseError(li, "seed", row_error(li, "seed", "bad seed"));
    r.epoch = opt_size(f[3], "epoch");
    r.k_actions = opt_size(f[4], "k_actions");
    if (!f[5].empty()) {
      double t = 0.0;
      if (!parse_real(f[5], t)) {
        throw ParseError(li, "inv_temperature", row_error(li, "inv_temperature", "bad number"));
      }
      r.inv_temperature = t;
    }
    r.n_logged = opt_size(f[6], "n_logged");
    r.metric_name = f[7];
    // NaN is a legitimate metric value (e.g. no oracle).
    if (f[8] == "nan" || f[8] == "-nan") {
      r.metric_value = std::nan("");
    } else if (!parse_real(f[8], r.metric_value)) {
      throw ParseError(li, "metric_value", row_error(li, "metric_value", "bad number"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace betaips
