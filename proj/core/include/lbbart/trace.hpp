#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lbbart {

// One MCMC iteration of one chain. Iteration 0 is the starting state. Per-tree
// vectors have one entry per tree in the ensemble.
struct TraceRecord {
  int chain = 0;
  std::size_t iter = 0;
  std::vector<int> n_leaves;
  std::vector<int> delta;
  std::vector<int> depth;
  double log_lik = 0.0;
  std::optional<double> sigma2;
  std::optional<double> missing_rate;
  std::optional<std::size_t> misclassified;
  std::vector<bool> accepted;
  std::vector<bool> forced;  // forced self-transition (no admissible proposal)
  std::vector<std::string> move;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string to_json_line(const TraceRecord& record);
TraceRecord parse_trace_line(std::string_view line, const std::string& source = "<string>",
                             std::size_t line_number = 1);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

// Blank lines are skipped; malformed records throw TraceFormatError naming
// the line.
std::vector<TraceRecord> read_trace(std::istream& in, const std::string& source = "<stream>");
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

}  // namespace lbbart
