#include "lbbart/trace.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace lbbart {
namespace {

using nlohmann::json;

template <typename T>
std::vector<T> per_tree(const json& j, const char* key, std::size_t expected) {
  auto v = j.at(key).get<std::vector<T>>();
  if (v.size() != expected) {
    throw std::invalid_argument(std::string("field '") + key + "' has " + std::to_string(v.size()) +
                                " entries, expected " + std::to_string(expected));
  }
  return v;
}

}  // namespace

TraceFormatError::TraceFormatError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string to_json_line(const TraceRecord& r) {
  json j;
  j["chain"] = r.chain;
  j["iter"] = r.iter;
  j["n_leaves"] = r.n_leaves;
  j["delta"] = r.delta;
  j["depth"] = r.depth;
  j["log_lik"] = r.log_lik;
  j["sigma2"] = r.sigma2 ? json(*r.sigma2) : json(nullptr);
  j["missing_rate"] = r.missing_rate ? json(*r.missing_rate) : json(nullptr);
  j["misclassified"] = r.misclassified ? json(*r.misclassified) : json(nullptr);
  j["accepted"] = r.accepted;
  j["forced"] = r.forced;
  j["move"] = r.move;
  return j.dump();
}

TraceRecord parse_trace_line(std::string_view line, const std::string& source, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    TraceRecord r;
    r.chain = j.at("chain").get<int>();
    r.iter = j.at("iter").get<std::size_t>();
    r.n_leaves = j.at("n_leaves").get<std::vector<int>>();
    const std::size_t m = r.n_leaves.size();
    if (m == 0) throw std::invalid_argument("record has no trees");
    r.delta = per_tree<int>(j, "delta", m);
    r.depth = per_tree<int>(j, "depth", m);
    r.log_lik = j.at("log_lik").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("log_lik").get<double>();
    if (!j.at("sigma2").is_null()) r.sigma2 = j.at("sigma2").get<double>();
    if (!j.at("missing_rate").is_null()) r.missing_rate = j.at("missing_rate").get<double>();
    if (!j.at("misclassified").is_null()) r.misclassified = j.at("misclassified").get<std::size_t>();
    r.accepted = per_tree<bool>(j, "accepted", m);
    r.forced = per_tree<bool>(j, "forced", m);
    r.move = per_tree<std::string>(j, "move", m);
    for (int n : r.n_leaves) {
      if (n < 1) throw std::invalid_argument("n_leaves must be >= 1");
    }
    return r;
  } catch (const TraceFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw TraceFormatError(source, line_number, e.what());
  }
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace(out, records);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TraceRecord> read_trace(std::istream& in, const std::string& source) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_trace_line(line, source, number));
  }
  return out;
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trace(in, path.string());
}

}  // namespace lbbart
