#include "vsop3d/io/metrics_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vsop3d {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<EpisodeRecord>& timeline, std::uint64_t seed) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : timeline) {
    out += std::to_string(r.step) + "," + to_string(r.split) + "," + r.env + "," + std::to_string(seed) + "," +
           format_double(r.episodic_return) + "," + format_double(r.normalized_return) + "\n";
  }
  return out;
}

namespace {

template <typename T>
bool parse_number(const std::string& field, T& out) {
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

MetricsCsv parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) throw std::runtime_error("metrics CSV header is '" + line + "'");
  MetricsCsv out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    MetricRow row;
    bool ok = f.size() == 6 && parse_number(f[0], row.step) && (f[1] == "train" || f[1] == "test") &&
              !f[2].empty() && parse_number(f[3], row.seed) && parse_number(f[4], row.episodic_return) &&
              parse_number(f[5], row.normalized_return);
    ok = ok && std::isfinite(row.episodic_return) && std::isfinite(row.normalized_return);
    if (!ok) {
      ++out.skipped_rows;
      continue;
    }
    row.split = f[1] == "train" ? Split::kTrain : Split::kTest;
    row.env = f[2];
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string update_stats_json(const std::vector<UpdateRecord>& updates) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& u = updates[i];
    out.push_back({{"update", i + 1},
                   {"step", u.step},
                   {"policy_loss", u.stats.policy_loss},
                   {"value_loss", u.stats.value_loss},
                   {"entropy", u.stats.entropy},
                   {"grad_norm", u.stats.grad_norm},
                   {"approx_kl", u.stats.approx_kl}});
  }
  return out.dump(1) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace vsop3d
