#pragma once

// Science data products: geo-tagged sample records, the newline-delimited
// log and tabular export, per-cast profiles and depth-binned summaries.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aps/controller.hpp"
#include "aps/geo.hpp"

namespace aps {

struct SampleRecord {
  double timestamp = 0.0;  // s since scenario start
  GeoPoint position{};
  double depth = 0.0;      // m, measured
  ControllerMode mode = ControllerMode::Idle;
  std::map<std::string, double> values;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline nlohmann::json to_json(const SampleRecord& r) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : r.values) values[k] = v;
  return {{"t", r.timestamp}, {"lat", r.position.lat},       {"lon", r.position.lon},
          {"depth", r.depth}, {"mode", to_string(r.mode)}, {"values", std::move(values)}};
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.timestamp = j.at("t").get<double>();
  r.position = {j.at("lat").get<double>(), j.at("lon").get<double>()};
  r.depth = j.at("depth").get<double>();
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  for (const auto& [k, v] : j.at("values").items()) r.values.emplace(k, v.get<double>());
  return r;
}

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

// Time-ordered record log with an optional newline-delimited file sink.
class SampleLog {
 public:
  SampleLog() = default;

  SampleLog(const std::string& path, std::size_t flush_every = 16)
      : sink_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)),
        flush_every_(std::max<std::size_t>(1, flush_every)) {
    if (!*sink_) throw std::runtime_error("cannot open log file " + path);
  }

  void append(SampleRecord record) {
    if (!records_.empty() && !(record.timestamp > records_.back().timestamp)) {
      throw std::invalid_argument("out-of-order sample timestamp " +
                                  format_number(record.timestamp) + " (last " +
                                  format_number(records_.back().timestamp) + ")");
    }
    if (record.depth < 0.0) throw std::invalid_argument("sample depth must be >= 0");
    if (sink_) {
      *sink_ << to_json(record).dump() << '\n';
      if (++unflushed_ >= flush_every_) flush();
    }
    records_.push_back(std::move(record));
  }

  void flush() {
    if (sink_) sink_->flush();
    unflushed_ = 0;
  }

  void close() {
    if (sink_) {
      sink_->flush();
      sink_->close();
      sink_.reset();
    }
  }

  [[nodiscard]] const std::vector<SampleRecord>& records() const { return records_; }
  [[nodiscard]] std::size_t size() const { return records_.size(); }

 private:
  std::vector<SampleRecord> records_;
  std::unique_ptr<std::ofstream> sink_;
  std::size_t flush_every_ = 16;
  std::size_t unflushed_ = 0;
};

inline std::vector<SampleRecord> read_log(std::istream& in) {
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SampleRecord> read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open log file " + path);
  return read_log(in);
}

/// Comma-separated export: timestamp, lat, lon, depth, mode, then the
/// parameters in alphabetical order.
inline void write_csv(std::ostream& out, const std::vector<SampleRecord>& records) {
  std::vector<std::string> params;
  if (!records.empty()) {
    for (const auto& [k, v] : records.front().values) params.push_back(k);
  }
  out << "timestamp,lat,lon,depth,mode";
  for (const auto& p : params) out << ',' << p;
  out << '\n';
  for (const auto& r : records) {
    out << format_number(r.timestamp) << ',' << format_number(r.position.lat) << ','
        << format_number(r.position.lon) << ',' << format_number(r.depth) << ','
        << to_string(r.mode);
    for (const auto& p : params) {
      auto it = r.values.find(p);
      out << ',' << (it == r.values.end() ? std::string{} : format_number(it->second));
    }
    out << '\n';
  }
}

struct Profile {
  int station_id = 0;
  std::vector<SampleRecord> samples;
  bool interrupted = false;  // ended in Fault or by the log ending mid-cast

  [[nodiscard]] double max_depth() const {
    double d = 0.0;
    for (const auto& s : samples) d = std::max(d, s.depth);
    return d;
  }
};

/// Splits a time-ordered record stream into casts. A cast is a Deploying or
/// Retrieving run followed by Holding records; it is kept when it reached
/// Holding, was cut short by a Fault, or is still open when the log ends.
inline std::vector<Profile> assemble_profiles(const std::vector<SampleRecord>& records) {
  std::vector<Profile> profiles;
  std::optional<Profile> current;
  bool held = false;
  bool at_station = false;
  int station = -1;

  auto close = [&](bool keep) {
    if (current && keep && !current->samples.empty()) profiles.push_back(std::move(*current));
    current.reset();
    held = false;
  };

  for (const auto& r : records) {
    switch (r.mode) {
      case ControllerMode::Deploying:
      case ControllerMode::Retrieving:
        if (!at_station) {
          at_station = true;
          ++station;
        }
        if (current && held) close(true);
        if (!current) current = Profile{station, {}, false};
        current->samples.push_back(r);
        break;
      case ControllerMode::Holding:
        if (!current) {
          if (!at_station) {
            at_station = true;
            ++station;
          }
          current = Profile{station, {}, false};
        }
        current->samples.push_back(r);
        held = true;
        break;
      case ControllerMode::Fault:
        if (current) current->interrupted = true;
        close(true);
        break;
      case ControllerMode::Underway:
      case ControllerMode::Idle:
        close(held);
        at_station = false;
        break;
    }
  }
  // A log that stops mid-cast (run ended by a fault) keeps the partial cast.
  if (current && !held) current->interrupted = true;
  close(true);
  return profiles;
}

struct DepthBin {
  double depth_lo = 0.0;
  double depth_hi = 0.0;
  std::size_t count = 0;
  double mean = 0.0;    // of normalized values
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

struct DepthSummary {
  std::string parameter;
  double raw_min = 0.0;
  double raw_max = 0.0;
  bool degenerate = false;  // constant parameter: normalization undefined
  std::vector<DepthBin> bins;
};

/// Min-max normalizes `parameter` over the dataset and bins it by depth.
inline DepthSummary depth_normalized_summary(const std::vector<SampleRecord>& records,
                                             const std::string& parameter,
                                             double bin_width = 0.5) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be > 0");
  if (records.size() < 2) throw std::invalid_argument("need at least 2 records to normalize");

  DepthSummary summary;
  summary.parameter = parameter;
  std::vector<double> raw;
  raw.reserve(records.size());
  for (const auto& r : records) {
    auto it = r.values.find(parameter);
    if (it == r.values.end()) {
      throw std::invalid_argument("record at t=" + format_number(r.timestamp) +
                                  " lacks parameter '" + parameter + "'");
    }
    raw.push_back(it->second);
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  summary.raw_min = *lo;
  summary.raw_max = *hi;
  const double range = summary.raw_max - summary.raw_min;
  summary.degenerate = !(range > 0.0);

  std::map<long, std::vector<double>> binned;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double norm = summary.degenerate ? 0.5 : (raw[i] - summary.raw_min) / range;
    binned[static_cast<long>(std::floor(records[i].depth / bin_width))].push_back(norm);
  }
  for (const auto& [index, values] : binned) {
    DepthBin bin;
    bin.depth_lo = static_cast<double>(index) * bin_width;
    bin.depth_hi = bin.depth_lo + bin_width;
    bin.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    bin.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - bin.mean) * (v - bin.mean);
    bin.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    bin.min = *mn;
    bin.max = *mx;
    summary.bins.push_back(bin);
  }
  return summary;
}

inline void write_summary_csv(std::ostream& out, const DepthSummary& s) {
  out << "depth_lo,depth_hi,count,mean,stddev,min,max\n";
  for (const auto& b : s.bins) {
    out << format_number(b.depth_lo) << ',' << format_number(b.depth_hi) << ',' << b.count << ','
        << format_number(b.mean) << ',' << format_number(b.stddev) << ',' << format_number(b.min)
        << ',' << format_number(b.max) << '\n';
  }
}

inline void write_profiles_csv(std::ostream& out, const std::vector<Profile>& profiles) {
  std::vector<std::string> params;
  if (!profiles.empty() && !profiles.front().samples.empty()) {
    for (const auto& [k, v] : profiles.front().samples.front().values) params.push_back(k);
  }
  out << "profile,station,interrupted,timestamp,depth,mode";
  for (const auto& p : params) out << ',' << p;
  out << '\n';
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (const auto& r : profiles[i].samples) {
      out << i << ',' << profiles[i].station_id << ',' << (profiles[i].interrupted ? 1 : 0) << ','
          << format_number(r.timestamp) << ',' << format_number(r.depth) << ','
          << to_string(r.mode);
      for (const auto& p : params) {
        auto it = r.values.find(p);
        out << ',' << (it == r.values.end() ? std::string{} : format_number(it->second));
      }
      out << '\n';
    }
  }
}

}  // namespace aps
