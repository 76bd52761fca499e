#include "mmhp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_real(const std::string& text, std::size_t line_number) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(value)) {
    fail(ErrorCode::invalid_input,
         "line " + std::to_string(line_number) + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

// Reads the data rows of a CSV whose header must equal `expected`.
std::vector<std::vector<double>> read_rows(std::istream& in, const std::vector<std::string>& expected) {
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_fields(content);
    if (!have_header) {
      if (fields != expected) {
        std::string header;
        for (const auto& name : expected) header += (header.empty() ? "" : ",") + name;
        fail(ErrorCode::invalid_input, "line " + std::to_string(line_number) + ": expected header '" +
                                           header + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      fail(ErrorCode::invalid_input, "line " + std::to_string(line_number) + ": expected " +
                                         std::to_string(expected.size()) + " fields");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& field : fields) row.push_back(parse_real(field, line_number));
    rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorCode::invalid_input, "missing CSV header");
  return rows;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::invalid_input, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) {
    fail(ErrorCode::invalid_state, "result row has the wrong number of columns");
  }
  rows.push_back(std::move(row));
}

void ResultTable::write_csv(std::ostream& out) const {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c == 0 ? "" : ",") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c == 0 ? "" : ",") << format_real(row[c]);
    out << '\n';
  }
}

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

EventTimes read_events_csv(std::istream& in) {
  const auto rows = read_rows(in, {"t"});
  EventTimes events;
  events.times.reserve(rows.size());
  double previous_raw = -1.0;
  std::size_t repeats = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double raw = rows[k][0];
    if (raw < 0.0) {
      fail(ErrorCode::invalid_input, "event " + std::to_string(k + 1) + " has a negative time");
    }
    if (k > 0 && raw == previous_raw) {
      ++repeats;
    } else if (k > 0 && raw < previous_raw) {
      fail(ErrorCode::invalid_input, "event " + std::to_string(k + 1) + " is earlier than its predecessor");
    } else {
      repeats = 0;
    }
    previous_raw = raw;
    events.times.push_back(raw + static_cast<double>(repeats) * 1e-9);
  }
  events.validate();
  return events;
}

EventTimes read_events_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_events_csv(in);
}

CountSeries read_counts_csv(std::istream& in, double rescale, std::optional<double> bin_width) {
  if (!(rescale > 0.0) || !std::isfinite(rescale)) {
    fail(ErrorCode::invalid_input, "rescale factor must be positive");
  }
  const auto rows = read_rows(in, {"t", "count"});
  CountSeries series;
  if (rows.empty()) {
    series.dt = bin_width.value_or(1.0);
    return series;
  }
  if (rows.size() == 1) {
    if (!bin_width) fail(ErrorCode::invalid_input, "a single-bin count file needs an explicit bin width");
    series.dt = *bin_width;
  } else {
    series.dt = (rows.back()[0] - rows.front()[0]) / static_cast<double>(rows.size() - 1);
    if (!(series.dt > 0.0)) fail(ErrorCode::invalid_input, "count times must increase");
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const double step = rows[k][0] - rows[k - 1][0];
      const double tol = 1e-9 * std::max({series.dt, std::abs(rows[k][0])});
      if (std::abs(step - series.dt) > tol) {
        fail(ErrorCode::invalid_input,
             "count grid is not uniform at row " + std::to_string(k + 1) + " (missing or extra bins?)");
      }
    }
    if (bin_width && std::abs(*bin_width - series.dt) > 1e-9 * series.dt) {
      fail(ErrorCode::invalid_input, "count grid spacing disagrees with the configured bin width");
    }
  }
  series.t0 = rows.front()[0] - series.dt;
  if (std::abs(series.t0) <= 1e-9 * series.dt) series.t0 = 0.0;
  series.counts.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k][1] < 0.0) {
      fail(ErrorCode::invalid_input, "row " + std::to_string(k + 1) + " has a negative count");
    }
    series.counts.push_back(rows[k][1] / rescale);
  }
  series.validate();
  return series;
}

CountSeries read_counts_csv(const std::filesystem::path& path, double rescale,
                            std::optional<double> bin_width) {
  auto in = open_input(path);
  return read_counts_csv(in, rescale, bin_width);
}

ChainPath read_chain_csv(std::istream& in, double horizon) {
  const auto rows = read_rows(in, {"t", "state"});
  if (rows.empty() || rows.front()[0] != 0.0) {
    fail(ErrorCode::invalid_input, "chain file must start with the state at t=0");
  }
  ChainPath chain;
  chain.horizon = horizon;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double state = rows[k][1];
    if (state < 1.0 || state != std::floor(state)) {
      fail(ErrorCode::invalid_input, "chain states are 1-based integers (row " + std::to_string(k + 1) + ")");
    }
    if (k > 0) chain.jump_times.push_back(rows[k][0]);
    chain.states.push_back(static_cast<std::size_t>(state) - 1);
  }
  chain.validate();
  if (!chain.jump_times.empty() && chain.jump_times.back() >= horizon) {
    fail(ErrorCode::invalid_input, "chain jump at or beyond the horizon");
  }
  return chain;
}

ChainPath read_chain_csv(const std::filesystem::path& path, double horizon) {
  auto in = open_input(path);
  return read_chain_csv(in, horizon);
}

void write_events_csv(std::ostream& out, const EventTimes& events) {
  out << "t\n";
  for (double t : events.times) out << format_real(t) << '\n';
}

void write_counts_csv(std::ostream& out, const CountSeries& counts) {
  out << "t,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << format_real(counts.bin_end(i)) << ',' << format_real(counts.counts[i]) << '\n';
  }
}

void write_chain_csv(std::ostream& out, const ChainPath& chain) {
  out << "t,state\n";
  out << "0," << chain.states.front() + 1 << '\n';
  for (std::size_t k = 0; k < chain.jump_times.size(); ++k) {
    out << format_real(chain.jump_times[k]) << ',' << chain.states[k + 1] + 1 << '\n';
  }
}

ResultTable posterior_table(const PosteriorPath& filtered, const PosteriorPath* smoothed) {
  if (smoothed != nullptr && smoothed->size() != filtered.size()) {
    fail(ErrorCode::invalid_state, "filtered and smoothed paths differ in length");
  }
  const auto n = filtered.probs.empty() ? 0 : filtered.probs.front().size();
  ResultTable table;
  table.columns.push_back("t");
  for (Eigen::Index i = 0; i < n; ++i) table.columns.push_back("p_" + std::to_string(i + 1));
  if (smoothed != nullptr) {
    for (Eigen::Index i = 0; i < n; ++i) table.columns.push_back("p_smooth_" + std::to_string(i + 1));
  }
  for (std::size_t k = 0; k < filtered.size(); ++k) {
    std::vector<double> row{filtered.times[k]};
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(filtered.probs[k][i]);
    if (smoothed != nullptr) {
      for (Eigen::Index i = 0; i < n; ++i) row.push_back(smoothed->probs[k][i]);
    }
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace mmhp
