#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmhp/filter.hpp"
#include "mmhp/simulate.hpp"

namespace mmhp {

/// Rectangular table of reals with named columns, written as CSV.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  void write_csv(std::ostream& out) const;
};

/// Shortest decimal form that reads back to the same double (17 significant digits).
[[nodiscard]] std::string format_real(double value);

/// Header `t`, one event time per row. The j-th repeat of a timestamp is
/// shifted by j * 1e-9 so that events stay strictly increasing.
[[nodiscard]] EventTimes read_events_csv(std::istream& in);
[[nodiscard]] EventTimes read_events_csv(const std::filesystem::path& path);

/// Header `t,count` with t the right edge of each bin on a uniform grid.
/// Counts are divided by `rescale`. A single-row file needs `bin_width`.
[[nodiscard]] CountSeries read_counts_csv(std::istream& in, double rescale = 1.0,
                                          std::optional<double> bin_width = std::nullopt);
[[nodiscard]] CountSeries read_counts_csv(const std::filesystem::path& path, double rescale = 1.0,
                                          std::optional<double> bin_width = std::nullopt);

/// Header `t,state` with 1-based states: the first row is (0, initial state),
/// then one row per chain jump.
[[nodiscard]] ChainPath read_chain_csv(std::istream& in, double horizon);
[[nodiscard]] ChainPath read_chain_csv(const std::filesystem::path& path, double horizon);

void write_events_csv(std::ostream& out, const EventTimes& events);
void write_counts_csv(std::ostream& out, const CountSeries& counts);
void write_chain_csv(std::ostream& out, const ChainPath& chain);

/// `t,p_1..p_n` and, when smoothed is given, `p_smooth_1..p_smooth_n`.
[[nodiscard]] ResultTable posterior_table(const PosteriorPath& filtered,
                                          const PosteriorPath* smoothed = nullptr);

}  // namespace mmhp
