#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "protocolnet/evalkit.hpp"

namespace protocolnet {

/// Whole cents.
struct Cents {
  std::int64_t value = 0;

  /// "73466.67"
  std::string to_string() const;
  double dollars() const { return static_cast<double>(value) / 100.0; }
  auto operator<=>(const Cents&) const = default;
};

struct EconomicParams {
  double hourly_rate = 0.0;        // USD per hour
  double minutes_per_exam = 0.0;
  double annual_volume = 0.0;      // exams per year
  double fte_hours_per_year = 2080.0;

  static EconomicParams technologist();  // $38/h, 2 min
  static EconomicParams radiologist();   // $206/h, 1 min
  /// "technologist" | "radiologist"; throws ValidationFailure.
  static EconomicParams preset(std::string_view role);

  /// Throws ValidationFailure unless all fields are strictly positive.
  void validate() const;
};

inline constexpr double kDefaultAnnualVolume = 58000.0;

/// ap_fraction * volume * minutes/60 * rate, rounded half away from zero to the cent.
/// Throws OutOfRangeFraction.
Cents annual_savings(double ap_fraction, const EconomicParams& params);

/// ap_fraction * volume * minutes/60 / fte_hours_per_year.
double fte_saved(double ap_fraction, const EconomicParams& params);

struct SavingsRow {
  double threshold = 0.0;
  double ap_fraction = 0.0;
  Cents savings;
  double fte = 0.0;
};

std::vector<SavingsRow> savings_curve(const std::vector<SweepRow>& sweep, const EconomicParams& params);

/// economics.csv: threshold, ap_fraction, savings_usd, fte
void write_savings_csv(const std::filesystem::path& path, const std::vector<SavingsRow>& rows);

}  // namespace protocolnet
