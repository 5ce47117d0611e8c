#include "protocolnet/economics.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "protocolnet/csv.hpp"

namespace protocolnet {

std::string Cents::to_string() const {
  const auto magnitude = std::llabs(value);
  std::string frac = std::to_string(magnitude % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (value < 0 ? "-" : "") + std::to_string(magnitude / 100) + "." + frac;
}

EconomicParams EconomicParams::technologist() { return {38.0, 2.0, kDefaultAnnualVolume, 2080.0}; }
EconomicParams EconomicParams::radiologist() { return {206.0, 1.0, kDefaultAnnualVolume, 2080.0}; }

EconomicParams EconomicParams::preset(std::string_view role) {
  if (role == "technologist") return technologist();
  if (role == "radiologist") return radiologist();
  throw Error(Errc::ValidationFailure, "unknown role '" + std::string(role) + "' (technologist|radiologist)");
}

void EconomicParams::validate() const {
  if (!(hourly_rate > 0 && minutes_per_exam > 0 && annual_volume > 0 && fte_hours_per_year > 0)) {
    throw Error(Errc::ValidationFailure, "economic parameters must be strictly positive");
  }
}

namespace {

void check_fraction(double f) {
  if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::OutOfRangeFraction, "AP fraction must lie in [0, 1]");
}

}  // namespace

Cents annual_savings(double ap_fraction, const EconomicParams& params) {
  check_fraction(ap_fraction);
  params.validate();
  // Single rounding at the end; long double keeps the product exact for preset-sized inputs.
  const long double cents = static_cast<long double>(ap_fraction) * params.annual_volume * params.minutes_per_exam *
                            params.hourly_rate * 100.0L / 60.0L;
  return {std::llround(cents)};
}

double fte_saved(double ap_fraction, const EconomicParams& params) {
  check_fraction(ap_fraction);
  params.validate();
  return ap_fraction * params.annual_volume * (params.minutes_per_exam / 60.0) / params.fte_hours_per_year;
}

std::vector<SavingsRow> savings_curve(const std::vector<SweepRow>& sweep, const EconomicParams& params) {
  std::vector<SavingsRow> rows;
  rows.reserve(sweep.size());
  for (const auto& s : sweep) {
    rows.push_back({s.threshold, s.ap_fraction, annual_savings(s.ap_fraction, params), fte_saved(s.ap_fraction, params)});
  }
  return rows;
}

void write_savings_csv(const std::filesystem::path& path, const std::vector<SavingsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  csv::write_row(out, {"threshold", "ap_fraction", "savings_usd", "fte"});
  for (const auto& r : rows) {
    csv::write_row(out, {format_double(r.threshold), format_double(r.ap_fraction), r.savings.to_string(),
                         format_double(r.fte)});
  }
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace protocolnet
