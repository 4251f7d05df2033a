#include "odflow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "odflow/errors.hpp"

namespace odflow {

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(int year, unsigned month, unsigned day) {
  year -= month <= 2 ? 1 : 0;
  const std::int64_t era = (year >= 0 ? year : year - 399) / 400;
  const auto yoe = static_cast<unsigned>(year - era * 400);
  const unsigned doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace {

struct Civil {
  int year;
  unsigned month;
  unsigned day;
};

Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  const auto y = static_cast<int>(yoe + era * 400 + (m <= 2 ? 1 : 0));
  return {y, m, d};
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DD HH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != ' ' && text[10] != 'T') || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  int year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_number(text.substr(0, 4), year) || !parse_number(text.substr(5, 2), month) ||
      !parse_number(text.substr(8, 2), day) || !parse_number(text.substr(11, 2), hour) ||
      !parse_number(text.substr(14, 2), minute) || !parse_number(text.substr(17, 2), second)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) || hour > 23 ||
      minute > 59 || second > 59) {
    return std::nullopt;
  }
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(Timestamp t) {
  const std::int64_t day = day_number(t);
  const std::int64_t secs = t - day * 86400;
  const Civil c = civil_from_days(day);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", c.year, c.month, c.day,
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

int day_of_week(std::int64_t day) {
  // 1970-01-01 was a Thursday.
  const std::int64_t w = (day + 3) % 7;
  return static_cast<int>(w < 0 ? w + 7 : w);
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::Unparsable: return "unparsable";
    case RejectReason::OutOfRange: return "out_of_range";
    case RejectReason::ZeroPassengers: return "zero_passengers";
  }
  return "unknown";
}

void RejectTally::add(RejectReason reason) {
  switch (reason) {
    case RejectReason::Unparsable: ++unparsable; break;
    case RejectReason::OutOfRange: ++out_of_range; break;
    case RejectReason::ZeroPassengers: ++zero_passengers; break;
  }
}

RejectTally& RejectTally::operator+=(const RejectTally& other) {
  unparsable += other.unparsable;
  out_of_range += other.out_of_range;
  zero_passengers += other.zero_passengers;
  return *this;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

ParseResult parse_trips(std::istream& source, const CsvSchema& schema) {
  ParseResult result;
  std::string line;
  if (!std::getline(source, line)) return result;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);

  const std::string* names[] = {&schema.pickup_time, &schema.pickup_lat, &schema.pickup_lon,
                                &schema.dropoff_lat, &schema.dropoff_lon,
                                &schema.passenger_count};
  std::size_t idx[6];
  for (std::size_t k = 0; k < 6; ++k) {
    auto it = column.find(*names[k]);
    if (it == column.end()) {
      throw ConfigError("trip CSV is missing required column '" + *names[k] + "'");
    }
    idx[k] = it->second;
  }
  const std::size_t needed = *std::max_element(std::begin(idx), std::end(idx)) + 1;

  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < needed) {
      result.rejects.add(RejectReason::Unparsable);
      continue;
    }
    TripRecord rec;
    const auto time = parse_timestamp(fields[idx[0]]);
    long long passengers = 0;
    if (!time || !parse_number(std::string_view(fields[idx[1]]), rec.pickup_lat) ||
        !parse_number(std::string_view(fields[idx[2]]), rec.pickup_lon) ||
        !parse_number(std::string_view(fields[idx[3]]), rec.dropoff_lat) ||
        !parse_number(std::string_view(fields[idx[4]]), rec.dropoff_lon) ||
        !parse_number(std::string_view(fields[idx[5]]), passengers)) {
      result.rejects.add(RejectReason::Unparsable);
      continue;
    }
    rec.pickup_time = *time;
    const auto lat_ok = [](double v) { return v >= -90.0 && v <= 90.0; };
    const auto lon_ok = [](double v) { return v >= -180.0 && v <= 180.0; };
    if (!lat_ok(rec.pickup_lat) || !lat_ok(rec.dropoff_lat) || !lon_ok(rec.pickup_lon) ||
        !lon_ok(rec.dropoff_lon) || passengers < 0 || passengers > 1'000'000) {
      result.rejects.add(RejectReason::OutOfRange);
      continue;
    }
    if (passengers == 0) {
      result.rejects.add(RejectReason::ZeroPassengers);
      continue;
    }
    rec.passenger_count = static_cast<int>(passengers);
    result.records.push_back(rec);
  }
  return result;
}

ParseResult parse_trip_files(const std::vector<std::filesystem::path>& files,
                             const CsvSchema& schema) {
  ParseResult merged;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open trip file " + file.string());
    auto part = parse_trips(in, schema);
    merged.records.insert(merged.records.end(), part.records.begin(), part.records.end());
    merged.rejects += part.rejects;
  }
  return merged;
}

SlotKey slot_of(Timestamp t, int slot_minutes, std::int64_t start_day) {
  if (slot_minutes <= 0 || 1440 % slot_minutes != 0) {
    throw std::invalid_argument("slot length must divide 1440 minutes, got " +
                                std::to_string(slot_minutes));
  }
  const std::int64_t day = day_number(t);
  if (day < start_day) {
    throw std::invalid_argument("timestamp " + format_timestamp(t) +
                                " precedes the dataset start day");
  }
  const auto minute_of_day = static_cast<int>((t - day * 86400) / 60);
  SlotKey key;
  key.day_index = static_cast<int>(day - start_day);
  key.slot = minute_of_day / slot_minutes + 1;
  key.day_of_week = day_of_week(day);
  return key;
}

std::int64_t dataset_start_day(const std::vector<TripRecord>& records) {
  if (records.empty()) return 0;
  Timestamp first = records.front().pickup_time;
  for (const auto& r : records) first = std::min(first, r.pickup_time);
  return day_number(first);
}

void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& records,
                     const CsvSchema& schema) {
  out << schema.pickup_time << ',' << schema.pickup_lat << ',' << schema.pickup_lon << ','
      << schema.dropoff_lat << ',' << schema.dropoff_lon << ',' << schema.passenger_count
      << '\n';
  // shortest round-trip form, so a written file parses back to the same records
  auto coord = [&out](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
  };
  for (const auto& r : records) {
    out << format_timestamp(r.pickup_time);
    for (double v : {r.pickup_lat, r.pickup_lon, r.dropoff_lat, r.dropoff_lon}) coord(v);
    out << ',' << r.passenger_count << '\n';
  }
}

}  // namespace odflow
