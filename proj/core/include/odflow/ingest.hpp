#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odflow {

// Naive local time (no timezone), in seconds since 1970-01-01 00:00:00.
using Timestamp = std::int64_t;

/// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);

/// Parses "YYYY-MM-DD HH:MM:SS" (a 'T' separator is also accepted).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

inline std::int64_t day_number(Timestamp t) {
  return t >= 0 ? t / 86400 : (t - 86399) / 86400;
}

/// 0 = Monday ... 6 = Sunday.
int day_of_week(std::int64_t day_number);

struct TripRecord {
  Timestamp pickup_time = 0;
  double pickup_lat = 0.0;
  double pickup_lon = 0.0;
  double dropoff_lat = 0.0;
  double dropoff_lon = 0.0;
  int passenger_count = 1;

  friend bool operator==(const TripRecord&, const TripRecord&) = default;
};

struct SlotKey {
  int day_index = 0;    // 0-based day within the dataset
  int slot = 1;         // 1-based slot within the day
  int day_of_week = 0;  // 0 = Monday

  friend bool operator==(const SlotKey&, const SlotKey&) = default;
};

/// Column names of the five required fields. Defaults follow the 2016
/// NYC yellow-cab schema.
struct CsvSchema {
  std::string pickup_time = "tpep_pickup_datetime";
  std::string pickup_lat = "pickup_latitude";
  std::string pickup_lon = "pickup_longitude";
  std::string dropoff_lat = "dropoff_latitude";
  std::string dropoff_lon = "dropoff_longitude";
  std::string passenger_count = "passenger_count";
};

enum class RejectReason { Unparsable, OutOfRange, ZeroPassengers };

std::string_view to_string(RejectReason reason);

struct RejectTally {
  std::size_t unparsable = 0;
  std::size_t out_of_range = 0;
  std::size_t zero_passengers = 0;

  void add(RejectReason reason);
  std::size_t total() const { return unparsable + out_of_range + zero_passengers; }
  RejectTally& operator+=(const RejectTally& other);
  friend bool operator==(const RejectTally&, const RejectTally&) = default;
};

struct ParseResult {
  std::vector<TripRecord> records;
  RejectTally rejects;
};

/// Parses a trip CSV. Throws ConfigError if the header lacks a required
/// column. An empty stream yields no records and no rejects.
ParseResult parse_trips(std::istream& source, const CsvSchema& schema = {});

/// Parses several files and merges them in file-then-line order.
ParseResult parse_trip_files(const std::vector<std::filesystem::path>& files,
                             const CsvSchema& schema = {});

/// Splits one CSV line on commas, honouring double quotes, and trims
/// surrounding whitespace from each field.
std::vector<std::string> split_csv_line(std::string_view line);

/// Half-open bucketing of a timestamp into a day/slot. `start_day` is the
/// day number of dataset day 0. Throws std::invalid_argument if slot_minutes
/// does not divide 1440 or the timestamp precedes the start day.
SlotKey slot_of(Timestamp t, int slot_minutes, std::int64_t start_day);

/// Earliest pickup day among the records (0 if there are none).
std::int64_t dataset_start_day(const std::vector<TripRecord>& records);

/// Writes records using the given schema's column names.
void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& records,
                     const CsvSchema& schema = {});

}  // namespace odflow
