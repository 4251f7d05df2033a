#include "odflow/geogrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "odflow/ingest.hpp"

namespace odflow {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Guards ceil() against an extent that is an exact multiple of the cell
// size but lands a few ulps high.
constexpr double kCeilSlack = 1e-9;

}  // namespace

BoundingBox parse_bbox(std::string_view text) {
  const auto fields = split_csv_line(text);
  if (fields.size() != 4) {
    throw std::invalid_argument("bbox must be 'minlat,minlon,maxlat,maxlon'");
  }
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    try {
      std::size_t used = 0;
      v[i] = std::stod(fields[i], &used);
      if (used != fields[i].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bbox field '" + fields[i] + "' is not a number");
    }
  }
  return {v[0], v[1], v[2], v[3]};
}

std::string format_bbox(const BoundingBox& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", b.min_lat, b.min_lon, b.max_lat,
                b.max_lon);
  return buf;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = lat1 * kDegToRad;
  const double phi2 = lat2 * kDegToRad;
  const double dphi = (lat2 - lat1) * kDegToRad;
  const double dlambda = (lon2 - lon1) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double km_per_degree_lat() { return kEarthRadiusKm * kDegToRad; }

double km_per_degree_lon(const BoundingBox& b) {
  const double center_lat = 0.5 * (b.min_lat + b.max_lat);
  const double span = b.max_lon - b.min_lon;
  return haversine_km(center_lat, b.min_lon, center_lat, b.max_lon) / span;
}

GridSpec build_grid(const BoundingBox& bbox, double cell_km) {
  if (!(cell_km > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (bbox.min_lon > bbox.max_lon) {
    throw std::invalid_argument("bbox crossing the antimeridian is not supported");
  }
  if (!(bbox.max_lat > bbox.min_lat) || !(bbox.max_lon > bbox.min_lon)) {
    throw std::invalid_argument("bbox is degenerate");
  }
  if (bbox.min_lat < -90.0 || bbox.max_lat > 90.0 || bbox.min_lon < -180.0 ||
      bbox.max_lon > 180.0) {
    throw std::invalid_argument("bbox coordinates out of range");
  }
  const double center_lon = 0.5 * (bbox.min_lon + bbox.max_lon);
  const double ns_km = haversine_km(bbox.min_lat, center_lon, bbox.max_lat, center_lon);
  const double ew_per_deg = km_per_degree_lon(bbox);
  const double ew_km = ew_per_deg * (bbox.max_lon - bbox.min_lon);

  GridSpec grid;
  grid.bbox = bbox;
  grid.cell_km = cell_km;
  grid.rows = std::max(1, static_cast<int>(std::ceil(ns_km / cell_km - kCeilSlack)));
  grid.cols = std::max(1, static_cast<int>(std::ceil(ew_km / cell_km - kCeilSlack)));
  grid.lat_step_deg = cell_km / km_per_degree_lat();
  grid.lon_step_deg = cell_km / ew_per_deg;
  return grid;
}

BoundingBox bbox_from_extent(LatLon northwest, double ns_km, double ew_km) {
  BoundingBox b;
  b.max_lat = northwest.lat;
  b.min_lat = northwest.lat - ns_km / km_per_degree_lat();
  b.min_lon = northwest.lon;
  const double center_lat = 0.5 * (b.min_lat + b.max_lat) * kDegToRad;
  // Invert the haversine along a parallel: d = 2R asin(cos(phi) sin(dl/2)).
  const double dl =
      2.0 * std::asin(std::sin(ew_km / (2.0 * kEarthRadiusKm)) / std::cos(center_lat));
  b.max_lon = northwest.lon + dl / kDegToRad;
  return b;
}

CellId cell_id(const GridSpec& grid, std::size_t position) {
  CellId id;
  id.index = static_cast<int>(position) + 1;
  id.row = static_cast<int>(position / static_cast<std::size_t>(grid.cols));
  id.col = static_cast<int>(position % static_cast<std::size_t>(grid.cols));
  return id;
}

LatLon cell_center(const GridSpec& grid, std::size_t position) {
  const CellId id = cell_id(grid, position);
  return {grid.bbox.max_lat - (id.row + 0.5) * grid.lat_step_deg,
          grid.bbox.min_lon + (id.col + 0.5) * grid.lon_step_deg};
}

std::optional<CellId> assign_cell(const GridSpec& grid, double lat, double lon) {
  if (!grid.bbox.contains(lat, lon)) return std::nullopt;
  const auto north_edge = [&](int r) { return grid.bbox.max_lat - r * grid.lat_step_deg; };
  const auto west_edge = [&](int c) { return grid.bbox.min_lon + c * grid.lon_step_deg; };

  int row = static_cast<int>(std::floor((grid.bbox.max_lat - lat) / grid.lat_step_deg));
  row = std::clamp(row, 0, grid.rows - 1);
  while (row + 1 < grid.rows && lat <= north_edge(row + 1)) ++row;
  while (row > 0 && lat > north_edge(row)) --row;

  int col = static_cast<int>(std::floor((lon - grid.bbox.min_lon) / grid.lon_step_deg));
  col = std::clamp(col, 0, grid.cols - 1);
  while (col + 1 < grid.cols && lon >= west_edge(col + 1)) ++col;
  while (col > 0 && lon < west_edge(col)) --col;

  return CellId{row * grid.cols + col + 1, row, col};
}

DistanceGraph build_distance_graph(const GridSpec& grid) {
  const std::size_t n = grid.size();
  DistanceGraph d(n);
  std::vector<LatLon> centers(n);
  for (std::size_t i = 0; i < n; ++i) centers[i] = cell_center(grid, i);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double km = haversine_km(centers[i].lat, centers[i].lon, centers[j].lat, centers[j].lon);
      d.at(i, j) = km;
      d.at(j, i) = km;
    }
  }
  return d;
}

NeighborSets geographical_neighbors(const DistanceGraph& distances, double threshold_km) {
  if (!(threshold_km > 0.0)) throw std::invalid_argument("neighbor threshold must be positive");
  const std::size_t n = distances.size();
  NeighborSets q(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && distances(i, j) <= threshold_km) q[i].push_back(j);
    }
  }
  return q;
}

double default_geo_threshold_km(double cell_km) {
  return cell_km * std::numbers::sqrt2 * 1.01;
}

}  // namespace odflow
