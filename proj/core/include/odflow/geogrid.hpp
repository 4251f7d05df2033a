#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odflow {

// Cells are addressed internally by a 0-based row-major position; CellId
// carries the 1-based index used in files and reports.

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct BoundingBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  bool contains(double lat, double lon) const {
    return lat >= min_lat && lat <= max_lat && lon >= min_lon && lon <= max_lon;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Parses "minlat,minlon,maxlat,maxlon".
BoundingBox parse_bbox(std::string_view text);
std::string format_bbox(const BoundingBox& bbox);

struct GridSpec {
  BoundingBox bbox;
  double cell_km = 0.0;
  int rows = 0;
  int cols = 0;
  double lat_step_deg = 0.0;
  double lon_step_deg = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

struct CellId {
  int index = 1;  // 1-based, row-major from the northwest corner
  int row = 0;
  int col = 0;

  std::size_t position() const { return static_cast<std::size_t>(index - 1); }
  friend bool operator==(const CellId&, const CellId&) = default;
};

/// Great-circle distance in km on a sphere of radius kEarthRadiusKm.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

/// Kilometres spanned by one degree of longitude along the great circle
/// through the bbox center latitude.
double km_per_degree_lon(const BoundingBox& bbox);
double km_per_degree_lat();

/// Tessellates the bbox into square cells of side cell_km. Rows run south
/// from max_lat, columns east from min_lon. Throws std::invalid_argument for
/// a degenerate or antimeridian-crossing bbox or a non-positive cell size.
GridSpec build_grid(const BoundingBox& bbox, double cell_km);

/// A bbox of the given extent in km whose northwest corner is `northwest`.
BoundingBox bbox_from_extent(LatLon northwest, double ns_km, double ew_km);

CellId cell_id(const GridSpec& grid, std::size_t position);
LatLon cell_center(const GridSpec& grid, std::size_t position);

/// Cell containing the point, or nullopt when the point lies outside the
/// bbox. Cells are half-open toward increasing row and column index.
std::optional<CellId> assign_cell(const GridSpec& grid, double lat, double lon);

class DistanceGraph {
 public:
  DistanceGraph() = default;
  explicit DistanceGraph(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  double& at(std::size_t i, std::size_t j) { return d_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Pairwise haversine distances between cell centers.
DistanceGraph build_distance_graph(const GridSpec& grid);

using NeighborSets = std::vector<std::vector<std::size_t>>;

/// q_i = { j != i : d_ij <= threshold_km }, sorted ascending.
NeighborSets geographical_neighbors(const DistanceGraph& distances, double threshold_km);

/// Diagonal-inclusive threshold: cell_km * sqrt(2) * 1.01.
double default_geo_threshold_km(double cell_km);

}  // namespace odflow
