#include <cmath>
#include <utility>
#include <numbers>
#include <random>

#include "doctest.h"
#include "odflow/geogrid.hpp"
#include "test_support.hpp"

using namespace odflow;

namespace {

// Spherical law of cosines: an independent oracle for haversine.
double cosine_law_km(double lat1, double lon1, double lat2, double lon2) {
  const double r = std::numbers::pi / 180.0;
  const double c = std::sin(lat1 * r) * std::sin(lat2 * r) +
                   std::cos(lat1 * r) * std::cos(lat2 * r) * std::cos((lon2 - lon1) * r);
  return kEarthRadiusKm * std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

TEST_SUITE("geogrid") {
  TEST_CASE("haversine agrees with the cosine law") {
    CHECK(haversine_km(0, 0, 1, 0) == doctest::Approx(kEarthRadiusKm * std::numbers::pi / 180));
    CHECK(haversine_km(40.7, -74.0, 40.7, -74.0) == 0.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-170, 170);
    for (int k = 0; k < 200; ++k) {
      const double a = lat(rng), b = lon(rng), c = lat(rng), d = lon(rng);
      CHECK(haversine_km(a, b, c, d) == doctest::Approx(cosine_law_km(a, b, c, d)).epsilon(1e-9));
      CHECK(haversine_km(a, b, c, d) == doctest::Approx(haversine_km(c, d, a, b)));
    }
  }

  TEST_CASE("bbox parse and format") {
    const auto b = parse_bbox("40.5,-74.25,40.9,-73.7");
    CHECK(b.min_lat == 40.5);
    CHECK(b.max_lon == -73.7);
    CHECK(parse_bbox(format_bbox(b)) == b);
    CHECK_THROWS_AS(parse_bbox("1,2,3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_bbox("1,2,3,x"), std::invalid_argument);
  }

  TEST_CASE("grid from an exact extent has the requested shape") {
    for (double km : {0.5, 1.0, 2.5}) {
      const auto g = build_grid(bbox_from_extent({40.8, -74.02}, 4 * km, 6 * km), km);
      CHECK(g.rows == 4);
      CHECK(g.cols == 6);
      CHECK(g.size() == 24);
    }
    // partial cells round up
    const auto g = build_grid(bbox_from_extent({40.8, -74.02}, 4.2, 6.2), 1.0);
    CHECK(g.rows == 5);
    CHECK(g.cols == 7);
  }

  TEST_CASE("invalid grids are rejected") {
    const BoundingBox ok{40.0, -74.0, 41.0, -73.0};
    CHECK_THROWS_AS(build_grid(ok, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid({40.0, 170.0, 41.0, -170.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid({40.0, -74.0, 40.0, -73.0}, 1.0), std::invalid_argument);
  }

  TEST_CASE("cells are row-major from the northwest") {
    const auto g = odflow::testing::small_grid(3, 4);
    CHECK(cell_id(g, 0) == CellId{1, 0, 0});
    CHECK(cell_id(g, 5) == CellId{6, 1, 1});
    CHECK(cell_id(g, 11) == CellId{12, 2, 3});
    // northwest corner lands in cell 1, southeast in the last cell
    CHECK(assign_cell(g, g.bbox.max_lat, g.bbox.min_lon)->index == 1);
    CHECK(assign_cell(g, g.bbox.min_lat, g.bbox.max_lon)->index == 12);
    CHECK_FALSE(assign_cell(g, g.bbox.max_lat + 1e-6, g.bbox.min_lon));
    CHECK_FALSE(assign_cell(g, g.bbox.min_lat, g.bbox.max_lon + 1e-6));
  }

  TEST_CASE("every cell center maps back to its own cell") {
    const auto g = odflow::testing::small_grid(5, 7, 0.8);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto c = cell_center(g, p);
      const auto id = assign_cell(g, c.lat, c.lon);
      REQUIRE(id);
      CHECK(id->position() == p);
    }
  }

  TEST_CASE("points inside the bbox get exactly one cell") {
    const auto g = odflow::testing::small_grid(4, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(g.bbox.min_lat, g.bbox.max_lat);
    std::uniform_real_distribution<double> lon(g.bbox.min_lon, g.bbox.max_lon);
    for (int k = 0; k < 1000; ++k) {
      const auto id = assign_cell(g, lat(rng), lon(rng));
      REQUIRE(id);
      CHECK(id->index >= 1);
      CHECK(id->index <= 16);
    }
  }

  TEST_CASE("distance graph is a symmetric metric with zero diagonal") {
    const auto g = odflow::testing::small_grid(3, 3);
    const auto d = build_distance_graph(g);
    REQUIRE(d.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(d(i, j) == doctest::Approx(d(j, i)));
        if (i != j) CHECK(d(i, j) > 0.0);
        for (std::size_t k = 0; k < 9; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-9);
      }
    }
    // adjacent centres are one cell apart
    CHECK(d(0, 1) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(d(0, 3) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("default threshold picks the eight surrounding cells") {
    const auto g = odflow::testing::small_grid(3, 3);
    const auto d = build_distance_graph(g);
    const auto q = geographical_neighbors(d, default_geo_threshold_km(g.cell_km));
    CHECK(q[4] == std::vector<std::size_t>{0, 1, 2, 3, 5, 6, 7, 8});
    CHECK(q[0] == std::vector<std::size_t>{1, 3, 4});
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j : q[i]) {
        CHECK(j != i);
        CHECK(std::find(q[j].begin(), q[j].end(), i) != q[j].end());
      }
    const auto rook = geographical_neighbors(d, 1.05);
    CHECK(rook[4] == std::vector<std::size_t>{1, 3, 5, 7});
    CHECK_THROWS_AS(geographical_neighbors(d, 0.0), std::invalid_argument);
  }

  TEST_CASE("grid shapes follow the ceiling of extent over cell length") {
    const LatLon nw{40.90, -74.05};
    auto shape = [&](double ns, double ew) {
      const auto g = build_grid(bbox_from_extent(nw, ns, ew), 2.5);
      return std::pair{g.rows, g.cols};
    };
    CHECK(shape(12.5, 12.5) == std::pair{5, 5});
    CHECK(shape(1.0, 1.0) == std::pair{1, 1});
    CHECK(shape(26.0, 10.0) == std::pair{int(std::ceil(26.0 / 2.5)), int(std::ceil(10.0 / 2.5))});
    CHECK(shape(26.0, 10.0) == std::pair{11, 4});
  }

  TEST_CASE("closed-form great-circle distances") {
    CHECK(haversine_km(0, 0, 0, 180) == doctest::Approx(std::numbers::pi * 6371.0088).epsilon(1e-12));
    CHECK(haversine_km(0, 0, 0, 180) == doctest::Approx(20015.1).epsilon(1e-5));
    CHECK(haversine_km(0, 0, 0, 1) == doctest::Approx(111.19).epsilon(1e-4));
    CHECK(haversine_km(0, 0, 0, 1) == doctest::Approx(cosine_law_km(0, 0, 0, 1)).epsilon(1e-9));
  }

  TEST_CASE("shared edges belong to the higher-index cell") {
    const auto g = odflow::testing::small_grid(3, 3);
    const LatLon c1 = cell_center(g, 0);
    const double edge_lon = g.bbox.min_lon + g.lon_step_deg;
    CHECK(assign_cell(g, c1.lat, edge_lon)->index == 2);
    const double edge_lat = g.bbox.max_lat - g.lat_step_deg;
    CHECK(assign_cell(g, edge_lat, c1.lon)->index == 4);
  }

  TEST_CASE("1000 random points match a containment oracle") {
    const auto g = odflow::testing::small_grid(4, 5, 0.7);
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> lat(g.bbox.min_lat, g.bbox.max_lat),
        lon(g.bbox.min_lon, g.bbox.max_lon);
    for (int k = 0; k < 1000; ++k) {
      const double a = lat(rng), b = lon(rng);
      int owner = 0, owners = 0;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
          const double north = g.bbox.max_lat - r * g.lat_step_deg;
          const double south = g.bbox.max_lat - (r + 1) * g.lat_step_deg;
          const double west = g.bbox.min_lon + c * g.lon_step_deg;
          const double east = g.bbox.min_lon + (c + 1) * g.lon_step_deg;
          const bool in_lat = a <= north && (a > south || r == g.rows - 1);
          const bool in_lon = b >= west && (b < east || c == g.cols - 1);
          if (in_lat && in_lon) {
            owner = r * g.cols + c + 1;
            ++owners;
          }
        }
      REQUIRE(owners == 1);
      CHECK(assign_cell(g, a, b)->index == owner);
    }
  }

  TEST_CASE("neighbors of cell 14 on a 5x5 grid") {
    const auto g = odflow::testing::small_grid(5, 5, 2.5);
    const auto d = build_distance_graph(g);
    // 1-based {8, 9, 10, 13, 15, 18, 19, 20}: the full ring, diagonals included
    const auto q = geographical_neighbors(d, default_geo_threshold_km(2.5));
    CHECK(q[13] == std::vector<std::size_t>{7, 8, 9, 12, 14, 17, 18, 19});
    // exactly one cell length keeps the edge-sharing cells only
    const auto rook = geographical_neighbors(d, 2.5 * 1.001);
    CHECK(rook[13] == std::vector<std::size_t>{8, 12, 14, 18});
    // below the smallest center distance nothing qualifies
    for (const auto& s : geographical_neighbors(d, 2.0)) CHECK(s.empty());
  }

  TEST_CASE("random 4x6 grid neighbors match a pairwise filter") {
    const auto g = odflow::testing::small_grid(4, 6, 1.3);
    const auto d = build_distance_graph(g);
    const double threshold = 1.5 * 1.3;
    const auto q = geographical_neighbors(d, threshold);
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::vector<std::size_t> expect;
      const LatLon a = cell_center(g, i);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const LatLon b = cell_center(g, j);
        if (j != i && cosine_law_km(a.lat, a.lon, b.lat, b.lon) <= threshold) expect.push_back(j);
      }
      CHECK(q[i] == expect);
    }
  }
}
