#pragma once

#include <cstdint>
#include <vector>

#include "qdnw/geometry.hpp"

namespace qdnw {

/// Coordinate box V with a lattice of observers along coordinate-time lines.
struct ObservationRegion {
    Box box;
    int observers_per_axis = 7;

    /// Box centred at (1, 1, 0, ...) with half-width 0.3 in every coordinate.
    static ObservationRegion default_region(int d);
    /// Spatial positions of the observer lines (cell centres of the spatial box).
    std::vector<Vec> observers() const;
};

struct ObservedPoint {
    Point x;
    /// Index of the observer line for crossing points, -1 for ray samples.
    int observer = -1;
    bool earliest = false;
};

struct ObservationSet {
    Point q;
    std::vector<ObservedPoint> points;

    bool empty() const { return points.empty(); }
    std::vector<Point> earliest() const;
    std::vector<Point> all() const;
};

struct ObsetConfig {
    int n_dirs = 96;
    double h = 1e-2;
    /// Samples per ray segment inside V on cone-exact metrics.
    int samples_per_ray = 8;
    /// Shoot rays even when the cone is known in closed form.
    bool force_shooting = false;
    std::uint64_t seed = 0;
    /// Bisection tolerance for crossing times.
    double tol = 1e-12;
};

/// Points of the future light cone boundary of q inside V: ray samples plus the
/// first crossing of every observer line. Rays stop at their first conjugate point.
ObservationSet light_observation_set(const MetricSpec& m, const Point& q, const ObservationRegion& region,
                                     const ObsetConfig& cfg = {});

/// Same set with earliest flags: the first crossing on each observer line,
/// minus crossings strictly in the timelike future of another kept crossing.
ObservationSet earliest_observation_set(const MetricSpec& m, const Point& q, const ObservationRegion& region,
                                        const ObsetConfig& cfg = {});

/// Symmetric Hausdorff distance; throws EmptySet when either set is empty.
double hausdorff(const std::vector<Point>& a, const std::vector<Point>& b);

/// Hausdorff distance between the earliest observation sets of q1 and q2.
double distinguish(const MetricSpec& m, const Point& q1, const Point& q2, const ObservationRegion& region,
                   const ObsetConfig& cfg = {});

}  // namespace qdnw
