#include "qdnw/obsets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "qdnw/errors.hpp"

namespace qdnw {

ObservationRegion ObservationRegion::default_region(int d) {
    Vec center = Vec::Zero(d + 1);
    center[0] = 1.0;
    center[1] = 1.0;
    const Vec half = Vec::Constant(d + 1, 0.3);
    return ObservationRegion{Box{Vec(center - half), Vec(center + half)}, 7};
}

std::vector<Vec> ObservationRegion::observers() const {
    const int d = static_cast<int>(box.lower.size()) - 1;
    const int n = std::max(1, observers_per_axis);
    std::vector<Vec> out;
    int total = 1;
    for (int a = 0; a < d; ++a) total *= n;
    for (int idx = 0; idx < total; ++idx) {
        Vec y(d);
        int rest = idx;
        for (int a = 0; a < d; ++a) {
            const int k = rest % n;
            rest /= n;
            y[a] = box.lower[a + 1] + (k + 0.5) * (box.upper[a + 1] - box.lower[a + 1]) / n;
        }
        out.push_back(y);
    }
    return out;
}

std::vector<Point> ObservationSet::earliest() const {
    std::vector<Point> out;
    for (const auto& p : points) {
        if (p.earliest) out.push_back(p.x);
    }
    return out;
}

std::vector<Point> ObservationSet::all() const {
    std::vector<Point> out;
    for (const auto& p : points) out.push_back(p.x);
    return out;
}

namespace {

/// Parameter interval where q + s c stays in the box, s > 0.
std::optional<std::pair<double, double>> box_interval(const Box& box, const Point& q, const Vec& c) {
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < q.size(); ++k) {
        if (c[k] == 0.0) {
            if (q[k] < box.lower[k] || q[k] > box.upper[k]) return std::nullopt;
            continue;
        }
        double a = (box.lower[k] - q[k]) / c[k], b = (box.upper[k] - q[k]) / c[k];
        if (a > b) std::swap(a, b);
        lo = std::max(lo, a);
        hi = std::min(hi, b);
    }
    if (!(hi > lo)) return std::nullopt;
    return std::make_pair(lo, hi);
}

bool strictly_timelike_after(const MetricSpec& m, const Point& a, const Point& b) {
    const Vec delta = b - a;
    const int d = m.space_dim();
    if (delta[0] <= 0.0) return false;
    if (m.cone_exact()) return delta[0] > delta.tail(d).norm() + 1e-9;
    const Mat g = m.metric(Vec(0.5 * (a + b)));
    return delta.dot(g * delta) < -1e-9 * delta.squaredNorm();
}

}  // namespace

ObservationSet light_observation_set(const MetricSpec& m, const Point& q, const ObservationRegion& region,
                                     const ObsetConfig& cfg) {
    const int d = m.space_dim();
    const Box& V = region.box;
    if (V.lower.size() != q.size()) throw Error(ErrorKind::InvalidArgument, "region and point dimensions differ");
    ObservationSet set;
    set.q = q;
    const auto observers = region.observers();

    if (m.cone_exact() && !cfg.force_shooting) {
        for (const auto& u : direction_lattice(d, cfg.n_dirs, cfg.seed)) {
            Vec c(d + 1);
            c[0] = 1.0;
            c.tail(d) = u;
            const auto range = box_interval(V, q, c);
            if (!range) continue;
            const int ns = std::max(1, cfg.samples_per_ray);
            for (int k = 0; k < ns; ++k) {
                const double s = range->first + (k + 0.5) * (range->second - range->first) / ns;
                set.points.push_back({Point(q + s * c), -1, false});
            }
        }
        for (std::size_t o = 0; o < observers.size(); ++o) {
            const Vec& y = observers[o];
            const double t = q[0] + (y - q.tail(d)).norm();
            if (t < V.lower[0] || t > V.upper[0]) continue;
            Point p(d + 1);
            p[0] = t;
            p.tail(d) = y;
            set.points.push_back({p, static_cast<int>(o), false});
        }
        return set;
    }

    if (q[0] >= V.upper[0]) return set;
    const LightConeBundle bundle(m, q, V.upper[0], cfg.n_dirs, cfg.h, cfg.seed);
    for (std::size_t r = 0; r < bundle.rays().size(); ++r) {
        const double limit = bundle.ray_limits()[r];
        for (const auto& s : bundle.rays()[r].samples) {
            if (s.x[0] > limit) break;
            if (V.contains(s.x)) set.points.push_back({s.x, -1, false});
        }
    }
    for (std::size_t o = 0; o < observers.size(); ++o) {
        const Vec& y = observers[o];
        double lo = std::max(V.lower[0], q[0] + cfg.h), hi = V.upper[0];
        const auto f_lo = bundle.radial_offset(lo, y);
        const auto f_hi = bundle.radial_offset(hi, y);
        if (!f_lo || !f_hi || *f_lo <= 0.0 || *f_hi > 0.0) continue;
        bool ok = true;
        for (int it = 0; it < 200 && hi - lo > cfg.tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto f = bundle.radial_offset(mid, y);
            if (!f) {
                ok = false;
                break;
            }
            if (*f > 0.0) lo = mid; else hi = mid;
        }
        if (!ok) continue;
        Point p(d + 1);
        p[0] = 0.5 * (lo + hi);
        p.tail(d) = y;
        set.points.push_back({p, static_cast<int>(o), false});
    }
    return set;
}

ObservationSet earliest_observation_set(const MetricSpec& m, const Point& q, const ObservationRegion& region,
                                        const ObsetConfig& cfg) {
    ObservationSet set = light_observation_set(m, q, region, cfg);
    // first crossing per observer line (one crossing per line is produced above)
    std::vector<std::size_t> crossings;
    for (std::size_t k = 0; k < set.points.size(); ++k) {
        if (set.points[k].observer >= 0) {
            set.points[k].earliest = true;
            crossings.push_back(k);
        }
    }
    for (std::size_t a : crossings) {
        for (std::size_t b : crossings) {
            if (a == b || !set.points[a].earliest) continue;
            if (strictly_timelike_after(m, set.points[a].x, set.points[b].x)) set.points[b].earliest = false;
        }
    }
    return set;
}

double hausdorff(const std::vector<Point>& a, const std::vector<Point>& b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::EmptySet, "Hausdorff distance of an empty set");
    auto directed = [](const std::vector<Point>& from, const std::vector<Point>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& r : to) best = std::min(best, (p - r).norm());
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

double distinguish(const MetricSpec& m, const Point& q1, const Point& q2, const ObservationRegion& region,
                   const ObsetConfig& cfg) {
    const auto e1 = earliest_observation_set(m, q1, region, cfg).earliest();
    const auto e2 = earliest_observation_set(m, q2, region, cfg).earliest();
    return hausdorff(e1, e2);
}

}  // namespace qdnw
