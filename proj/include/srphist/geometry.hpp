#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace srphist {

/// Real interval with optionally open endpoints. Bisection only ever opens
/// the upper endpoint of a left child.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_open = false;
    bool hi_open = false;

    Interval() = default;
    Interval(double lo_, double hi_, bool lo_open_ = false, bool hi_open_ = false)
        : lo(lo_), hi(hi_), lo_open(lo_open_), hi_open(hi_open_) {
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw Error(Errc::invalid_argument, "interval bounds must be finite with lo <= hi");
        if (lo == hi && (lo_open || hi_open))
            throw Error(Errc::invalid_argument, "degenerate interval cannot have an open endpoint");
    }

    bool contains(double x) const noexcept {
        const bool above = lo_open ? x > lo : x >= lo;
        const bool below = hi_open ? x < hi : x <= hi;
        return above && below;
    }

    friend bool operator==(const Interval&, const Interval&) = default;
};

inline double width(const Interval& iv) noexcept { return iv.hi - iv.lo; }

inline double midpoint(const Interval& iv) noexcept {
    const double w = iv.hi - iv.lo;
    return std::isfinite(w) ? iv.lo + w / 2.0 : iv.lo / 2.0 + iv.hi / 2.0;
}

/// Axis-aligned box, an interval vector of dimension d >= 1.
class Box {
public:
    Box() = default;

    explicit Box(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
        if (intervals_.empty()) throw Error(Errc::invalid_argument, "box dimension must be >= 1");
    }

    Box(std::initializer_list<Interval> intervals) : Box(std::vector<Interval>(intervals)) {}

    /// Closed hypercube [lo, hi]^d.
    static Box cube(std::size_t dim, double lo, double hi) {
        return Box(std::vector<Interval>(dim, Interval(lo, hi)));
    }

    std::size_t dim() const noexcept { return intervals_.size(); }
    const Interval& operator[](std::size_t i) const { return intervals_[i]; }
    const std::vector<Interval>& intervals() const noexcept { return intervals_; }

    double volume() const noexcept {
        double v = 1.0;
        for (const auto& iv : intervals_) v *= width(iv);
        return v;
    }

    bool is_degenerate() const noexcept {
        return std::any_of(intervals_.begin(), intervals_.end(),
                           [](const Interval& iv) { return iv.lo == iv.hi; });
    }

    /// First coordinate of maximum width (0-based).
    std::size_t widest_coordinate() const noexcept {
        std::size_t best = 0;
        for (std::size_t i = 1; i < intervals_.size(); ++i)
            if (width(intervals_[i]) > width(intervals_[best])) best = i;
        return best;
    }

    /// True when the midpoint of the widest coordinate lies strictly inside it.
    bool is_bisectable() const noexcept {
        const auto& iv = intervals_[widest_coordinate()];
        const double mid = midpoint(iv);
        return iv.lo < mid && mid < iv.hi;
    }

    std::pair<Box, Box> bisect() const {
        const std::size_t axis = widest_coordinate();
        const Interval& iv = intervals_[axis];
        const double mid = midpoint(iv);
        if (!(iv.lo < mid && mid < iv.hi)) {
            std::ostringstream os;
            os.precision(17);
            os << "coordinate " << axis << " [" << iv.lo << ", " << iv.hi
               << "] has no representable interior midpoint";
            throw Error(Errc::not_bisectable, os.str());
        }
        Box left = *this;
        Box right = *this;
        left.intervals_[axis] = Interval(iv.lo, mid, iv.lo_open, true);
        right.intervals_[axis] = Interval(mid, iv.hi, false, iv.hi_open);
        return {std::move(left), std::move(right)};
    }

    bool contains(std::span<const double> p) const {
        if (p.size() != dim())
            throw Error(Errc::dimension_mismatch, "point has dimension " + std::to_string(p.size()) +
                                                      ", box has " + std::to_string(dim()));
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!intervals_[i].contains(p[i])) return false;
        return true;
    }

    friend bool operator==(const Box&, const Box&) = default;

private:
    std::vector<Interval> intervals_;
};

inline std::size_t widest_coordinate(const Box& b) noexcept { return b.widest_coordinate(); }
inline std::pair<Box, Box> bisect(const Box& b) { return b.bisect(); }
inline bool contains(const Box& b, std::span<const double> p) { return b.contains(p); }

/// Splitting hyperplane of a box: points with coord < value go left.
struct SplitPlane {
    std::size_t axis = 0;
    double value = 0.0;

    bool goes_right(std::span<const double> p) const noexcept { return p[axis] >= value; }
};

inline SplitPlane split_plane(const Box& b) {
    const std::size_t axis = b.widest_coordinate();
    return {axis, midpoint(b[axis])};
}

/// Row-major store of n points in R^d. Rows are exposed as spans.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw Error(Errc::invalid_argument, "point dimension must be >= 1");
    }

    PointSet(std::size_t dim, std::initializer_list<std::initializer_list<double>> rows) : PointSet(dim) {
        for (const auto& r : rows) push_back(std::vector<double>(r));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    bool empty() const noexcept { return coords_.empty(); }

    void reserve(std::size_t n) { coords_.reserve(n * dim_); }

    void push_back(std::span<const double> p) {
        if (p.size() != dim_)
            throw Error(Errc::dimension_mismatch, "expected " + std::to_string(dim_) +
                                                      " coordinates, got " + std::to_string(p.size()));
        for (double x : p)
            if (!std::isfinite(x)) throw Error(Errc::invalid_argument, "point coordinates must be finite");
        coords_.insert(coords_.end(), p.begin(), p.end());
    }

    std::span<const double> operator[](std::size_t i) const noexcept {
        return {coords_.data() + i * dim_, dim_};
    }

    std::span<const double> raw() const noexcept { return coords_; }

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

inline constexpr double kDefaultPad = 1e-9;
inline constexpr double kZeroWidthFloor = 1e-9;

/// Smallest closed box containing the points, each side widened on both
/// ends by pad * width (or by `zero_width_floor` for zero-width sides).
/// With pad == 0 the tight box is returned, possibly degenerate.
inline Box bounding_box(const PointSet& points, double pad = kDefaultPad,
                        double zero_width_floor = kZeroWidthFloor) {
    if (points.empty()) throw Error(Errc::empty_input, "cannot bound an empty point set");
    if (!(pad >= 0.0)) throw Error(Errc::invalid_argument, "pad must be >= 0");
    const std::size_t d = points.dim();
    std::vector<double> lo(points[0].begin(), points[0].end());
    std::vector<double> hi = lo;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto p = points[i];
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], p[j]);
            hi[j] = std::max(hi[j], p[j]);
        }
    }
    std::vector<Interval> sides;
    sides.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (pad == 0.0) {
            sides.emplace_back(lo[j], hi[j]);
            continue;
        }
        const double inflate = hi[j] > lo[j] ? pad * (hi[j] - lo[j]) : zero_width_floor;
        double a = lo[j] - inflate;
        double b = hi[j] + inflate;
        // inflation below one ulp would leave extreme points on the boundary
        if (a >= lo[j]) a = std::nextafter(lo[j], -std::numeric_limits<double>::infinity());
        if (b <= hi[j]) b = std::nextafter(hi[j], std::numeric_limits<double>::infinity());
        sides.emplace_back(a, b);
    }
    return Box(std::move(sides));
}

}  // namespace srphist
