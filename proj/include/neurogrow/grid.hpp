#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace neurogrow {

/// Configuration problems detected before or during setup.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a field update produces non-finite or out-of-band values.
class NumericalInstability : public std::runtime_error {
public:
    NumericalInstability(long iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Point&, const Point&) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Dense row-major image; x runs along a row, y selects the row.
/// Pixel (x, y) of a simulation field is the value at Greville point (u_x, v_y).
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int nx, int ny, T fill = T{}) : nx_(nx), ny_(ny), data_(std::size_t(nx) * ny, fill) {
        if (nx < 0 || ny < 0) throw ConfigError("negative grid dimensions");
    }

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < nx_ && y < ny_; }
    bool contains(Pixel p) const noexcept { return contains(p.x, p.y); }
    std::size_t index(int x, int y) const noexcept { return std::size_t(y) * nx_ + x; }
    Pixel pixel(std::size_t idx) const noexcept { return {int(idx % nx_), int(idx / nx_)}; }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator()(Pixel p) { return data_[index(p.x, p.y)]; }
    const T& operator()(Pixel p) const { return data_[index(p.x, p.y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<T> data_;
};

using RealGrid = Grid<double>;
using Mask = Grid<unsigned char>;
using LabelGrid = Grid<int>;

inline constexpr int kNeighbor8Dx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
inline constexpr int kNeighbor8Dy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace neurogrow
