#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace libration {

/// Monotone time grid shared by every dense function of one orbit.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> nodes);

  std::size_t size() const { return nodes_ ? nodes_->size() : 0; }
  double operator[](std::size_t i) const { return (*nodes_)[i]; }
  double front() const { return nodes_->front(); }
  double back() const { return nodes_->back(); }
  const std::vector<double>& nodes() const { return *nodes_; }

  /// Index i with nodes[i] <= t <= nodes[i+1], clamped to the grid.
  std::size_t interval(double t) const;

  bool same_as(const TimeGrid& other) const { return nodes_ == other.nodes_; }

 private:
  std::shared_ptr<const std::vector<double>> nodes_;
};

/// Scalar function of time on a TimeGrid.
///
/// Either a cubic Hermite interpolant of node values and node slopes, or a
/// pointwise rule composed from other functions (with its node samples kept
/// for export). Copies share storage.
class TimeFunction {
 public:
  TimeFunction() = default;

  static TimeFunction hermite(TimeGrid grid, std::vector<double> values,
                              std::vector<double> slopes);
  static TimeFunction composed(TimeGrid grid, std::function<double(double)> rule);

  double operator()(double t) const;
  double at_end() const;
  double node_value(std::size_t i) const;
  const TimeGrid& grid() const;
  bool valid() const { return static_cast<bool>(impl_); }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace libration
