#include "libration/timefn.hpp"

#include <algorithm>
#include <stdexcept>

namespace libration {

TimeGrid::TimeGrid(std::vector<double> nodes) {
  if (nodes.size() < 2) throw std::invalid_argument("time grid needs at least two nodes");
  if (!std::is_sorted(nodes.begin(), nodes.end()))
    throw std::invalid_argument("time grid nodes must be increasing");
  nodes_ = std::make_shared<const std::vector<double>>(std::move(nodes));
}

std::size_t TimeGrid::interval(double t) const {
  const auto& n = *nodes_;
  if (t <= n.front()) return 0;
  if (t >= n.back()) return n.size() - 2;
  auto it = std::upper_bound(n.begin(), n.end(), t);
  return static_cast<std::size_t>(it - n.begin()) - 1;
}

struct TimeFunction::Impl {
  TimeGrid grid;
  std::vector<double> values;
  std::vector<double> slopes;  // empty for composed functions
  std::function<double(double)> rule;
};

TimeFunction TimeFunction::hermite(TimeGrid grid, std::vector<double> values,
                                   std::vector<double> slopes) {
  if (values.size() != grid.size() || slopes.size() != grid.size())
    throw std::invalid_argument("hermite data does not match the grid");
  auto impl = std::make_shared<Impl>();
  impl->grid = std::move(grid);
  impl->values = std::move(values);
  impl->slopes = std::move(slopes);
  TimeFunction f;
  f.impl_ = std::move(impl);
  return f;
}

TimeFunction TimeFunction::composed(TimeGrid grid, std::function<double(double)> rule) {
  auto impl = std::make_shared<Impl>();
  impl->values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) impl->values[i] = rule(grid[i]);
  impl->grid = std::move(grid);
  impl->rule = std::move(rule);
  TimeFunction f;
  f.impl_ = std::move(impl);
  return f;
}

double TimeFunction::operator()(double t) const {
  const Impl& m = *impl_;
  if (m.rule) return m.rule(t);
  std::size_t i = m.grid.interval(t);
  double t0 = m.grid[i];
  double h = m.grid[i + 1] - t0;
  double s = (t - t0) / h;
  double s2 = s * s;
  double s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1;
  double h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2;
  double h11 = s3 - s2;
  return h00 * m.values[i] + h10 * h * m.slopes[i] + h01 * m.values[i + 1] +
         h11 * h * m.slopes[i + 1];
}

double TimeFunction::at_end() const { return impl_->values.back(); }

double TimeFunction::node_value(std::size_t i) const { return impl_->values[i]; }

const TimeGrid& TimeFunction::grid() const { return impl_->grid; }

}  // namespace libration
