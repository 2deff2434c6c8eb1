#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fedsac/core/csv.hpp"
#include "fedsac/core/error.hpp"

/// Radial distribution network: topology, line data and the branch-flow
/// (DistFlow) relations.
///
/// Conventions, all quantities per-unit on a 1 MW power base:
///  - loads (`p_load`, `q_load`, aggregator power) are consumptions, positive
///    when drawn from the grid;
///  - line flows P, Q are measured at the sending (parent) end and are positive
///    parent to child;
///  - `v` and `l` are squared voltage and squared current magnitudes;
///  - the substation is bus 0 with v fixed at 1.
namespace fedsac::rdn {

struct BusSpec {
  int id = 0;
  double v_min = 1.0;
  double v_max = 1.0;
  double p_load = 0.0;
  double q_load = 0.0;
  bool has_aggregator = false;
};

struct LineSpec {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  double l_max = 1.0;
};

/// An immutable, validated radial network. Line index j connects
/// `lines()[j].from_bus` (parent) to `lines()[j].to_bus` (child).
class RadialNetwork {
 public:
  RadialNetwork(std::vector<BusSpec> buses, std::vector<LineSpec> lines)
      : buses_(std::move(buses)), lines_(std::move(lines)) {
    validate_and_index();
  }

  const std::vector<BusSpec>& buses() const noexcept { return buses_; }
  const std::vector<LineSpec>& lines() const noexcept { return lines_; }
  std::size_t num_buses() const noexcept { return buses_.size(); }
  std::size_t num_lines() const noexcept { return lines_.size(); }

  /// Child buses of `bus` (the set Ω_s), in line-file order.
  const std::vector<int>& children(int bus) const { return children_.at(bus); }
  /// Lines leaving `bus` towards its children.
  const std::vector<int>& child_lines(int bus) const { return child_lines_.at(bus); }
  /// Line feeding `bus` from its parent; -1 for the substation.
  int parent_line(int bus) const { return parent_line_.at(bus); }
  /// Buses in breadth-first order from the substation.
  const std::vector<int>& bfs_order() const noexcept { return bfs_order_; }
  /// Depth of the deepest bus (substation has depth 0).
  int depth() const noexcept { return depth_; }

  std::vector<int> aggregator_buses() const {
    std::vector<int> out;
    for (const auto& b : buses_) {
      if (b.has_aggregator) {
        out.push_back(b.id);
      }
    }
    return out;
  }

 private:
  void validate_and_index() {
    const std::size_t n = buses_.size();
    if (n == 0) {
      throw TopologyError("network has no buses");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = buses_[i];
      if (b.id != static_cast<int>(i)) {
        throw TopologyError("bus ids must be 0..n-1 in order; found id " +
                            std::to_string(b.id) + " at row " + std::to_string(i));
      }
      if (!(b.v_min > 0.0) || b.v_min > b.v_max) {
        throw BoundError("bus " + std::to_string(b.id) +
                         ": need 0 < v_min <= v_max");
      }
    }
    if (buses_[0].v_min != 1.0 || buses_[0].v_max != 1.0) {
      throw BoundError("substation bus 0 must have v_min = v_max = 1");
    }

    parent_line_.assign(n, -1);
    children_.assign(n, {});
    child_lines_.assign(n, {});
    for (std::size_t j = 0; j < lines_.size(); ++j) {
      const auto& ln = lines_[j];
      const auto label = "line " + std::to_string(ln.from_bus) + "->" + std::to_string(ln.to_bus);
      if (ln.from_bus < 0 || ln.to_bus < 0 || ln.from_bus >= static_cast<int>(n) ||
          ln.to_bus >= static_cast<int>(n)) {
        throw TopologyError(label + ": unknown bus");
      }
      if (ln.from_bus == ln.to_bus) {
        throw TopologyError(label + ": self loop");
      }
      if (ln.r < 0.0 || ln.x < 0.0 || ln.b < 0.0) {
        throw BoundError(label + ": r, x, b must be nonnegative");
      }
      if (!(ln.l_max > 0.0)) {
        throw BoundError(label + ": l_max must be positive");
      }
      if (ln.to_bus == 0) {
        throw TopologyError(label + ": cycle through the substation");
      }
      if (parent_line_[ln.to_bus] != -1) {
        throw TopologyError("bus " + std::to_string(ln.to_bus) + " has multiple parents");
      }
      parent_line_[ln.to_bus] = static_cast<int>(j);
      children_[ln.from_bus].push_back(ln.to_bus);
      child_lines_[ln.from_bus].push_back(static_cast<int>(j));
    }

    // Every non-root bus has at most one parent, so buses unreachable from the
    // root either have no parent (disconnected) or sit on a cycle.
    std::vector<int> depth(n, -1);
    bfs_order_.clear();
    bfs_order_.push_back(0);
    depth[0] = 0;
    for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
      int bus = bfs_order_[head];
      for (int child : children_[bus]) {
        depth[child] = depth[bus] + 1;
        bfs_order_.push_back(child);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (depth[i] < 0) {
        if (parent_line_[i] == -1) {
          throw TopologyError("bus " + std::to_string(i) + " is disconnected");
        }
        throw TopologyError("bus " + std::to_string(i) + " lies on a cycle");
      }
    }
    if (lines_.size() != n - 1) {
      throw TopologyError("a radial network needs |lines| = |buses| - 1");
    }
    depth_ = 0;
    for (int d : depth) {
      depth_ = std::max(depth_, d);
    }
  }

  std::vector<BusSpec> buses_;
  std::vector<LineSpec> lines_;
  std::vector<int> parent_line_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> child_lines_;
  std::vector<int> bfs_order_;
  int depth_ = 0;
};

inline const std::vector<std::string>& bus_file_header() {
  static const std::vector<std::string> h{"id", "v_min", "v_max", "p_load", "q_load",
                                          "has_aggregator"};
  return h;
}

inline const std::vector<std::string>& line_file_header() {
  static const std::vector<std::string> h{"from", "to", "r", "x", "b", "l_max"};
  return h;
}

/// Reads `buses.csv` and `lines.csv` and returns a validated network.
inline RadialNetwork load_case(const std::filesystem::path& bus_file,
                               const std::filesystem::path& line_file) {
  auto bus_table = csv::read_table(bus_file, bus_file_header());
  std::vector<BusSpec> buses;
  for (std::size_t i = 0; i < bus_table.rows.size(); ++i) {
    const auto& row = bus_table.rows[i];
    const auto ctx = bus_file.string() + ":" + std::to_string(bus_table.line_numbers[i]);
    BusSpec b;
    b.id = static_cast<int>(csv::parse_int(row[0], ctx));
    b.v_min = csv::parse_double(row[1], ctx);
    b.v_max = csv::parse_double(row[2], ctx);
    b.p_load = csv::parse_double(row[3], ctx);
    b.q_load = csv::parse_double(row[4], ctx);
    auto flag = csv::parse_int(row[5], ctx);
    if (flag != 0 && flag != 1) {
      throw ParseError(ctx + ": has_aggregator must be 0 or 1");
    }
    b.has_aggregator = flag == 1;
    buses.push_back(b);
  }
  std::sort(buses.begin(), buses.end(),
            [](const BusSpec& a, const BusSpec& b) { return a.id < b.id; });

  auto line_table = csv::read_table(line_file, line_file_header());
  std::vector<LineSpec> lines;
  for (std::size_t i = 0; i < line_table.rows.size(); ++i) {
    const auto& row = line_table.rows[i];
    const auto ctx = line_file.string() + ":" + std::to_string(line_table.line_numbers[i]);
    LineSpec ln;
    ln.from_bus = static_cast<int>(csv::parse_int(row[0], ctx));
    ln.to_bus = static_cast<int>(csv::parse_int(row[1], ctx));
    ln.r = csv::parse_double(row[2], ctx);
    ln.x = csv::parse_double(row[3], ctx);
    ln.b = csv::parse_double(row[4], ctx);
    ln.l_max = csv::parse_double(row[5], ctx);
    lines.push_back(ln);
  }
  return RadialNetwork(std::move(buses), std::move(lines));
}

inline void write_case(const RadialNetwork& net, const std::filesystem::path& bus_file,
                       const std::filesystem::path& line_file) {
  {
    csv::Writer w(bus_file, bus_file_header());
    for (const auto& b : net.buses()) {
      w.row(b.id, b.v_min, b.v_max, b.p_load, b.q_load, b.has_aggregator ? 1 : 0);
    }
  }
  csv::Writer w(line_file, line_file_header());
  for (const auto& ln : net.lines()) {
    w.row(ln.from_bus, ln.to_bus, ln.r, ln.x, ln.b, ln.l_max);
  }
}

/// Squared current magnitude of a line, (P² + Q²) / v.
inline double branch_current(double p, double q, double v) {
  if (!(v > 0.0)) {
    throw DomainError("branch_current: squared voltage must be positive");
  }
  return (p * p + q * q) / v;
}

/// A candidate power-flow point.
struct FlowState {
  std::vector<double> P;  ///< per line, sending-end active flow
  std::vector<double> Q;  ///< per line, sending-end reactive flow
  std::vector<double> l;  ///< per line, squared current
  std::vector<double> v;  ///< per bus, squared voltage
  double p0 = 0.0;        ///< substation active import

  static FlowState zeros(const RadialNetwork& net) {
    FlowState fs;
    fs.P.assign(net.num_lines(), 0.0);
    fs.Q.assign(net.num_lines(), 0.0);
    fs.l.assign(net.num_lines(), 0.0);
    fs.v.assign(net.num_buses(), 1.0);
    return fs;
  }
};

}  // namespace fedsac::rdn
