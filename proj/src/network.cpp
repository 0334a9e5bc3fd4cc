#include "gfm/network.hpp"

#include <cmath>
#include <utility>

#include "gfm/errors.hpp"

namespace gfm {

int NetworkSpec::add_node(std::string name, double capacitance) {
  nodes.push_back({std::move(name), capacitance});
  return static_cast<int>(nodes.size()) - 1;
}

int NetworkSpec::add_branch(std::string name, Terminal from, Terminal to, double inductance,
                            double resistance, bool closed) {
  branches.push_back({std::move(name), from, to, inductance, resistance, closed});
  return static_cast<int>(branches.size()) - 1;
}

int NetworkSpec::add_shunt(std::string name, int node, double conductance, bool closed) {
  shunts.push_back({std::move(name), node, conductance, closed});
  return static_cast<int>(shunts.size()) - 1;
}

LinearNetwork::LinearNetwork(NetworkSpec spec)
    : spec_(std::move(spec)), extra_conductance_(spec_.nodes.size(), 0.0) {
  for (const auto& n : spec_.nodes) {
    if (!(n.capacitance > 0.0)) throw ConfigError("node '" + n.name + "' needs a capacitance > 0");
  }
  for (const auto& b : spec_.branches) {
    if (!(b.inductance > 0.0)) throw ConfigError("branch '" + b.name + "' needs an inductance > 0");
    if (b.resistance < 0.0) throw ConfigError("branch '" + b.name + "' has negative resistance");
    for (const Terminal& t : {b.from, b.to}) {
      if (t.kind == Terminal::Kind::Node &&
          (t.index < 0 || t.index >= static_cast<int>(spec_.nodes.size()))) {
        throw ConfigError("branch '" + b.name + "' references an unknown node");
      }
      if (t.kind == Terminal::Kind::Source && (t.index < 0 || t.index >= spec_.source_count)) {
        throw ConfigError("branch '" + b.name + "' references an unknown source");
      }
    }
  }
  for (const auto& s : spec_.shunts) {
    if (s.node < 0 || s.node >= static_cast<int>(spec_.nodes.size())) {
      throw ConfigError("shunt '" + s.name + "' references an unknown node");
    }
    if (s.conductance < 0.0) throw ConfigError("shunt '" + s.name + "' has negative conductance");
  }
  x_ = State::Zero(static_cast<Eigen::Index>(spec_.branches.size() + spec_.nodes.size()), 2);
}

Eigen::MatrixXd LinearNetwork::system_matrix() const {
  const int n = state_size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < static_cast<int>(spec_.branches.size()); ++b) {
    const auto& br = spec_.branches[b];
    if (!br.closed) continue;
    const int row = branch_state(b);
    const double inv_l = 1.0 / br.inductance;
    a(row, row) = -br.resistance * inv_l;
    if (br.from.kind == Terminal::Kind::Node) {
      a(row, node_state(br.from.index)) += inv_l;
      a(node_state(br.from.index), row) -= 1.0 / spec_.nodes[br.from.index].capacitance;
    }
    if (br.to.kind == Terminal::Kind::Node) {
      a(row, node_state(br.to.index)) -= inv_l;
      a(node_state(br.to.index), row) += 1.0 / spec_.nodes[br.to.index].capacitance;
    }
  }
  std::vector<double> conductance = extra_conductance_;
  for (const auto& s : spec_.shunts) {
    if (s.closed) conductance[s.node] += s.conductance;
  }
  for (int k = 0; k < static_cast<int>(spec_.nodes.size()); ++k) {
    a(node_state(k), node_state(k)) -= conductance[k] / spec_.nodes[k].capacitance;
  }
  return a;
}

Eigen::MatrixXd LinearNetwork::input_matrix() const {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(state_size(), spec_.source_count);
  for (int k = 0; k < static_cast<int>(spec_.branches.size()); ++k) {
    const auto& br = spec_.branches[k];
    if (!br.closed) continue;
    if (br.from.kind == Terminal::Kind::Source) b(branch_state(k), br.from.index) += 1.0 / br.inductance;
    if (br.to.kind == Terminal::Kind::Source) b(branch_state(k), br.to.index) -= 1.0 / br.inductance;
  }
  return b;
}

void LinearNetwork::rebuild(double h) {
  const Eigen::MatrixXd a = system_matrix();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::PartialPivLU<Eigen::MatrixXd> lhs(identity - 0.5 * h * a);
  propagate_ = lhs.solve(identity + 0.5 * h * a);
  drive_ = lhs.solve(0.5 * h * input_matrix());
  built_h_ = h;
  dirty_ = false;
}

void LinearNetwork::step(const Inputs& u_begin, const Inputs& u_end, double h) {
  if (dirty_ || h != built_h_) rebuild(h);
  x_ = propagate_ * x_ + drive_ * (u_begin + u_end);
}

void LinearNetwork::set_branch_closed(int branch, bool closed) {
  auto& br = spec_.branches.at(branch);
  if (br.closed == closed) return;
  br.closed = closed;
  if (!closed) x_.row(branch_state(branch)).setZero();
  dirty_ = true;
}

void LinearNetwork::set_shunt_closed(int shunt, bool closed) {
  auto& s = spec_.shunts.at(shunt);
  if (s.closed == closed) return;
  s.closed = closed;
  dirty_ = true;
}

void LinearNetwork::set_node_conductance(int node, double conductance) {
  if (extra_conductance_.at(node) == conductance) return;
  extra_conductance_[node] = conductance;
  dirty_ = true;
}

AlphaBeta LinearNetwork::branch_current(int branch) const {
  const int r = branch_state(branch);
  return {x_(r, 0), x_(r, 1)};
}

AlphaBeta LinearNetwork::node_voltage(int node) const {
  const int r = node_state(node);
  return {x_(r, 0), x_(r, 1)};
}

void LinearNetwork::set_branch_current(int branch, const AlphaBeta& i) {
  const int r = branch_state(branch);
  x_(r, 0) = i.x;
  x_(r, 1) = i.y;
}

void LinearNetwork::set_node_voltage(int node, const AlphaBeta& v) {
  const int r = node_state(node);
  x_(r, 0) = v.x;
  x_(r, 1) = v.y;
}

double LinearNetwork::stored_energy() const {
  double e = 0.0;
  for (int b = 0; b < static_cast<int>(spec_.branches.size()); ++b) {
    e += 0.5 * spec_.branches[b].inductance * x_.row(branch_state(b)).squaredNorm();
  }
  for (int k = 0; k < static_cast<int>(spec_.nodes.size()); ++k) {
    e += 0.5 * spec_.nodes[k].capacitance * x_.row(node_state(k)).squaredNorm();
  }
  return e;
}

LinearNetwork::State LinearNetwork::steady_state(const Inputs& source_phasors, double omega) const {
  // In a frame rotating at omega the state is constant:
  //   0 = A x_d + omega x_q + B u_d,   0 = A x_q - omega x_d + B u_q.
  const Eigen::MatrixXd a = system_matrix();
  const Eigen::MatrixXd b = input_matrix();
  const int n = state_size();
  Eigen::MatrixXd lhs(2 * n, 2 * n);
  lhs << a, omega * Eigen::MatrixXd::Identity(n, n), -omega * Eigen::MatrixXd::Identity(n, n), a;
  Eigen::VectorXd rhs(2 * n);
  rhs << -b * source_phasors.col(0), -b * source_phasors.col(1);
  const Eigen::VectorXd sol = lhs.partialPivLu().solve(rhs);
  State x(n, 2);
  x.col(0) = sol.head(n);
  x.col(1) = sol.tail(n);
  return x;
}

int LinearNetwork::find_branch(const std::string& name) const {
  for (int k = 0; k < static_cast<int>(spec_.branches.size()); ++k) {
    if (spec_.branches[k].name == name) return k;
  }
  return -1;
}

int LinearNetwork::find_shunt(const std::string& name) const {
  for (int k = 0; k < static_cast<int>(spec_.shunts.size()); ++k) {
    if (spec_.shunts[k].name == name) return k;
  }
  return -1;
}

int LinearNetwork::find_node(const std::string& name) const {
  for (int k = 0; k < static_cast<int>(spec_.nodes.size()); ++k) {
    if (spec_.nodes[k].name == name) return k;
  }
  return -1;
}

}  // namespace gfm
