#pragma once

// Linear RLC network integrated with the trapezoidal rule.
//
// States are series RL branch currents and node voltages across a shunt
// capacitance; every non-ground node must carry a capacitance. Branches end at
// a node, an ideal voltage source (an input) or ground. Breakers open a branch
// (its current is held at zero) or a shunt element. The network is balanced
// and static, so the alpha and beta axes share one system matrix and the
// state is stored as an n x 2 matrix.

#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "gfm/frames.hpp"

namespace gfm {

struct Terminal {
  enum class Kind { Node, Source, Ground };
  Kind kind = Kind::Ground;
  int index = -1;

  static Terminal node(int i) { return {Kind::Node, i}; }
  static Terminal source(int i) { return {Kind::Source, i}; }
  static Terminal ground() { return {Kind::Ground, -1}; }
};

struct NetworkSpec {
  struct Node {
    std::string name;
    double capacitance = 0.0;
  };
  struct Branch {
    std::string name;
    Terminal from;
    Terminal to;
    double inductance = 0.0;
    double resistance = 0.0;
    bool closed = true;
  };
  struct Shunt {
    std::string name;
    int node = -1;
    double conductance = 0.0;
    bool closed = true;
  };

  std::vector<Node> nodes;
  std::vector<Branch> branches;
  std::vector<Shunt> shunts;
  int source_count = 0;

  int add_node(std::string name, double capacitance);
  int add_branch(std::string name, Terminal from, Terminal to, double inductance,
                 double resistance, bool closed = true);
  int add_shunt(std::string name, int node, double conductance, bool closed = true);
  int add_source() { return source_count++; }
};

class LinearNetwork {
 public:
  using State = Eigen::Matrix<double, Eigen::Dynamic, 2>;
  using Inputs = Eigen::Matrix<double, Eigen::Dynamic, 2>;

  explicit LinearNetwork(NetworkSpec spec);

  /// Advances one step of length h. Inputs are the source voltages at the
  /// start and end of the step (trapezoidal average).
  void step(const Inputs& u_begin, const Inputs& u_end, double h);

  void set_branch_closed(int branch, bool closed);
  void set_shunt_closed(int shunt, bool closed);
  /// Extra time-varying conductance at a node (e.g. a constant-power load).
  void set_node_conductance(int node, double conductance);

  [[nodiscard]] AlphaBeta branch_current(int branch) const;
  [[nodiscard]] AlphaBeta node_voltage(int node) const;
  void set_branch_current(int branch, const AlphaBeta& i);
  void set_node_voltage(int node, const AlphaBeta& v);

  [[nodiscard]] const State& state() const { return x_; }
  void set_state(const State& x) { x_ = x; }
  [[nodiscard]] int state_size() const { return static_cast<int>(x_.rows()); }
  [[nodiscard]] int source_count() const { return spec_.source_count; }
  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }

  /// Continuous-time system matrices of x' = A x + B u for the current switch state.
  [[nodiscard]] Eigen::MatrixXd system_matrix() const;
  [[nodiscard]] Eigen::MatrixXd input_matrix() const;

  /// Stored magnetic plus electric energy, 1/2 sum(L i^2) + 1/2 sum(C v^2), both axes.
  [[nodiscard]] double stored_energy() const;

  /// Sinusoidal steady state at angular frequency omega for source phasors
  /// given as alpha-beta values at t = 0 (balanced positive sequence).
  [[nodiscard]] State steady_state(const Inputs& source_phasors, double omega) const;

  [[nodiscard]] int find_branch(const std::string& name) const;
  [[nodiscard]] int find_shunt(const std::string& name) const;
  [[nodiscard]] int find_node(const std::string& name) const;

 private:
  [[nodiscard]] int branch_state(int b) const { return b; }
  [[nodiscard]] int node_state(int n) const { return static_cast<int>(spec_.branches.size()) + n; }
  void rebuild(double h);

  NetworkSpec spec_;
  std::vector<double> extra_conductance_;
  State x_;
  bool dirty_ = true;
  double built_h_ = 0.0;
  Eigen::MatrixXd propagate_;  // (I - hA/2)^{-1} (I + hA/2)
  Eigen::MatrixXd drive_;      // (I - hA/2)^{-1} (h/2) B
};

}  // namespace gfm
