#pragma once

// Small trainable building blocks on top of the autodiff tape.

#include <cmath>
#include <random>
#include <string>

#include "cmggib/autograd.hpp"

namespace cmggib::nn {

using ag::Mat;
using ag::Parameter;
using ag::Tape;
using ag::Var;
using Rng = std::mt19937_64;

inline Mat glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

// y = x Wᵀ + b, W is out × in.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng, double gain = 1.0)
      : weight(name + ".weight", glorot(out, in, rng, gain)), bias(name + ".bias", Mat::Zero(1, out)) {}

  Var operator()(Tape& t, const Var& x) { return ag::affine(x, t.param(weight), t.param(bias)); }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    f(bias);
  }
};

// Two-layer perceptron with a Tanh hidden layer.
struct Mlp {
  Linear hidden;
  Linear out;

  Mlp() = default;
  Mlp(const std::string& name, Eigen::Index in, Eigen::Index width, Eigen::Index out_dim, Rng& rng, double out_gain = 1.0)
      : hidden(name + ".hidden", in, width, rng), out(name + ".out", width, out_dim, rng, out_gain) {}

  Var operator()(Tape& t, const Var& x) { return out(t, ag::tanh(hidden(t, x))); }

  template <typename F>
  void visit(F&& f) {
    hidden.visit(f);
    out.visit(f);
  }
};

}  // namespace cmggib::nn
