#pragma once

#include <memory>

#include "wdro/autodiff.hpp"
#include "wdro/objectives.hpp"

namespace wdro::fixtures {

inline Sample point(std::initializer_list<double> xs) {
  Vector x(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double v : xs) x[k++] = v;
  return Sample(std::move(x));
}

inline Sample labelled(std::initializer_list<double> xs, Eigen::Index classes, Eigen::Index label) {
  Sample z = point(xs);
  z.y = Vector::Zero(classes);
  z.y[label] = 1.0;
  return z;
}

/// Owns a graph together with a loss bound to it.
struct OwnedLoss {
  std::shared_ptr<ad::ComputationGraph> graph;
  std::unique_ptr<objectives::DifferentiableLoss> loss;
  const objectives::DifferentiableLoss& operator*() const { return *loss; }
  const objectives::DifferentiableLoss* operator->() const { return loss.get(); }
};

template <class Build>
OwnedLoss make_loss(Eigen::Index dim, Build build, Vector theta = {}) {
  ad::GraphBuilder g;
  const ad::NodeRef x = g.features(dim);
  const ad::NodeRef out = build(g, x);
  OwnedLoss o;
  o.graph = std::make_shared<ad::ComputationGraph>(std::move(g).build(out));
  o.loss = std::make_unique<objectives::DifferentiableLoss>(*o.graph, std::move(theta));
  return o;
}

/// h(x) = sum(x).
inline OwnedLoss identity_loss(Eigen::Index dim = 1) {
  return make_loss(dim, [](ad::GraphBuilder& g, ad::NodeRef x) { return g.sum(x); });
}

/// h(x) = scale * sum(x * x) + shift.
inline OwnedLoss quadratic_loss(Eigen::Index dim, double scale, double shift) {
  return make_loss(dim, [=](ad::GraphBuilder& g, ad::NodeRef x) { return g.affine(g.sum(g.mul(x, x)), scale, shift); });
}

inline OwnedLoss constant_loss(Eigen::Index dim, double c) {
  return make_loss(dim, [=](ad::GraphBuilder& g, ad::NodeRef x) { return g.affine(g.sum(x), 0.0, c); });
}

/// Random two-layer tanh network R^dim -> R with parameters drawn from rng.
inline OwnedLoss tanh_network(Eigen::Index dim, Eigen::Index width, Rng& rng) {
  ad::GraphBuilder g;
  const ad::NodeRef x = g.features(dim);
  const ad::NodeRef w1 = g.parameter("W1", width, dim);
  const ad::NodeRef b1 = g.parameter("b1", width, 1);
  const ad::NodeRef w2 = g.parameter("W2", 1, width);
  const ad::NodeRef out = g.sum(g.matvec(w2, g.tanh(g.add(g.matvec(w1, x), b1))));
  OwnedLoss o;
  o.graph = std::make_shared<ad::ComputationGraph>(std::move(g).build(out));
  std::normal_distribution<double> n(0.0, 1.0);
  Vector theta(o.graph->parameter_count());
  for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] = n(rng);
  o.loss = std::make_unique<objectives::DifferentiableLoss>(*o.graph, std::move(theta));
  return o;
}

}  // namespace wdro::fixtures
