#pragma once

// Brute-force oracles and random instance generators shared by the tests.

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqdesign/network.hpp"

namespace testsupport {

using namespace seqdesign;

inline std::string source_path(const std::string& rel) { return std::string(SEQDESIGN_SOURCE_DIR) + "/" + rel; }

/// Connected random network: random spanning tree plus extra edges, distinct coordinates.
template <class URBG>
Network random_network(int n, double extra_edge_prob, URBG& rng) {
  std::vector<Node> nodes;
  for (int k = 0; k < n; ++k) nodes.push_back({k, static_cast<double>(k % 4) + 0.1 * k, static_cast<double>(k / 4)});
  std::set<Segment> segs;
  for (int k = 1; k < n; ++k) segs.emplace(k, std::uniform_int_distribution<int>(0, k - 1)(rng));
  std::bernoulli_distribution extra(extra_edge_prob);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (extra(rng)) segs.emplace(a, b);
  return Network(std::move(nodes), std::vector<Segment>(segs.begin(), segs.end()));
}

/// Random simple path grown by random extensions from a random node.
template <class URBG>
Route random_route(const Network& net, int max_len, URBG& rng) {
  Route r{{std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(net.node_count()) - 1)(rng)}};
  const int len = std::uniform_int_distribution<int>(1, max_len)(rng);
  while (static_cast<int>(r.size()) < len) {
    const OptionSet opts = adjacent_extensions(net, r);
    if (opts.empty()) break;
    r = extend_route(r, opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)]);
  }
  return r;
}

/// Pairs served with at most `max_transfers` transfers, by breadth-first
/// search over (route, position) states: riding moves along a route, a
/// transfer moves to another route at the same node.
inline PairSet brute_force_coverage(const RouteSystem& sys, std::size_t node_count, int max_transfers) {
  PairSet out;
  const auto& rs = sys.routes;
  for (NodeId origin = 0; origin < static_cast<NodeId>(node_count); ++origin) {
    struct State {
      std::size_t route;
      std::size_t pos;
      int transfers;
    };
    std::set<std::tuple<std::size_t, std::size_t, int>> seen;
    std::deque<State> queue;
    for (std::size_t r = 0; r < rs.size(); ++r)
      for (std::size_t p = 0; p < rs[r].nodes.size(); ++p)
        if (rs[r].nodes[p] == origin) queue.push_back({r, p, 0});
    while (!queue.empty()) {
      const State s = queue.front();
      queue.pop_front();
      if (!seen.insert({s.route, s.pos, s.transfers}).second) continue;
      const NodeId here = rs[s.route].nodes[s.pos];
      if (here != origin) out.emplace(origin, here);
      if (s.pos > 0) queue.push_back({s.route, s.pos - 1, s.transfers});
      if (s.pos + 1 < rs[s.route].nodes.size()) queue.push_back({s.route, s.pos + 1, s.transfers});
      if (s.transfers < max_transfers) {
        for (std::size_t r = 0; r < rs.size(); ++r) {
          if (r == s.route) continue;
          for (std::size_t p = 0; p < rs[r].nodes.size(); ++p)
            if (rs[r].nodes[p] == here) queue.push_back({r, p, s.transfers + 1});
        }
      }
    }
  }
  return out;
}

/// Random covariance W W^T / dim plus a small ridge.
template <class URBG>
Eigen::MatrixXd random_psd(int dim, URBG& rng, double ridge = 1e-3) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd w(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) w(r, c) = z(rng);
  Eigen::MatrixXd s = w * w.transpose() / dim;
  s.diagonal().array() += ridge;
  return 0.5 * (s + s.transpose());
}

}  // namespace testsupport
