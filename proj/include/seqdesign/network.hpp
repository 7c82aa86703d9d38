#pragma once

// Graph model, routes, extension options and all-or-nothing OD coverage.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace seqdesign {

using NodeId = int;

struct Node {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Unordered node pair stored with first < second.
struct Segment {
  NodeId p = 0;
  NodeId q = 0;

  Segment() = default;
  Segment(NodeId a, NodeId b) : p(std::min(a, b)), q(std::max(a, b)) {}

  auto operator<=>(const Segment&) const = default;
};

/// Origin-destination pair, canonical i < j.
struct ODPair {
  NodeId i = 0;
  NodeId j = 0;

  ODPair() = default;
  ODPair(NodeId a, NodeId b) : i(std::min(a, b)), j(std::max(a, b)) {}

  auto operator<=>(const ODPair&) const = default;
};

using PairSet = std::set<ODPair>;

/// Dense index of the n(n-1)/2 unordered pairs of an n-node network.
class PairIndex {
 public:
  explicit PairIndex(std::size_t node_count = 0) : n_(node_count) {}

  std::size_t size() const { return n_ < 2 ? 0 : n_ * (n_ - 1) / 2; }
  std::size_t node_count() const { return n_; }

  std::size_t id(const ODPair& pr) const {
    const auto i = static_cast<std::size_t>(pr.i);
    const auto j = static_cast<std::size_t>(pr.j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  ODPair pair(std::size_t id) const {
    std::size_t i = 0;
    std::size_t row = n_ - 1;
    while (id >= row) {
      id -= row;
      ++i;
      --row;
    }
    return {static_cast<NodeId>(i), static_cast<NodeId>(i + 1 + id)};
  }

 private:
  std::size_t n_;
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected graph G(N, A). Immutable after construction.
class Network {
 public:
  Network() = default;

  Network(std::vector<Node> nodes, const std::vector<Segment>& segments) : nodes_(std::move(nodes)) {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      if (nodes_[k].id != static_cast<NodeId>(k)) {
        throw NetworkError("node ids must be contiguous from 0; record " + std::to_string(k) +
                           " has id " + std::to_string(nodes_[k].id));
      }
    }
    adjacency_.assign(nodes_.size(), {});
    std::set<Segment> seen;
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const Segment& s = segments[k];
      const std::string where = "segment " + std::to_string(k) + " (" + std::to_string(s.p) + "," +
                                std::to_string(s.q) + ")";
      if (s.p == s.q) throw NetworkError(where + ": self-loop");
      if (s.p < 0 || static_cast<std::size_t>(s.q) >= nodes_.size()) {
        throw NetworkError(where + ": dangling node reference");
      }
      if (!seen.insert(s).second) throw NetworkError(where + ": duplicate segment");
      segments_.push_back(s);
      adjacency_[s.p].push_back(s.q);
      adjacency_[s.q].push_back(s.p);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t segment_count() const { return segments_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  /// Neighbors sorted ascending.
  const std::vector<NodeId>& neighbors(NodeId id) const { return adjacency_.at(id); }
  PairIndex pair_index() const { return PairIndex(nodes_.size()); }

  bool adjacent(NodeId a, NodeId b) const {
    const auto& nb = adjacency_.at(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Segment> segments_;
  std::vector<std::vector<NodeId>> adjacency_;
};

/// Simple path of node ids.
struct Route {
  std::vector<NodeId> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  bool contains(NodeId n) const { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); }
  bool operator==(const Route&) const = default;
};

struct RouteSystem {
  std::vector<Route> routes;
  bool operator==(const RouteSystem&) const = default;
};

enum class RouteEnd { Front, Back };

struct ExtensionOption {
  Segment segment;
  RouteEnd attach_end = RouteEnd::Back;
  NodeId new_node = 0;

  bool operator==(const ExtensionOption&) const = default;
};

using OptionSet = std::vector<ExtensionOption>;

inline Network build_grid_network(int rows, int cols, double spacing) {
  if (rows < 2 || cols < 2) throw NetworkError("grid needs at least 2 rows and 2 columns");
  if (!(spacing > 0.0)) throw NetworkError("grid spacing must be positive");
  std::vector<Node> nodes;
  std::vector<Segment> segments;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const NodeId id = r * cols + c;
      nodes.push_back({id, c * spacing, r * spacing});
      if (c + 1 < cols) segments.emplace_back(id, id + 1);
      if (r + 1 < rows) segments.emplace_back(id, id + cols);
    }
  }
  return Network(std::move(nodes), segments);
}

/// Parses `{"nodes": [{id, x, y}], "segments": [[p, q], ...]}`.
inline Network parse_network(const nlohmann::json& doc) {
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw NetworkError("missing 'nodes' array");
  if (!doc.contains("segments") || !doc["segments"].is_array()) {
    throw NetworkError("missing 'segments' array");
  }
  std::vector<Node> nodes;
  std::size_t k = 0;
  for (const auto& rec : doc["nodes"]) {
    try {
      nodes.push_back({rec.at("id").get<NodeId>(), rec.at("x").get<double>(), rec.at("y").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw NetworkError("node record " + std::to_string(k) + ": " + e.what());
    }
    ++k;
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::vector<Segment> segments;
  k = 0;
  for (const auto& rec : doc["segments"]) {
    if (!rec.is_array() || rec.size() != 2 || !rec[0].is_number_integer() || !rec[1].is_number_integer()) {
      throw NetworkError("segment record " + std::to_string(k) + ": expected [p, q]");
    }
    segments.emplace_back(rec[0].get<NodeId>(), rec[1].get<NodeId>());
    ++k;
  }
  return Network(std::move(nodes), segments);
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open network file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw NetworkError(path + ": " + e.what());
  }
  try {
    return parse_network(doc);
  } catch (const NetworkError& e) {
    throw NetworkError(path + ": " + e.what());
  }
}

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : net.nodes()) doc["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  doc["segments"] = nlohmann::json::array();
  for (const auto& s : net.segments()) doc["segments"].push_back({s.p, s.q});
  return doc;
}

/// Segments incident to either terminal whose far node is not on the route.
/// A single-node route has one terminal, reported as the back end.
inline OptionSet adjacent_extensions(const Network& net, const Route& route) {
  OptionSet out;
  if (route.empty()) return out;
  auto scan = [&](NodeId terminal, RouteEnd end) {
    for (NodeId nb : net.neighbors(terminal)) {
      if (!route.contains(nb)) out.push_back({Segment(terminal, nb), end, nb});
    }
  };
  scan(route.nodes.back(), RouteEnd::Back);
  if (route.size() > 1) scan(route.nodes.front(), RouteEnd::Front);
  return out;
}

inline Route extend_route(Route route, const ExtensionOption& opt) {
  if (opt.attach_end == RouteEnd::Back) {
    route.nodes.push_back(opt.new_node);
  } else {
    route.nodes.insert(route.nodes.begin(), opt.new_node);
  }
  return route;
}

namespace detail {

inline bool share_node(const Route& a, const Route& b) {
  return std::any_of(a.nodes.begin(), a.nodes.end(), [&](NodeId n) { return b.contains(n); });
}

inline void add_within(const Route& r, PairSet& out) {
  for (std::size_t x = 0; x < r.size(); ++x)
    for (std::size_t y = x + 1; y < r.size(); ++y) out.emplace(r.nodes[x], r.nodes[y]);
}

inline void add_across(const Route& a, const Route& b, PairSet& out) {
  for (NodeId u : a.nodes)
    for (NodeId v : b.nodes)
      if (u != v) out.emplace(u, v);
}

}  // namespace detail

/// All-or-nothing coverage: pairs on one route, plus (with one transfer)
/// pairs split across two routes that share a node.
inline PairSet coverage_pairs(const RouteSystem& system, int max_transfers) {
  PairSet out;
  const auto& rs = system.routes;
  for (const auto& r : rs) detail::add_within(r, out);
  if (max_transfers >= 1) {
    for (std::size_t a = 0; a < rs.size(); ++a)
      for (std::size_t b = a + 1; b < rs.size(); ++b)
        if (detail::share_node(rs[a], rs[b])) detail::add_across(rs[a], rs[b], out);
  }
  return out;
}

/// Coverage set of an option: pairs served by an itinerary that rides the
/// extended route, alone or with one transfer to a route it intersects.
/// Already-covered pairs are included.
inline PairSet option_coverage(const RouteSystem& others, const Route& route, const ExtensionOption& opt,
                               int max_transfers) {
  const Route ext = extend_route(route, opt);
  PairSet out;
  detail::add_within(ext, out);
  if (max_transfers >= 1) {
    for (const auto& r : others.routes)
      if (detail::share_node(ext, r)) detail::add_across(ext, r, out);
  }
  return out;
}

/// Hop-count shortest path, lowest-id neighbor first on ties.
inline std::optional<Route> shortest_path(const Network& net, NodeId from, NodeId to) {
  std::vector<NodeId> parent(net.node_count(), -1);
  std::vector<char> seen(net.node_count(), 0);
  std::vector<NodeId> queue{from};
  seen[from] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const NodeId u = queue[head];
    if (u == to) break;
    for (NodeId v : net.neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        parent[v] = u;
        queue.push_back(v);
      }
    }
  }
  if (!seen[to]) return std::nullopt;
  Route r;
  for (NodeId v = to; v != -1; v = parent[v]) r.nodes.push_back(v);
  std::reverse(r.nodes.begin(), r.nodes.end());
  return r;
}

}  // namespace seqdesign
