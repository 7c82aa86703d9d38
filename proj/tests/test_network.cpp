#include <random>

#include <gtest/gtest.h>

#include "seqdesign/network.hpp"
#include "support.hpp"

using namespace seqdesign;
using testsupport::brute_force_coverage;

namespace {

Network line_network(int n) {
  std::vector<Node> nodes;
  std::vector<Segment> segs;
  for (int k = 0; k < n; ++k) nodes.push_back({k, static_cast<double>(k), 0.0});
  for (int k = 0; k + 1 < n; ++k) segs.emplace_back(k, k + 1);
  return Network(nodes, segs);
}

PairSet pairs(std::initializer_list<std::pair<int, int>> ps) {
  PairSet out;
  for (auto [a, b] : ps) out.emplace(a, b);
  return out;
}

}  // namespace

TEST(Grid, FiveByFiveHas25NodesAnd40Segments) {
  const Network g = build_grid_network(5, 5, 1.0);
  EXPECT_EQ(g.node_count(), 25u);
  EXPECT_EQ(g.segment_count(), 40u);
}

TEST(Grid, TwoByThreeHas7Segments) {
  const Network g = build_grid_network(2, 3, 1.0);
  EXPECT_EQ(g.node_count(), 6u);
  EXPECT_EQ(g.segment_count(), 7u);
}

TEST(Grid, RejectsDegenerateShapes) {
  EXPECT_THROW(build_grid_network(1, 5, 1.0), NetworkError);
  EXPECT_THROW(build_grid_network(3, 3, 0.0), NetworkError);
}

TEST(PairIndex, RoundTripsEveryPair) {
  const PairIndex idx(12);
  ASSERT_EQ(idx.size(), 66u);
  for (std::size_t id = 0; id < idx.size(); ++id) EXPECT_EQ(idx.id(idx.pair(id)), id);
  EXPECT_EQ(idx.id(ODPair(0, 1)), 0u);
  EXPECT_EQ(idx.id(ODPair(10, 11)), 65u);
}

TEST(LoadNetwork, PumaFixtureHas55NodesAnd123Segments) {
  const Network net = load_network(testsupport::source_path("data/puma/network.json"));
  EXPECT_EQ(net.node_count(), 55u);
  EXPECT_EQ(net.segment_count(), 123u);
}

TEST(ParseNetwork, RejectsSelfLoop) {
  const auto doc = nlohmann::json::parse(R"({"nodes":[{"id":0,"x":0,"y":0},{"id":1,"x":1,"y":0},
    {"id":2,"x":2,"y":0},{"id":3,"x":3,"y":0}],"segments":[[0,1],[3,3]]})");
  try {
    parse_network(doc);
    FAIL() << "expected NetworkError";
  } catch (const NetworkError& e) {
    EXPECT_NE(std::string(e.what()).find("self-loop"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("segment 1"), std::string::npos);
  }
}

TEST(ParseNetwork, RejectsDuplicateSegment) {
  const auto doc = nlohmann::json::parse(R"({"nodes":[{"id":0,"x":0,"y":0},{"id":1,"x":1,"y":0},
    {"id":2,"x":2,"y":0}],"segments":[[1,2],[0,1],[2,1]]})");
  try {
    parse_network(doc);
    FAIL() << "expected NetworkError";
  } catch (const NetworkError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate segment"), std::string::npos);
  }
}

TEST(ParseNetwork, RejectsDanglingReferenceAndBadIds) {
  const auto dangling = nlohmann::json::parse(R"({"nodes":[{"id":0,"x":0,"y":0}],"segments":[[0,4]]})");
  EXPECT_THROW(parse_network(dangling), NetworkError);
  const auto gap = nlohmann::json::parse(R"({"nodes":[{"id":0,"x":0,"y":0},{"id":2,"x":1,"y":0}],"segments":[]})");
  EXPECT_THROW(parse_network(gap), NetworkError);
  EXPECT_THROW(load_network("/nonexistent/network.json"), NetworkError);
}

TEST(ParseNetwork, JsonRoundTrip) {
  const Network g = build_grid_network(3, 4, 2.0);
  const Network back = parse_network(network_to_json(g));
  EXPECT_EQ(back.segments(), g.segments());
  EXPECT_EQ(back.node_count(), g.node_count());
}

TEST(AdjacentExtensions, CornerAndCenter) {
  const Network g = build_grid_network(5, 5, 1.0);
  EXPECT_EQ(adjacent_extensions(g, Route{{0}}).size(), 2u);
  EXPECT_EQ(adjacent_extensions(g, Route{{12}}).size(), 4u);
}

TEST(AdjacentExtensions, HamiltonianSnakeIsDeadEnd) {
  const Network g = build_grid_network(3, 3, 1.0);
  EXPECT_TRUE(adjacent_extensions(g, Route{{0, 1, 2, 5, 4, 3, 6, 7, 8}}).empty());
}

TEST(AdjacentExtensions, ScansBothEndsAndSkipsRouteNodes) {
  const Network g = build_grid_network(3, 3, 1.0);
  const OptionSet opts = adjacent_extensions(g, Route{{1, 4}});
  // Back end 4: neighbours 3, 5, 7. Front end 1: neighbours 0, 2.
  ASSERT_EQ(opts.size(), 5u);
  EXPECT_EQ(opts[0].attach_end, RouteEnd::Back);
  EXPECT_EQ(opts[0].new_node, 3);
  EXPECT_EQ(opts[3].attach_end, RouteEnd::Front);
  EXPECT_EQ(opts[3].new_node, 0);
  const Route front = extend_route(Route{{1, 4}}, opts[3]);
  EXPECT_EQ(front.nodes, (std::vector<NodeId>{0, 1, 4}));
}

TEST(Coverage, SingleRoute) {
  EXPECT_EQ(coverage_pairs(RouteSystem{{Route{{1, 2, 3}}}}, 1), pairs({{1, 2}, {1, 3}, {2, 3}}));
}

TEST(Coverage, IntersectingRoutesWithTransfer) {
  const RouteSystem sys{{Route{{1, 2, 3}}, Route{{3, 4, 5}}}};
  const PairSet got = coverage_pairs(sys, 1);
  EXPECT_EQ(got.size(), 10u);
  for (int a = 1; a <= 5; ++a)
    for (int b = a + 1; b <= 5; ++b) EXPECT_TRUE(got.count(ODPair(a, b)));
  EXPECT_EQ(coverage_pairs(sys, 0).size(), 6u);
}

TEST(Coverage, DisjointRoutes) {
  EXPECT_EQ(coverage_pairs(RouteSystem{{Route{{1, 2}}, Route{{3, 4}}}}, 1), pairs({{1, 2}, {3, 4}}));
}

TEST(OptionCoverage, SixPairExample) {
  const Route route{{1, 2, 3}};
  const ExtensionOption opt{Segment(3, 4), RouteEnd::Back, 4};
  EXPECT_EQ(option_coverage(RouteSystem{}, route, opt, 1), pairs({{1, 2}, {1, 3}, {2, 3}, {1, 4}, {2, 4}, {3, 4}}));
}

TEST(OptionCoverage, FirstExtension) {
  const ExtensionOption opt{Segment(1, 2), RouteEnd::Back, 2};
  EXPECT_EQ(option_coverage(RouteSystem{}, Route{{1}}, opt, 1), pairs({{1, 2}}));
}

TEST(OptionCoverage, TransferPartnerContributes) {
  const RouteSystem others{{Route{{2, 5}}}};
  const ExtensionOption opt{Segment(1, 6), RouteEnd::Front, 6};
  const PairSet got = option_coverage(others, Route{{1, 2}}, opt, 1);
  EXPECT_TRUE(got.count(ODPair(6, 5)));
  EXPECT_FALSE(option_coverage(others, Route{{1, 2}}, opt, 0).count(ODPair(6, 5)));
}

TEST(ShortestPath, LineAndUnreachable) {
  const Network line = line_network(5);
  const auto p = shortest_path(line, 4, 1);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->nodes, (std::vector<NodeId>{4, 3, 2, 1}));
  const Network split({{0, 0, 0}, {1, 1, 0}, {2, 2, 0}}, {Segment(0, 1)});
  EXPECT_FALSE(shortest_path(split, 0, 2));
}

TEST(ShortestPath, GridTiesAreDeterministic) {
  const Network g = build_grid_network(3, 3, 1.0);
  const auto p = shortest_path(g, 0, 8);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->size(), 5u);
  EXPECT_EQ(p->nodes, shortest_path(g, 0, 8)->nodes);
}

TEST(CoverageProperty, MatchesBruteForceAndTransfersOnlyAdd) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 10)(rng);
    const Network net = testsupport::random_network(n, 0.2, rng);
    RouteSystem sys;
    const int k = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int r = 0; r < k; ++r) sys.routes.push_back(testsupport::random_route(net, 5, rng));
    const PairSet c0 = coverage_pairs(sys, 0);
    const PairSet c1 = coverage_pairs(sys, 1);
    ASSERT_EQ(c0, brute_force_coverage(sys, net.node_count(), 0));
    ASSERT_EQ(c1, brute_force_coverage(sys, net.node_count(), 1));
    ASSERT_TRUE(std::includes(c1.begin(), c1.end(), c0.begin(), c0.end()));

    Route& last = sys.routes.back();
    for (const auto& opt : adjacent_extensions(net, last)) {
      ASSERT_FALSE(last.contains(opt.new_node));
      RouteSystem grown = sys;
      grown.routes.back() = extend_route(last, opt);
      const PairSet after = coverage_pairs(grown, 1);
      ASSERT_TRUE(std::includes(after.begin(), after.end(), c1.begin(), c1.end()));
    }
  }
}
