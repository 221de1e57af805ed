#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "hagnn/metapath.hpp"

using namespace hagnn;

TEST_CASE("A-P-A path counts on the small fixture") {
  HeterogeneousGraph g = fixtures::bipartite_ap();
  MetaPath apa = fixtures::apa_path(g);
  REQUIRE(apa.edge_types == std::vector<int>{0, 1});
  REQUIRE(apa.closed(g));

  MetaPathGraph mg = build_metapath_graph(g, apa);
  CHECK(mg.node_type == 0);
  auto d = fixtures::to_dense(mg.adjacency);
  // Exact co-author path-instance counts including self-paths.
  std::vector<std::vector<int64_t>> expect = {
      {1, 1, 0, 0}, {1, 2, 1, 0}, {0, 1, 2, 1}, {0, 0, 1, 1}};
  CHECK(d == expect);

  MetaPathOptions no_diag;
  no_diag.include_diagonal = false;
  MetaPathGraph mg2 = build_metapath_graph(g, apa, no_diag);
  for (const auto& e : mg2.adjacency.entries) CHECK(e.row != e.col);
  CHECK(mg2.adjacency.nnz() == mg.adjacency.nnz() - 4);
}

TEST_CASE("path counts match a brute-force DFS oracle on random graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    auto g = fixtures::random_bipartite(2 + rng.uniform_int(6), 2 + rng.uniform_int(6), 0.4, rng);
    MetaPath apa;
    apa.edge_types = {0, 1};
    apa.name = "A-P-A";
    MetaPathGraph mg = build_metapath_graph(g, apa);
    auto d = fixtures::to_dense(mg.adjacency);
    for (int64_t i = 0; i < g.node_types[0].count; ++i)
      for (int64_t j = 0; j < g.node_types[0].count; ++j)
        CHECK(d[static_cast<size_t>(i)][static_cast<size_t>(j)] ==
              fixtures::count_paths(g, apa, i, j));
  }
}

TEST_CASE("non-composable and open paths are rejected") {
  HeterogeneousGraph g = fixtures::bipartite_ap();
  MetaPath bad;
  bad.edge_types = {0, 0};  // P endpoints do not chain
  bad.name = "bad";
  CHECK_THROWS_AS(build_metapath_graph(g, bad), std::invalid_argument);
  MetaPath open;
  open.edge_types = {0};  // A -> P, not closed
  open.name = "A-P";
  CHECK_THROWS_AS(build_metapath_graph(g, open), std::invalid_argument);
}

TEST_CASE("type selection honours the node-share threshold and closed paths") {
  HeterogeneousGraph g;
  g.node_types = {{0, "A", 4057, 1, false},
                  {1, "P", 14328, 1, false},
                  {2, "T", 7723, 1, false},
                  {3, "V", 20, 1, false}};
  g.edge_types = {{0, "ap", 0, 1, -1}, {1, "pa", 1, 0, 0}};
  g.adjacency = {SparseAdjacency{4057, 14328, {}}, SparseAdjacency{14328, 4057, {}}};

  std::map<int, std::vector<MetaPath>> catalog;
  catalog[0].push_back({{0, 1}, "A-P-A"});
  catalog[1].push_back({{1, 0}, "P-A-P"});
  catalog[3].push_back({{0, 1}, "A-P-A"});  // closed but heads at A, not V

  auto sel = select_types(g, 0.01, catalog);
  CHECK(sel == std::set<int>{0, 1});

  // V's share (20/26128) is below threshold even with a valid path of its own.
  CHECK_THROWS_AS(select_types(g, 1.0, catalog), std::invalid_argument);
  CHECK_THROWS_AS(select_types(g, -0.1, catalog), std::invalid_argument);
}

TEST_CASE("fusion sums weights and is order independent") {
  Rng rng(5);
  auto g = fixtures::random_bipartite(8, 8, 0.3, rng);
  MetaPath apa{{0, 1}, "A-P-A"};
  MetaPath apapa{{0, 1, 0, 1}, "A-P-A-P-A"};
  MetaPathGraph g1 = build_metapath_graph(g, apa);
  MetaPathGraph g2 = build_metapath_graph(g, apapa);

  FusedMetaPathGraph f12 = fuse_metapath_graphs({g1, g2});
  FusedMetaPathGraph f21 = fuse_metapath_graphs({g2, g1});
  CHECK(f12.adjacency == f21.adjacency);

  // Each fused weight is the sum of member weights on that edge.
  auto d1 = fixtures::to_dense(g1.adjacency);
  auto d2 = fixtures::to_dense(g2.adjacency);
  for (const auto& e : f12.adjacency.entries)
    CHECK(e.weight == d1[static_cast<size_t>(e.row)][static_cast<size_t>(e.col)] +
                          d2[static_cast<size_t>(e.row)][static_cast<size_t>(e.col)]);

  MetaPathGraph wrong_type = g1;
  wrong_type.node_type = 1;
  CHECK_THROWS_AS(fuse_metapath_graphs({g1, wrong_type}), std::invalid_argument);
}

TEST_CASE("redundancy on a hand-computed pair") {
  MetaPathGraph a, b;
  a.node_type = b.node_type = 0;
  a.adjacency = SparseAdjacency::from_coo(2, 2, {{0, 0, 1}, {0, 1, 1}});
  b.adjacency = SparseAdjacency::from_coo(2, 2, {{0, 0, 5}, {1, 0, 1}, {1, 1, 1}});
  Redundancy r = information_redundancy(a, b);
  CHECK(r.jaccard == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.containment == doctest::Approx(0.5).epsilon(1e-12));

  MetaPathGraph empty1, empty2;
  empty1.adjacency = SparseAdjacency{2, 2, {}};
  empty2.adjacency = SparseAdjacency{2, 2, {}};
  CHECK_THROWS_AS(information_redundancy(empty1, empty2), std::invalid_argument);
}

TEST_CASE("reduction report") {
  Rng rng(3);
  auto g = fixtures::random_bipartite(10, 10, 0.3, rng);
  MetaPathGraph g1 = build_metapath_graph(g, MetaPath{{0, 1}, "A-P-A"});
  MetaPathGraph g2 = build_metapath_graph(g, MetaPath{{0, 1, 0, 1}, "A-P-A-P-A"});
  FusedMetaPathGraph f = fuse_metapath_graphs({g1, g2});
  ReductionStats s = reduction_report({g1, g2}, f);
  CHECK(s.summed_member_edges == g1.adjacency.nnz() + g2.adjacency.nnz());
  CHECK(s.fused_edges == f.adjacency.nnz());
  CHECK(s.reduction_rate ==
        doctest::Approx(1.0 - static_cast<double>(s.fused_edges) /
                                  static_cast<double>(s.summed_member_edges)));
  CHECK(s.reduction_rate >= 0.0);
}

TEST_CASE("meta-path resolution from names and edge lists") {
  HeterogeneousGraph g = fixtures::bipartite_ap();
  MetaPath p = resolve_metapath(g, "A-P-A");
  CHECK(p.edge_types == std::vector<int>{0, 1});
  MetaPath q = resolve_metapath(g, "edges:writes,writes_rev");
  CHECK(q.edge_types == std::vector<int>{0, 1});

  CHECK_THROWS_AS(resolve_metapath(g, "A-X-A"), std::invalid_argument);
  CHECK_THROWS_AS(resolve_metapath(g, "A"), std::invalid_argument);
  CHECK_THROWS_AS(resolve_metapath(g, "edges:writes,writes"), std::invalid_argument);

  // Ambiguous step: add a second A->P relation.
  g.edge_types.push_back({2, "cites", 0, 1, -1});
  g.adjacency.push_back(SparseAdjacency{4, 3, {}});
  CHECK_THROWS_AS(resolve_metapath(g, "A-P-A"), std::invalid_argument);
  CHECK(resolve_metapath(g, "edges:cites,writes_rev").edge_types == std::vector<int>{2, 1});
}

TEST_CASE("catalog file parsing") {
  HeterogeneousGraph g = fixtures::bipartite_ap();
  auto dir = std::filesystem::temp_directory_path() / "hagnn_test_catalog";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "paths.txt");
    out << "# comment line\n";
    out << "A: A-P-A\n";
    out << "P: edges:writes_rev,writes ; P-A-P\n";
  }
  auto catalog = load_metapath_catalog(g, dir / "paths.txt");
  REQUIRE(catalog.count(0) == 1);
  REQUIRE(catalog.count(1) == 1);
  CHECK(catalog[0].size() == 1);
  CHECK(catalog[1].size() == 2);
  CHECK(catalog[1][0].edge_types == std::vector<int>{1, 0});
  CHECK(catalog[1][1].edge_types == std::vector<int>{1, 0});
}
