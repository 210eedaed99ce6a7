#include "gemvpc/graph_encoder.hpp"

#include "gemvpc/embedder.hpp"
#include "gemvpc/video_graph.hpp"

#include <doctest.h>

#include "test_util.hpp"

#include <cmath>
#include <numeric>

using namespace gemvpc;
using nn::Mat;
using nn::Var;

namespace {

GraphTensorInput random_graph_input(DetRng& rng, int n, int dim,
                                    const std::vector<std::pair<int, int>>& edges) {
  GraphTensorInput in;
  in.features = Mat(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) in.features(i, j) = rng.normal();
  int nrel = edge_relation_count();
  for (auto [s, d] : edges)
    in.edges.push_back({s, d, 1 + static_cast<int>(rng.uniform_int(nrel - 1)),
                        rng.uniform(0.2, 1.0)});
  return in;
}

}  // namespace

TEST_CASE("edge relation ids are dense and include structural relations") {
  CHECK(edge_relation_id("self") == 0);
  for (const char* r : {"npmi", "occursAfter", "occursBefore", "atLocation",
                        "hasContext", "inScene", "hasSound"})
    CHECK(edge_relation_id(r) > 0);
  for (RelationToken t : all_relations())
    CHECK(edge_relation_id(relation_name(t)) < edge_relation_count());
  CHECK_THROWS_AS(edge_relation_id("bogus"), ValidationError);
}

TEST_CASE("theme graph lowering adds both edge directions with npmi weight") {
  ThemeGraph g;
  g.action_class = "c";
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
    f(i) = 1;
    g.nodes.push_back({"w" + std::to_string(i), 1, f});
  }
  g.edges.push_back({0, 2, 0.5});
  auto in = lower_theme_graph(g);
  REQUIRE(in.edges.size() == 2);
  CHECK(in.edges[0].src == 0);
  CHECK(in.edges[0].dst == 2);
  CHECK(in.edges[1].src == 2);
  CHECK(in.edges[1].dst == 0);
  CHECK(in.edges[0].weight == 0.5);
  CHECK(in.edges[0].rel == edge_relation_id("npmi"));
}

TEST_CASE("gat layer matches dense attention oracle on a 4-node graph") {
  nn::ParamStore ps(31);
  const int n = 4, dim = 6, out = 6, heads = 2;
  Var rel_emb = ps.get_normal("rel", edge_relation_count(), 16, 0.1);
  auto layer = GatLayer::create(ps, "gat", dim, out, heads, 0.2);
  DetRng rng(5);
  auto in = random_graph_input(rng, n, dim, {{0, 1}, {2, 1}, {3, 2}, {1, 0}, {0, 3}});

  Var x = nn::constant(in.features);
  Var got = layer.forward(x, in.edges, rel_emb);

  // oracle: enumerate incoming edges (plus self-loop) per destination node
  Mat S = in.features * layer.Ws.value();
  Mat T = in.features * layer.Wt.value();
  const int dh = out / heads;
  Mat want = Mat::Zero(n, out);
  for (int v = 0; v < n; ++v) {
    struct Inc { int src; int rel; double w; };
    std::vector<Inc> inc;
    for (const auto& e : in.edges)
      if (e.dst == v) inc.push_back({e.src, e.rel, e.weight});
    inc.push_back({v, 0, 1.0});  // learned self relation
    for (int h = 0; h < heads; ++h) {
      std::vector<double> score(inc.size());
      for (size_t e = 0; e < inc.size(); ++e) {
        Eigen::RowVectorXd pre =
            S.row(inc[e].src) + T.row(v) +
            inc[e].w * rel_emb.value().row(inc[e].rel) * layer.We.value();
        Eigen::RowVectorXd z =
            pre.unaryExpr([](double x) { return x > 0 ? x : 0.2 * x; });
        score[e] = (z * layer.attn.value().col(h))(0);
      }
      double mx = *std::max_element(score.begin(), score.end());
      double denom = 0;
      for (double s : score) denom += std::exp(s - mx);
      for (size_t e = 0; e < inc.size(); ++e)
        want.row(v).segment(h * dh, dh) +=
            std::exp(score[e] - mx) / denom * S.row(inc[e].src).segment(h * dh, dh);
    }
  }
  CHECK((got.value() - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gat layer is permutation equivariant") {
  nn::ParamStore ps(32);
  const int n = 5, dim = 4;
  Var rel_emb = ps.get_normal("rel", edge_relation_count(), 16, 0.1);
  auto layer = GatLayer::create(ps, "gat", dim, 4, 2, 0.2);
  DetRng rng(6);
  auto in = random_graph_input(rng, n, dim, {{0, 1}, {1, 2}, {3, 4}, {4, 0}});

  std::vector<int> perm = {3, 0, 4, 1, 2};  // new index of old node i
  GraphTensorInput pin;
  pin.features = Mat(n, dim);
  for (int i = 0; i < n; ++i) pin.features.row(perm[i]) = in.features.row(i);
  for (const auto& e : in.edges)
    pin.edges.push_back({perm[e.src], perm[e.dst], e.rel, e.weight});

  Mat a = layer.forward(nn::constant(in.features), in.edges, rel_emb).value();
  Mat b = layer.forward(nn::constant(pin.features), pin.edges, rel_emb).value();
  for (int i = 0; i < n; ++i)
    CHECK((a.row(i) - b.row(perm[i])).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("graph encoder validates input and outputs requested dim") {
  nn::ParamStore ps(33);
  GraphEncoderConfig gc;
  gc.in_dim = 4;
  gc.hidden = 8;
  gc.out_dim = 6;
  gc.heads = 2;
  gc.layers = 2;
  GraphEncoder enc(ps, "enc", gc);
  DetRng rng(7);
  auto in = random_graph_input(rng, 3, 4, {{0, 1}, {1, 2}});
  Var out = enc.forward(in);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 6);

  GraphTensorInput empty;
  empty.features = Mat(0, 4);
  CHECK_THROWS_AS(enc.forward(empty), ValidationError);
  auto bad = random_graph_input(rng, 3, 5, {});
  CHECK_THROWS_AS(enc.forward(bad), ValidationError);
}

TEST_CASE("gat gradient check against finite differences") {
  nn::ParamStore ps(34);
  GraphEncoderConfig gc;
  gc.in_dim = 3;
  gc.hidden = 4;
  gc.out_dim = 4;
  gc.heads = 2;
  gc.layers = 1;
  GraphEncoder enc(ps, "enc", gc);
  DetRng rng(8);
  auto in = random_graph_input(rng, 4, 3, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  std::vector<std::string> names;
  for (const auto& [nm, v] : ps.items()) names.push_back(nm);
  double err = testutil::max_rel_grad_err(ps, names, [&] {
    Var o = enc.forward(in);
    return nn::mean_all(nn::cmul(o, o));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("timestep extraction partitions video graph rows") {
  HashingEmbedder emb(8);
  auto mk = [&](NodeType ty, const std::string& l, int t) {
    GraphNode n;
    n.type = ty;
    n.label = l;
    n.timestep = t;
    n.feature = emb.embed(l);
    return n;
  };
  EventNodeSet e0, e1;
  e0.actions = {mk(NodeType::Action, "chop", 0)};
  e0.objects = {};
  e1.actions = {mk(NodeType::Action, "stir", 1)};
  VideoGraph g = assemble_graph("p", {e0, e1}, GraphMethod::VF);

  Mat emb_all = Mat::Random(static_cast<int>(g.nodes.size()), 5);
  Var v = nn::constant(emb_all);
  std::vector<int> ids0, ids1;
  Var r0 = extract_timestep_nodes(v, g, 0, &ids0);
  Var r1 = extract_timestep_nodes(v, g, 1, &ids1);
  std::vector<int> all = ids0;
  all.insert(all.end(), ids1.begin(), ids1.end());
  std::sort(all.begin(), all.end());
  std::vector<int> expect(g.nodes.size());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(r0.rows() + r1.rows() == static_cast<Eigen::Index>(g.nodes.size()));
  CHECK_THROWS_AS(extract_timestep_nodes(v, g, 2, nullptr), ValidationError);
}
