// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "helpers.hpp"
#include "splatjoint/affordance.hpp"
#include "splatjoint/pipeline.hpp"

using namespace splatjoint;
using namespace splatjoint::testhelpers;

namespace {
Proposal3D proposal_with_feature(int id, const Eigen::VectorXd& f,
                                 MaskLevel level = MaskLevel::Part) {
  Proposal3D p;
  p.id = id;
  p.level = level;
  p.feature = f;
  p.gaussians = {id};
  return p;
}
}  // namespace

TEST_CASE("retrieve basics: threshold, negatives, ranking") {
  Eigen::VectorXd ex = Eigen::VectorXd::Zero(8);
  ex[0] = 1.0;
  Eigen::VectorXd ey = Eigen::VectorXd::Zero(8);
  ey[1] = 1.0;
  const std::vector<Proposal3D> props = {proposal_with_feature(0, ex),
                                         proposal_with_feature(1, ey)};
  QuerySpec q;
  q.positive = {ex};
  q.threshold = 0.5;
  auto hits = retrieve(props, q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].proposal_id == 0);
  CHECK(hits[0].score == doctest::Approx(1.0));

  // A negative equal to the feature excludes it even with a positive match.
  q.positive = {ey};
  q.negative = {ey};
  hits = retrieve(props, q);
  CHECK(hits.empty());

  QuerySpec empty;
  empty.positive = {};
  CHECK_THROWS_AS(retrieve(props, empty), SpecError);
}

TEST_CASE("adding a negative never adds results") {
  RandomStream rng(81);
  std::vector<Proposal3D> props;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd f(16);
    for (int k = 0; k < 16; ++k) f[k] = rng.normal();
    props.push_back(proposal_with_feature(i, f.normalized()));
  }
  QuerySpec q;
  Eigen::VectorXd pos(16);
  for (int k = 0; k < 16; ++k) pos[k] = rng.normal();
  q.positive = {pos.normalized()};
  q.threshold = 0.1;
  const auto base = retrieve(props, q);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd neg(16);
    for (int k = 0; k < 16; ++k) neg[k] = rng.normal();
    q.negative.push_back(neg.normalized());
    const auto hits = retrieve(props, q);
    CHECK(hits.size() <= base.size());
    for (const auto& h : hits) {
      bool in_base = false;
      for (const auto& b : base)
        if (b.proposal_id == h.proposal_id) in_base = true;
      CHECK(in_base);
    }
  }
}

TEST_CASE("oracle drawer query returns exactly the drawer part") {
  OracleSpec spec = oracle_preset("storage-m", 83);
  for (auto& p : spec.parts) p.gaussian_count = std::max(40, p.gaussian_count / 4);
  spec.cameras = 20;
  spec.image_size = 160;
  OraclePair pair = generate_pair(spec);
  const EngineConfig cfg;
  auto props = cluster_state(pair.state_t, cfg);
  std::vector<Proposal3D> parts;
  for (const auto& p : props)
    if (p.level == MaskLevel::Part) parts.push_back(p);

  QuerySpec q;
  q.positive = {pair.gt.embeddings.at("storage_drawer")};
  q.negative = {pair.gt.embeddings.at("storage_door")};
  q.threshold = 0.6;
  const auto hits = retrieve(parts, q);
  REQUIRE(hits.size() == 1);

  // IoU of the retrieved gaussians against the oracle membership.
  const Proposal3D* hit = nullptr;
  for (const auto& p : parts)
    if (p.id == hits[0].proposal_id) hit = &p;
  REQUIRE(hit != nullptr);
  std::vector<int> drawer;
  for (const auto& pgt : pair.gt.parts)
    if (pgt.name == "storage_drawer") drawer = pgt.members_t;
  std::sort(drawer.begin(), drawer.end());
  const auto& got = gaussians_for(*hit);
  std::vector<int> inter;
  std::set_intersection(got.begin(), got.end(), drawer.begin(), drawer.end(),
                        std::back_inserter(inter));
  const double iou = static_cast<double>(inter.size()) /
                     (got.size() + drawer.size() - inter.size());
  CHECK(iou >= 0.95);
}

TEST_CASE("embedding dictionary json round trip") {
  EmbeddingDict dict;
  dict["handle"] = Eigen::Vector3d(1, 0, 0);
  dict["lid"] = Eigen::Vector3d(0, 0.6, 0.8);
  const auto back = embedding_dict_from_json(embedding_dict_to_json(dict));
  REQUIRE(back.size() == 2);
  CHECK((back.at("handle") - dict["handle"]).norm() == doctest::Approx(0.0));
  CHECK((back.at("lid") - dict["lid"]).norm() == doctest::Approx(0.0));
  CHECK_THROWS_AS(embedding_dict_from_json("not json"), FormatError);
}
