// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include <doctest.h>

#include "helpers.hpp"
#include "splatjoint/association.hpp"
#include "splatjoint/pipeline.hpp"

using namespace splatjoint;
using namespace splatjoint::testhelpers;

namespace {
AffinityMatrix matrix_of(const Eigen::MatrixXd& scores) {
  AffinityMatrix aff;
  aff.scores = scores;
  for (int r = 0; r < scores.rows(); ++r) aff.ids_t.push_back(r);
  for (int c = 0; c < scores.cols(); ++c) aff.ids_t2.push_back(c);
  return aff;
}
}  // namespace

TEST_CASE("match_proposals threshold and one-to-one behavior") {
  {
    Eigen::MatrixXd s(1, 1);
    s << 0.9;
    const auto corr = match_proposals(matrix_of(s), 0.5);
    REQUIRE(corr.pairs.size() == 1);
    CHECK(corr.pairs[0].score == doctest::Approx(0.9));
  }
  {
    Eigen::MatrixXd s(1, 1);
    s << 0.1;
    const auto corr = match_proposals(matrix_of(s), 0.5);
    CHECK(corr.pairs.empty());
    CHECK(corr.unmatched_t == std::vector<int>{0});
    CHECK(corr.unmatched_t2 == std::vector<int>{0});
  }
  {
    // Greedy mutual exclusivity: the best pair claims row 0 and col 0.
    Eigen::MatrixXd s(2, 2);
    s << 0.95, 0.9, 0.9, 0.6;
    const auto corr = match_proposals(matrix_of(s), 0.5);
    REQUIRE(corr.pairs.size() == 2);
    CHECK(corr.pairs[0].row == 0);
    CHECK(corr.pairs[0].col == 0);
    CHECK(corr.pairs[1].row == 1);
    CHECK(corr.pairs[1].col == 1);
  }
}

TEST_CASE("affinity is cosine and invariant to positive feature rescaling") {
  SceneState a = single_view_scene();
  SceneState b = single_view_scene();
  const auto mk = [&](SceneState& s, double scale) {
    std::vector<Proposal3D> props(2);
    for (int i = 0; i < 2; ++i) {
      props[i].id = i;
      props[i].level = MaskLevel::Part;
      props[i].feature = Eigen::VectorXd::Zero(s.d_feat);
      props[i].feature[i] = scale;  // orthogonal unit directions, scaled
    }
    return props;
  };
  const auto props_a = mk(a, 1.0);
  const auto props_b = mk(b, 7.5);
  const AffinityMatrix aff = build_affinity(a, props_a, b, props_b, 5);
  CHECK(aff.scores(0, 0) == doctest::Approx(1.0));
  CHECK(aff.scores(1, 1) == doctest::Approx(1.0));
  CHECK(aff.scores(0, 1) == doctest::Approx(0.0));
  CHECK(aff.scores(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("oracle proposals associate one-to-one across states") {
  OracleSpec spec = oracle_preset("storage-m", 73);
  for (auto& p : spec.parts) p.gaussian_count = std::max(40, p.gaussian_count / 4);
  spec.cameras = 20;
  spec.image_size = 160;
  spec.feature_sigma = 0.05;
  OraclePair pair = generate_pair(spec);
  const EngineConfig cfg;
  const auto props_t = cluster_state(pair.state_t, cfg);
  const auto props_t2 = cluster_state(pair.state_t2, cfg);
  const auto level = [](const std::vector<Proposal3D>& props, MaskLevel l) {
    std::vector<Proposal3D> out;
    for (const auto& p : props)
      if (p.level == l) out.push_back(p);
    return out;
  };
  const auto parts_t = level(props_t, MaskLevel::Part);
  const auto parts_t2 = level(props_t2, MaskLevel::Part);
  const AffinityMatrix aff =
      build_affinity(pair.state_t, parts_t, pair.state_t2, parts_t2, cfg.top_k_masks);

  // Diagonal (true matches) dominates off-diagonal by a clear margin.
  const auto gt_part_of = [&](const SceneState& state, const Proposal3D& p,
                              bool is_t2) -> int {
    for (std::size_t pi = 0; pi < pair.gt.parts.size(); ++pi) {
      std::vector<int> members =
          is_t2 ? pair.gt.parts[pi].members_t2 : pair.gt.parts[pi].members_t;
      std::sort(members.begin(), members.end());
      if (p.gaussians == members) return static_cast<int>(pi);
    }
    (void)state;
    return -1;
  };
  for (std::size_t r = 0; r < parts_t.size(); ++r) {
    const int gr = gt_part_of(pair.state_t, parts_t[r], false);
    REQUIRE(gr >= 0);
    for (std::size_t c = 0; c < parts_t2.size(); ++c) {
      const int gc = gt_part_of(pair.state_t2, parts_t2[c], true);
      if (gr == gc) {
        for (std::size_t c2 = 0; c2 < parts_t2.size(); ++c2)
          if (c2 != c)
            CHECK(aff.scores(r, c) - aff.scores(r, c2) >= 0.2);
      }
    }
  }

  const StateCorrespondence corr = match_proposals(aff, cfg.assoc_min);
  CHECK(corr.pairs.size() == parts_t.size());
  for (const auto& mp : corr.pairs) {
    CHECK(gt_part_of(pair.state_t, parts_t[mp.row], false) ==
          gt_part_of(pair.state_t2, parts_t2[mp.col], true));
    CHECK(mp.score >= cfg.assoc_min);
  }
}

TEST_CASE("permuting proposals permutes but does not change the matched set") {
  Eigen::MatrixXd s(3, 3);
  s << 0.9, 0.2, 0.1, 0.15, 0.8, 0.3, 0.05, 0.25, 0.7;
  const auto corr = match_proposals(matrix_of(s), 0.5);
  // Permute rows 0<->2.
  Eigen::MatrixXd sp = s;
  sp.row(0).swap(sp.row(2));
  const auto corr_p = match_proposals(matrix_of(sp), 0.5);
  const auto as_set = [](const StateCorrespondence& c, bool flip_rows) {
    std::vector<std::pair<int, int>> v;
    for (const auto& p : c.pairs)
      v.emplace_back(flip_rows ? 2 - p.row : p.row, p.col);
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(as_set(corr, false) == as_set(corr_p, true));
}
