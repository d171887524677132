// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/association.hpp"

#include <algorithm>

namespace splatjoint {

AffinityMatrix build_affinity(const SceneState& state_t, const std::vector<Proposal3D>& props_t,
                              const SceneState& state_t2,
                              const std::vector<Proposal3D>& props_t2, int k) {
  const auto features = [&](const SceneState& s, const std::vector<Proposal3D>& props) {
    Eigen::MatrixXd f(s.d_feat, props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      Eigen::VectorXd v = props[i].feature.size() == s.d_feat
                              ? props[i].feature
                              : aggregate_proposal_feature(s, props[i], k);
      const double n = v.norm();
      f.col(static_cast<Eigen::Index>(i)) = n > 1e-12 ? Eigen::VectorXd(v / n) : v;
    }
    return f;
  };
  AffinityMatrix aff;
  const Eigen::MatrixXd ft = features(state_t, props_t);
  const Eigen::MatrixXd ft2 = features(state_t2, props_t2);
  aff.scores = ft.transpose() * ft2;
  aff.ids_t.reserve(props_t.size());
  for (const auto& p : props_t) aff.ids_t.push_back(p.id);
  for (const auto& p : props_t2) aff.ids_t2.push_back(p.id);
  return aff;
}

StateCorrespondence match_proposals(const AffinityMatrix& aff, double assoc_min) {
  struct Cand {
    double score;
    int row, col;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(aff.scores.size()));
  for (Eigen::Index r = 0; r < aff.scores.rows(); ++r)
    for (Eigen::Index c = 0; c < aff.scores.cols(); ++c)
      if (aff.scores(r, c) >= assoc_min)
        cands.push_back({aff.scores(r, c), static_cast<int>(r), static_cast<int>(c)});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  StateCorrespondence out;
  std::vector<std::uint8_t> row_used(aff.scores.rows(), 0), col_used(aff.scores.cols(), 0);
  for (const auto& c : cands) {
    if (row_used[c.row] || col_used[c.col]) continue;
    row_used[c.row] = col_used[c.col] = 1;
    out.pairs.push_back({c.row, c.col, c.score});
  }
  for (Eigen::Index r = 0; r < aff.scores.rows(); ++r)
    if (!row_used[r]) out.unmatched_t.push_back(static_cast<int>(r));
  for (Eigen::Index c = 0; c < aff.scores.cols(); ++c)
    if (!col_used[c]) out.unmatched_t2.push_back(static_cast<int>(c));
  return out;
}

}  // namespace splatjoint
