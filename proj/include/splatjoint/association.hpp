// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <vector>

#include "splatjoint/mask_graph.hpp"

namespace splatjoint {

/// Cosine similarities between aggregated proposal features of the two
/// states: rows index proposals_t, columns proposals_t2.
struct AffinityMatrix {
  Eigen::MatrixXd scores;
  std::vector<int> ids_t, ids_t2;  // proposal ids per row / column
};

struct MatchedPair {
  int row = 0, col = 0;  // indices into the affinity matrix
  double score = 0.0;
};

/// One-to-one correspondence between the states' proposals.
struct StateCorrespondence {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_t, unmatched_t2;  // matrix row / column indices
};

/// Features are aggregated with aggregate_proposal_feature(·, k) before the
/// cosine is taken; proposals whose stored feature is empty are re-aggregated.
AffinityMatrix build_affinity(const SceneState& state_t, const std::vector<Proposal3D>& props_t,
                              const SceneState& state_t2,
                              const std::vector<Proposal3D>& props_t2, int k);

/// Greedy descending-score assignment with mutual exclusivity. Pairs scoring
/// below assoc_min stay unmatched; score ties break on the lower (row, col).
StateCorrespondence match_proposals(const AffinityMatrix& aff, double assoc_min);

}  // namespace splatjoint
