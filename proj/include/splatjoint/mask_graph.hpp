// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <string>
#include <vector>

#include "splatjoint/config.hpp"
#include "splatjoint/scene.hpp"

namespace splatjoint {

struct MaskNode {
  int mask_index = 0;           // index into SceneState::masks
  MaskLevel level = MaskLevel::Instance;
  std::vector<int> support;     // sorted gaussian indices
};

struct MaskEdge {
  int a = 0, b = 0;             // node indices, a < b
  double affinity = 0.0;        // max directed containment, [0, 1]
};

struct DroppedMask {
  int mask_index = 0;
  std::string reason;           // "empty_support" | "occluded"
};

struct MaskGraph {
  std::vector<MaskNode> nodes;
  std::vector<MaskEdge> edges;
  std::vector<DroppedMask> dropped;
};

/// A view-consistent 3D instance or part proposal.
struct Proposal3D {
  int id = 0;                        // unique across both levels of a state
  MaskLevel level = MaskLevel::Instance;
  std::vector<int> gaussians;        // sorted, union of member-mask supports
  std::vector<int> mask_indices;     // members, sorted by (view_id, mask_id)
  Eigen::VectorXd feature;           // aggregated d_feat, unit norm
  int parent_instance = -1;          // containing instance proposal (parts only)
};

/// Containment affinity between two sorted index sets:
/// max(|A∩B|/|A|, |A∩B|/|B|).
double containment_affinity(const std::vector<int>& a, const std::vector<int>& b);

/// Nodes are masks with nonempty support; masks whose support is empty or
/// whose depth-occlusion ratio reaches cfg.occlusion_max are dropped (and
/// recorded). Edges join distinct same-level nodes with affinity >= edge_min.
MaskGraph build_graph(const SceneState& state, const EngineConfig& cfg);

/// Greedy agglomeration: repeatedly merge the highest-affinity cluster pair
/// with affinity >= merge_min, recomputing supports, until none qualifies.
/// Levels never mix. Deterministic: ties break on the canonical
/// (view_id, mask_id) keys of the clusters, so the partition is invariant to
/// input mask order. Proposal ids are assigned by canonical member order,
/// instances first.
std::vector<Proposal3D> cluster_masks(const SceneState& state, const MaskGraph& graph,
                                      const EngineConfig& cfg);

/// Mean of the unit-normalized features of the k largest member masks
/// (by pixel count), renormalized to unit length.
Eigen::VectorXd aggregate_proposal_feature(const SceneState& state, const Proposal3D& p, int k);

/// Writes proposal ids into gaussian labels. Part-level proposals take
/// precedence; contested gaussians go to the proposal with more masks, then
/// the lower id.
void write_labels(SceneState& state, const std::vector<Proposal3D>& proposals);

}  // namespace splatjoint
