// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/mask_graph.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace splatjoint {

namespace {

std::size_t intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Canonical mask identity, independent of storage order.
struct MaskKey {
  int view_id, mask_id;
  bool operator<(const MaskKey& o) const {
    return view_id != o.view_id ? view_id < o.view_id : mask_id < o.mask_id;
  }
  bool operator==(const MaskKey& o) const {
    return view_id == o.view_id && mask_id == o.mask_id;
  }
};

MaskKey key_of(const SceneState& state, int mask_index) {
  return {state.masks[mask_index].view_id, state.masks[mask_index].mask_id};
}

}  // namespace

double containment_affinity(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || b.empty()) return 0.0;
  const double inter = static_cast<double>(intersection_size(a, b));
  return std::max(inter / static_cast<double>(a.size()), inter / static_cast<double>(b.size()));
}

MaskGraph build_graph(const SceneState& state, const EngineConfig& cfg) {
  MaskGraph graph;
  std::vector<SupportInfo> infos(state.masks.size());
  parallel_for(state.masks.size(), [&](std::size_t mi) {
    infos[mi] = mask_support(state, state.masks[mi], cfg.opacity_min, cfg.depth_tol);
  });
  for (int mi = 0; mi < static_cast<int>(state.masks.size()); ++mi) {
    auto& info = infos[mi];
    if (info.support.empty()) {
      graph.dropped.push_back({mi, "empty_support"});
      continue;
    }
    if (info.occlusion_ratio() >= cfg.occlusion_max) {
      graph.dropped.push_back({mi, "occluded"});
      continue;
    }
    graph.nodes.push_back({mi, state.masks[mi].level, std::move(info.support)});
  }
  const int n = static_cast<int>(graph.nodes.size());
  std::vector<std::vector<MaskEdge>> per_node(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t a) {
    for (int b = static_cast<int>(a) + 1; b < n; ++b) {
      if (graph.nodes[a].level != graph.nodes[b].level) continue;
      const double aff = containment_affinity(graph.nodes[a].support, graph.nodes[b].support);
      if (aff >= cfg.edge_min) per_node[a].push_back({static_cast<int>(a), b, aff});
    }
  });
  for (auto& edges : per_node)
    graph.edges.insert(graph.edges.end(), edges.begin(), edges.end());
  return graph;
}

std::vector<Proposal3D> cluster_masks(const SceneState& state, const MaskGraph& graph,
                                      const EngineConfig& cfg) {
  struct Cluster {
    MaskLevel level;
    std::vector<int> support;       // sorted gaussian indices
    std::vector<int> mask_indices;  // state mask indices
    MaskKey key;                    // smallest member key, for determinism
    bool alive = true;
  };
  std::vector<Cluster> clusters;
  clusters.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes)
    clusters.push_back(
        {node.level, node.support, {node.mask_index}, key_of(state, node.mask_index), true});

  const auto affinity = [&](const Cluster& a, const Cluster& b) {
    if (a.level != b.level) return 0.0;
    return containment_affinity(a.support, b.support);
  };

  for (;;) {
    double best_aff = 0.0;
    int best_a = -1, best_b = -1;  // canonical order: key(a) < key(b)
    for (int i = 0; i < static_cast<int>(clusters.size()); ++i) {
      if (!clusters[i].alive) continue;
      for (int j = i + 1; j < static_cast<int>(clusters.size()); ++j) {
        if (!clusters[j].alive) continue;
        const double aff = affinity(clusters[i], clusters[j]);
        if (aff < cfg.merge_min) continue;
        int a = i, b = j;
        if (clusters[b].key < clusters[a].key) std::swap(a, b);
        const bool better =
            aff > best_aff ||
            (aff == best_aff &&
             (best_a < 0 || clusters[a].key < clusters[best_a].key ||
              (clusters[a].key == clusters[best_a].key && clusters[b].key < clusters[best_b].key)));
        if (better) {
          best_aff = aff;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0) break;
    Cluster& a = clusters[best_a];
    Cluster& b = clusters[best_b];
    a.support = sorted_union(a.support, b.support);
    a.mask_indices.insert(a.mask_indices.end(), b.mask_indices.begin(), b.mask_indices.end());
    a.key = std::min(a.key, b.key);
    b.alive = false;
  }

  // Canonical output order: instances first, then by smallest member key.
  std::vector<int> alive;
  for (int i = 0; i < static_cast<int>(clusters.size()); ++i)
    if (clusters[i].alive) alive.push_back(i);
  std::sort(alive.begin(), alive.end(), [&](int x, int y) {
    if (clusters[x].level != clusters[y].level)
      return clusters[x].level == MaskLevel::Instance;
    return clusters[x].key < clusters[y].key;
  });

  std::vector<Proposal3D> proposals;
  proposals.reserve(alive.size());
  for (int rank = 0; rank < static_cast<int>(alive.size()); ++rank) {
    const Cluster& c = clusters[alive[rank]];
    Proposal3D p;
    p.id = rank;
    p.level = c.level;
    p.gaussians = c.support;
    p.mask_indices = c.mask_indices;
    std::sort(p.mask_indices.begin(), p.mask_indices.end(),
              [&](int x, int y) { return key_of(state, x) < key_of(state, y); });
    p.feature = aggregate_proposal_feature(state, p, cfg.top_k_masks);
    proposals.push_back(std::move(p));
  }

  // Parts record their containing instance by majority gaussian overlap.
  for (auto& p : proposals) {
    if (p.level != MaskLevel::Part) continue;
    std::size_t best_overlap = 0;
    for (const auto& q : proposals) {
      if (q.level != MaskLevel::Instance) continue;
      const std::size_t ov = intersection_size(p.gaussians, q.gaussians);
      if (ov > best_overlap) {
        best_overlap = ov;
        p.parent_instance = q.id;
      }
    }
  }
  return proposals;
}

Eigen::VectorXd aggregate_proposal_feature(const SceneState& state, const Proposal3D& p, int k) {
  std::vector<std::pair<std::size_t, int>> by_size;  // (pixel count, mask index)
  by_size.reserve(p.mask_indices.size());
  for (int mi : p.mask_indices) by_size.emplace_back(state.masks[mi].pixel_count(), mi);
  std::sort(by_size.begin(), by_size.end(), [&](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return key_of(state, x.second) < key_of(state, y.second);
  });
  const int take = std::min<int>(k, static_cast<int>(by_size.size()));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(state.d_feat);
  for (int i = 0; i < take; ++i) {
    const Eigen::VectorXd f = state.masks[by_size[i].second].feature.cast<double>();
    const double n = f.norm();
    if (n > 1e-12) mean += f / n;
  }
  const double n = mean.norm();
  return n > 1e-12 ? Eigen::VectorXd(mean / n) : mean;
}

void write_labels(SceneState& state, const std::vector<Proposal3D>& proposals) {
  struct Claim {
    int masks = 0;
    int id = -1;
  };
  const auto assign = [&](MaskLevel level, std::vector<Claim>& claims) {
    for (const auto& p : proposals) {
      if (p.level != level) continue;
      for (int gi : p.gaussians) {
        Claim& c = claims[gi];
        const int nm = static_cast<int>(p.mask_indices.size());
        if (c.id < 0 || nm > c.masks || (nm == c.masks && p.id < c.id)) c = {nm, p.id};
      }
    }
  };
  std::vector<Claim> part_claims(state.gaussians.size());
  std::vector<Claim> inst_claims(state.gaussians.size());
  assign(MaskLevel::Part, part_claims);
  assign(MaskLevel::Instance, inst_claims);
  for (std::size_t gi = 0; gi < state.gaussians.size(); ++gi) {
    if (part_claims[gi].id >= 0)
      state.gaussians[gi].label = part_claims[gi].id;
    else if (inst_claims[gi].id >= 0)
      state.gaussians[gi].label = inst_claims[gi].id;
    else
      state.gaussians[gi].label = kNoLabel;
  }
}

}  // namespace splatjoint
