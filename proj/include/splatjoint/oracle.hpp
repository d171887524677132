// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splatjoint/affordance.hpp"
#include "splatjoint/metrics.hpp"
#include "splatjoint/scene.hpp"

namespace splatjoint {

enum class PartPresence : int { Both = 0, OnlyT = 1, OnlyTPrime = 2 };

/// One rigid element of a synthetic scene: a thin box or a curved
/// cylinder-section panel placed in state-t world coordinates.
struct OraclePartSpec {
  std::string name;          // embedding id
  std::string object_name;   // instance grouping / object embedding id
  std::string shape = "box"; // "box" | "cylinder-panel"
  int gaussian_count = 300;
  Vec3 size = Vec3(0.3, 0.02, 0.3);  // box extents; panel (arc width, thickness, height)
  double panel_radius = 0.5;         // cylinder-panel only
  Vec3 center = Vec3::Zero();        // placement in state-t world
  Quat orientation{1.0, 0.0, 0.0, 0.0};
  Vec3 base_color = Vec3(0.6, 0.6, 0.6);
  std::optional<JointParams> joint;  // authored in state-t world; absent = static
  PartPresence presence = PartPresence::Both;
};

struct OracleSpec {
  std::string name = "custom";
  std::vector<OraclePartSpec> parts;
  int cameras = 20;
  double orbit_radius = 1.8;
  int image_size = 192;
  double feature_sigma = 0.0;
  double position_sigma = 0.0;
  bool random_global = false;       // sample a non-identity xi_g from the seed
  double scale_min = 0.8, scale_max = 1.25;
  std::uint64_t seed = 0;
  int sh_order = 3;
  int d_latent = 16, d_feat = 64, d_dense = 32;

  std::string to_json() const;
  static OracleSpec from_json(const std::string& text);
};

struct GroundTruth {
  Sim3Transform xi_g;  // state t -> state t' global transform
  struct PartGT {
    std::string name;
    std::string object_name;
    int object_id = 0;
    bool is_static = true;
    SE3Transform xi_o;                  // identity for static parts
    std::optional<JointParams> joint;   // engine-convention (after xi_g)
    std::vector<int> members_t, members_t2;  // gaussian indices per state
    std::vector<Vec3> full_points_t;    // complete sample in state-t coords
    Eigen::MatrixXd dense_codes;        // d_dense x sample count, noise-free
    PartPresence presence = PartPresence::Both;
  };
  std::vector<PartGT> parts;
  EmbeddingDict embeddings;             // part + object names -> d_feat unit vectors

  std::string to_json() const;
  static GroundTruth from_json(const std::string& text);
};

struct OraclePair {
  SceneState state_t;
  SceneState state_t2;
  GroundTruth gt;
};

/// Deterministic scene-pair generation from a spec. Gaussians sample part
/// surfaces with part-distinct embeddings; per-view masks come from convex
/// hulls of the projected part points intersected with analytic-raycast
/// visibility, and are emitted only when their support exactly recovers the
/// part membership. Throws SpecError when the spec cannot produce a
/// well-posed pair.
OraclePair generate_pair(const OracleSpec& spec);

/// Built-in presets: fridge, laptop, storage-m, scene, drawer-occ.
OracleSpec oracle_preset(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> oracle_preset_names();

/// Exact (state-t gaussian index, pixel) pairs for one part in one target
/// view: ground-truth projections of the transformed members, restricted to
/// the generated part mask.
std::vector<std::pair<int, Vec2>> oracle_correspondences(const OraclePair& pair, int part_index,
                                                         int view_id);

}  // namespace splatjoint
