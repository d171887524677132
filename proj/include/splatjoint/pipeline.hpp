// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <string>
#include <vector>

#include "splatjoint/association.hpp"
#include "splatjoint/config.hpp"
#include "splatjoint/motion.hpp"
#include "splatjoint/oracle.hpp"

namespace splatjoint {

/// Clusters both levels of a state and writes the labels back.
std::vector<Proposal3D> cluster_state(SceneState& state, const EngineConfig& cfg);

/// Proposals / correspondences / motion artifacts as JSON (CLI stage files).
std::string proposals_to_json(const SceneState& state, const std::vector<Proposal3D>& proposals,
                              const EngineConfig& cfg);
std::vector<Proposal3D> proposals_from_json(const std::string& text);

std::string correspondence_to_json(const std::vector<Proposal3D>& props_t,
                                   const std::vector<Proposal3D>& props_t2,
                                   const StateCorrespondence& instance_corr,
                                   const StateCorrespondence& part_corr,
                                   const AffinityMatrix& instance_aff,
                                   const AffinityMatrix& part_aff, const EngineConfig& cfg);

struct CorrespondenceArtifact {
  std::vector<Proposal3D> props_t, props_t2;
  StateCorrespondence instance_corr, part_corr;
};
CorrespondenceArtifact correspondence_from_json(const std::string& text);

struct MotionArtifact {
  Sim3Transform xi_g;
  struct Part {
    int proposal_t = -1, proposal_t2 = -1;
    SE3Transform xi_o;
    std::optional<JointParams> joint;
    std::vector<int> pred_members_t, pred_members_t2;  // label-field membership
  };
  std::vector<Part> parts;                // matched part pairs (moving and static)
  std::vector<int> static_members_t2;     // target-state gaussians on the static path
  std::vector<std::pair<int, int>> label_map;  // t2 proposal id -> t proposal id
  std::vector<LossTracePoint> trace;
  std::string report_note;
};

std::string motion_to_json(const MotionArtifact& motion, const EngineConfig& cfg);
MotionArtifact motion_from_json(const std::string& text);

/// Maps state-t2 gaussians into state-t coordinates with the estimated
/// transforms (parts through their inverse composition) and merges with
/// state t. Labels of t2 are remapped through the association first.
std::vector<GaussianPrimitive> fuse_states(const SceneState& state_t, const SceneState& state_t2,
                                           const MotionArtifact& motion,
                                           const EngineConfig& cfg);

struct EvalRow {
  std::string part;       // ground-truth part name (or "-" for scene row)
  std::string pred_kind;  // "revolute" | "prismatic" | "none"
  std::string gt_kind;
  bool kind_ok = false;
  double axis_ang_deg = 0.0;
  double axis_pos_0p1m = 0.0;
  double part_motion = 0.0;  // deg (revolute) or m (prismatic)
  double cd_s = 0.0, cd_m = 0.0, cd_w = 0.0;
};

std::string metrics_csv(const std::vector<EvalRow>& rows, const EngineConfig& cfg,
                        std::uint64_t seed);

struct PipelineResult {
  OraclePair pair;
  std::vector<Proposal3D> props_t, props_t2;
  StateCorrespondence instance_corr, part_corr;
  MotionArtifact motion;
  MotionSolution solution;
  std::vector<GaussianPrimitive> fused;
  std::vector<EvalRow> rows;
  double runtime_sec = 0.0;
};

/// Full in-memory run: cluster both states, distill both fields, associate,
/// register, solve motion, fuse, and evaluate against the oracle ground
/// truth.
PipelineResult run_pipeline(OraclePair pair, const EngineConfig& cfg);

/// Motion estimation for already clustered+distilled inputs (shared by the
/// pipeline and the estimate stage).
struct EstimateInputs {
  SceneState* state_t = nullptr;
  SceneState* state_t2 = nullptr;
  std::vector<Proposal3D>* props_t = nullptr;
  std::vector<Proposal3D>* props_t2 = nullptr;
  const StateCorrespondence* instance_corr = nullptr;
  const StateCorrespondence* part_corr = nullptr;
};
MotionArtifact estimate_motion(const EstimateInputs& in, const FeatureField& field_t,
                               const FeatureField& field_t2, const EngineConfig& cfg,
                               MotionSolution* solution_out = nullptr);

/// Evaluates a motion artifact + fused scene against ground truth.
std::vector<EvalRow> evaluate_against_gt(const OraclePair& pair, const MotionArtifact& motion,
                                         const std::vector<GaussianPrimitive>& fused);

}  // namespace splatjoint
