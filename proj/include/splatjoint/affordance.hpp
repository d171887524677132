// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "splatjoint/mask_graph.hpp"

namespace splatjoint {

/// Retrieval query against proposal features. Queries arrive as precomputed
/// embedding vectors (text encoding is out of scope).
struct QuerySpec {
  std::vector<Eigen::VectorXd> positive;  // at least one, unit-normalized
  std::vector<Eigen::VectorXd> negative;
  MaskLevel level = MaskLevel::Part;
  double threshold = 0.6;
};

struct RetrievalHit {
  int proposal_id = 0;
  double score = 0.0;
};

/// score = max cosine against positives; a proposal qualifies iff
/// score >= threshold and score > max cosine against negatives. Ranked by
/// descending score, ties by lower proposal id.
std::vector<RetrievalHit> retrieve(const std::vector<Proposal3D>& proposals,
                                   const QuerySpec& query);

/// Identity accessor for the proposal's gaussian set; downstream motion code
/// goes through this instead of clustering internals.
const std::vector<int>& gaussians_for(const Proposal3D& proposal);

/// Named embedding dictionary (JSON file of name -> vector).
using EmbeddingDict = std::map<std::string, Eigen::VectorXd>;

std::string embedding_dict_to_json(const EmbeddingDict& dict);
EmbeddingDict embedding_dict_from_json(const std::string& text);

}  // namespace splatjoint
