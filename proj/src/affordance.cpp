// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/affordance.hpp"

#include <algorithm>

#include <json.hpp>

namespace splatjoint {

namespace {
double best_cosine(const Eigen::VectorXd& f, const std::vector<Eigen::VectorXd>& queries) {
  double best = -1.0;
  for (const auto& q : queries) {
    const double qn = q.norm(), fn = f.norm();
    if (qn < 1e-12 || fn < 1e-12) continue;
    best = std::max(best, f.dot(q) / (qn * fn));
  }
  return best;
}
}  // namespace

std::vector<RetrievalHit> retrieve(const std::vector<Proposal3D>& proposals,
                                   const QuerySpec& query) {
  if (query.positive.empty()) throw SpecError("query needs at least one positive embedding");
  std::vector<RetrievalHit> hits;
  for (const auto& p : proposals) {
    if (p.level != query.level) continue;
    const double pos = best_cosine(p.feature, query.positive);
    if (pos < query.threshold) continue;
    if (!query.negative.empty() && pos <= best_cosine(p.feature, query.negative)) continue;
    hits.push_back({p.id, pos});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.proposal_id < b.proposal_id;
  });
  return hits;
}

const std::vector<int>& gaussians_for(const Proposal3D& proposal) { return proposal.gaussians; }

std::string embedding_dict_to_json(const EmbeddingDict& dict) {
  nlohmann::ordered_json j;
  for (const auto& [name, vec] : dict) {
    std::vector<double> v(vec.data(), vec.data() + vec.size());
    j[name] = v;
  }
  return j.dump(2);
}

EmbeddingDict embedding_dict_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("embedding dictionary parse failure: ") + e.what());
  }
  EmbeddingDict dict;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto v = it.value().get<std::vector<double>>();
    dict[it.key()] = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  }
  return dict;
}

}  // namespace splatjoint
