// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// K-means over utterance summary vectors. Summaries are standardized per
// dimension before clustering (the descriptor families have incommensurate
// units); the standardization is stored in the model so assignment stays
// consistent. Cluster count is tied to the codebook count downstream.

#ifndef BRQ_CLUSTERING_HPP
#define BRQ_CLUSTERING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "brq/features.hpp"
#include "brq/mat.hpp"

namespace brq {

struct ClusterModel {
  int k = 0;
  std::uint64_t seed = 0;
  NormStats feature_stats;                // standardization for summaries
  MatD centroids;                         // k x dims, standardized space
  std::map<std::string, int> assignments; // utterance id -> cluster
};

struct KMeansOptions {
  int max_iters = 100;
  double tol = 1e-6;
};

// Lloyd's algorithm with k-means++ seeding. Empty clusters are reseeded to
// the point currently farthest from its own centroid. The per-iteration
// inertia sequence is returned for monotonicity checks.
struct KMeansTrace {
  std::vector<double> inertia_per_iter;
};

ClusterModel fit_kmeans(const std::vector<UtteranceSummary>& summaries, int k,
                        std::uint64_t seed, const KMeansOptions& opts = {},
                        KMeansTrace* trace = nullptr);

// Nearest centroid by squared Euclidean distance in standardized space;
// ties break to the lowest index.
int assign(const ClusterModel& model, const UtteranceSummary& summary);

struct CodebookWeights {
  std::vector<double> weights;  // sums to N, ratio primary/secondary preserved
  int primary = 0;
};

// Primary weight w_p on the utterance's cluster codebook, secondary w_s
// elsewhere, rescaled so the weights sum to the codebook count. Requires
// w_p >= 2 * w_s > 0.
CodebookWeights codebook_weights(int cluster, int n_codebooks, double w_p = 2.0,
                                 double w_s = 0.8);

// JSON persistence: {k, seed, feature_stats, centroids, assignments}.
void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

std::string cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const std::string& text);

// Raw centroid bytes in row-major order, for frozen-asset checksums.
std::vector<unsigned char> centroid_bytes(const ClusterModel& model);

}  // namespace brq

#endif  // BRQ_CLUSTERING_HPP
