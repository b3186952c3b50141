// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "brq/rng.hpp"

namespace brq {
namespace {

using json = nlohmann::json;

double sq_dist(const double* a, const double* b, int dims) {
  double acc = 0.0;
  for (int d = 0; d < dims; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

// Standardize summaries with the corpus stats; constant dims go to zero.
MatD standardize(const std::vector<UtteranceSummary>& summaries, const NormStats& stats) {
  const int dims = static_cast<int>(stats.mean.size());
  MatD pts(static_cast<int>(summaries.size()), dims);
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    for (int d = 0; d < dims; ++d) {
      const double sd = stats.stddev[d];
      pts.at(static_cast<int>(i), d) =
          sd < kStdFloor ? 0.0 : (summaries[i].vector[d] - stats.mean[d]) / sd;
    }
  }
  return pts;
}

NormStats summary_stats(const std::vector<UtteranceSummary>& summaries) {
  const int dims = static_cast<int>(summaries.front().vector.size());
  NormStats stats;
  stats.mean.assign(dims, 0.0);
  stats.stddev.assign(dims, 0.0);
  for (const auto& s : summaries) {
    for (int d = 0; d < dims; ++d) stats.mean[d] += s.vector[d];
  }
  for (int d = 0; d < dims; ++d) stats.mean[d] /= static_cast<double>(summaries.size());
  for (const auto& s : summaries) {
    for (int d = 0; d < dims; ++d) {
      const double diff = s.vector[d] - stats.mean[d];
      stats.stddev[d] += diff * diff;
    }
  }
  for (int d = 0; d < dims; ++d) {
    stats.stddev[d] = std::sqrt(stats.stddev[d] / static_cast<double>(summaries.size()));
  }
  return stats;
}

// k-means++ seeding over the standardized points.
MatD kmeanspp_init(const MatD& pts, int k, Rng& rng) {
  const int n = pts.rows;
  const int dims = pts.cols;
  MatD centroids(k, dims);
  const int first = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  std::copy_n(pts.row(first), dims, centroids.row(0));

  std::vector<double> dist2(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dist2[i] = sq_dist(pts.row(i), centroids.row(0), dims);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (const double d2 : dist2) total += d2;
    int chosen;
    if (total <= 0.0) {
      chosen = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    } else {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += dist2[i];
        if (cum >= r) {
          chosen = i;
          break;
        }
      }
    }
    std::copy_n(pts.row(chosen), dims, centroids.row(c));
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], sq_dist(pts.row(i), centroids.row(c), dims));
    }
  }
  return centroids;
}

int nearest_centroid(const MatD& centroids, const double* point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.rows; ++c) {
    const double d2 = sq_dist(point, centroids.row(c), centroids.cols);
    if (d2 < best_d) {
      best_d = d2;
      best = c;
    }
  }
  return best;
}

}  // namespace

ClusterModel fit_kmeans(const std::vector<UtteranceSummary>& summaries, int k,
                        std::uint64_t seed, const KMeansOptions& opts, KMeansTrace* trace) {
  if (k < 1) throw UserError("fit_kmeans: k must be >= 1");
  if (static_cast<int>(summaries.size()) < k) {
    throw UserError("fit_kmeans: fewer points than clusters");
  }
  const int n = static_cast<int>(summaries.size());

  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.feature_stats = summary_stats(summaries);
  const MatD pts = standardize(summaries, model.feature_stats);
  const int dims = pts.cols;

  Rng rng(derive_seed(seed, "kmeans++"));
  model.centroids = kmeanspp_init(pts, k, rng);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // Assignment.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      labels[i] = nearest_centroid(model.centroids, pts.row(i));
      inertia += sq_dist(pts.row(i), model.centroids.row(labels[i]), dims);
    }
    if (trace != nullptr) trace->inertia_per_iter.push_back(inertia);

    // Update.
    MatD sums(k, dims);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const double* p = pts.row(i);
      double* s = sums.row(labels[i]);
      for (int d = 0; d < dims; ++d) s[d] += p[d];
      ++counts[labels[i]];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Reseed to the point farthest from its own centroid.
        int worst = 0;
        double worst_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d2 = sq_dist(pts.row(i), model.centroids.row(labels[i]), dims);
          if (d2 > worst_d) {
            worst_d = d2;
            worst = i;
          }
        }
        shift += sq_dist(model.centroids.row(c), pts.row(worst), dims);
        std::copy_n(pts.row(worst), dims, model.centroids.row(c));
        continue;
      }
      double* centroid = model.centroids.row(c);
      const double* s = sums.row(c);
      for (int d = 0; d < dims; ++d) {
        const double updated = s[d] / counts[c];
        const double diff = updated - centroid[d];
        shift += diff * diff;
        centroid[d] = updated;
      }
    }
    const bool converged = std::sqrt(shift) < opts.tol;
    const bool stalled = std::abs(prev_inertia - inertia) <= opts.tol * std::max(1.0, inertia);
    prev_inertia = inertia;
    if (converged || stalled) break;
  }

  // Final assignment, stored in the model.
  for (int i = 0; i < n; ++i) {
    model.assignments[summaries[i].id] = nearest_centroid(model.centroids, pts.row(i));
  }
  return model;
}

int assign(const ClusterModel& model, const UtteranceSummary& summary) {
  if (static_cast<int>(summary.vector.size()) != model.centroids.cols) {
    throw UserError("assign: summary dimension mismatch");
  }
  std::vector<double> z(summary.vector.size());
  for (std::size_t d = 0; d < z.size(); ++d) {
    const double sd = model.feature_stats.stddev[d];
    z[d] = sd < kStdFloor ? 0.0 : (summary.vector[d] - model.feature_stats.mean[d]) / sd;
  }
  return nearest_centroid(model.centroids, z.data());
}

CodebookWeights codebook_weights(int cluster, int n_codebooks, double w_p, double w_s) {
  if (cluster < 0 || cluster >= n_codebooks) {
    throw UserError("codebook_weights: cluster out of range");
  }
  if (w_s <= 0.0 || w_p < 2.0 * w_s) {
    throw UserError("codebook_weights: require w_p >= 2 * w_s > 0");
  }
  CodebookWeights cw;
  cw.primary = cluster;
  cw.weights.assign(static_cast<std::size_t>(n_codebooks), w_s);
  cw.weights[static_cast<std::size_t>(cluster)] = w_p;
  const double raw_sum = w_p + w_s * (n_codebooks - 1);
  const double scale = static_cast<double>(n_codebooks) / raw_sum;
  for (double& w : cw.weights) w *= scale;
  return cw;
}

std::string cluster_model_to_json(const ClusterModel& model) {
  json j;
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["feature_stats"] = {{"mean", model.feature_stats.mean},
                        {"std", model.feature_stats.stddev}};
  j["dims"] = model.centroids.cols;
  j["centroids"] = model.centroids.d;  // row-major
  json assignments = json::object();
  for (const auto& [id, cluster] : model.assignments) assignments[id] = cluster;
  j["assignments"] = assignments;
  return j.dump(2);
}

ClusterModel cluster_model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UserError(std::string("cluster model: malformed JSON: ") + e.what());
  }
  ClusterModel model;
  model.k = j.at("k").get<int>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.feature_stats.mean = j.at("feature_stats").at("mean").get<std::vector<double>>();
  model.feature_stats.stddev = j.at("feature_stats").at("std").get<std::vector<double>>();
  const int dims = j.at("dims").get<int>();
  const auto flat = j.at("centroids").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != model.k * dims) {
    throw UserError("cluster model: centroid size mismatch");
  }
  model.centroids = MatD(model.k, dims);
  model.centroids.d = flat;
  for (const auto& [id, cluster] : j.at("assignments").items()) {
    model.assignments[id] = cluster.get<int>();
  }
  return model;
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("save_cluster_model: cannot open: " + path);
  out << cluster_model_to_json(model) << '\n';
}

ClusterModel load_cluster_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("load_cluster_model: cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return cluster_model_from_json(text);
}

std::vector<unsigned char> centroid_bytes(const ClusterModel& model) {
  const auto* p = reinterpret_cast<const unsigned char*>(model.centroids.d.data());
  return {p, p + model.centroids.d.size() * sizeof(double)};
}

}  // namespace brq
