#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "planprobe/env.hpp"
#include "planprobe/matrix.hpp"

namespace planprobe::similarity {

/// u.v / (|u| |v|). Throws DomainError for a zero vector, ShapeError on
/// length mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

struct PairSpec {
  std::string name;
  std::size_t row_a = 0;
  std::size_t row_b = 0;
  std::string group = "similar";  // "similar" or "control"
};

/// Every pair of abilities sharing a semantic class (fillers excluded) as
/// "similar", plus one cross-class control pair per class pair.
std::vector<PairSpec> default_pairs(const env::EnvConfig& config);

/// Embedding row for an entity type name ("enemy_tower", ...) or ability name.
std::size_t row_of(const std::string& name, const env::EnvConfig& config);

/// JSON: {"pairs": [{"name": ..., "a": <name or row>, "b": ..., "group": ...}]}.
std::vector<PairSpec> load_pairs(const std::filesystem::path& path, const env::EnvConfig& config);

struct VersionSimilarity {
  std::uint64_t version = 0;
  std::vector<double> cosines;  // one per pair
  double baseline_mean = 0.0;
  double baseline_std = 0.0;

  double group_mean(const std::vector<PairSpec>& pairs, const std::string& group) const;
};

/// Cosines of `pairs` in a (dim x rows) table plus mean/std over
/// `baseline_samples` uniformly drawn distinct row pairs.
VersionSimilarity measure(const Matrix& table, std::uint64_t version, const std::vector<PairSpec>& pairs,
                          std::size_t baseline_samples, std::uint64_t seed);

struct SimilarityTrajectory {
  std::vector<PairSpec> pairs;
  std::vector<VersionSimilarity> versions;
};

/// Reads "embedding.table" from every checkpoint, in order.
SimilarityTrajectory trajectory(const std::vector<std::filesystem::path>& checkpoints,
                                const std::vector<PairSpec>& pairs, std::size_t baseline_samples = 1000,
                                std::uint64_t seed = 0);

/// Columns: version,pair_name,group,cosine,std. One baseline row per version.
std::string to_csv(const SimilarityTrajectory& t);
std::string to_svg(const SimilarityTrajectory& t);

inline constexpr const char* kBaselineRow = "random_baseline";

}  // namespace planprobe::similarity
