#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hgrag {

using Vector = std::vector<double>;

enum class CollectionKind { kEntity, kHyperedge, kChunk };

struct VectorItem {
  std::string id;
  Vector vector;
  double weight = 1.0;
};

/// Immutable set of vectors searched by exact full scan.
class VectorCollection {
 public:
  VectorCollection(CollectionKind kind, std::size_t dim);

  /// Throws ContractError on wrong length, zero norm, or a non-positive
  /// weight (chunk collections force weight 1).
  void add(std::string id, Vector vector, double weight = 1.0);

  CollectionKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const std::vector<VectorItem>& items() const noexcept { return items_; }
  double norm(std::size_t i) const { return norms_[i]; }

 private:
  CollectionKind kind_;
  std::size_t dim_;
  std::vector<VectorItem> items_;
  std::vector<double> norms_;
};

struct RankedHit {
  std::string id;
  double similarity = 0.0;
  double combined = 0.0;  // similarity * weight
  std::size_t rank = 0;   // 1-based
};

/// dot(u,v) / (|u||v|), clamped to [-1, 1]. Throws ContractError on length
/// mismatch or a zero-norm input.
double cosine(std::span<const double> u, std::span<const double> v);

/// Up to `k` items whose cosine * weight exceeds `tau`, ordered by combined
/// score descending then id ascending.
std::vector<RankedHit> top_k_weighted(std::span<const double> query,
                                      const VectorCollection& collection, std::size_t k,
                                      double tau);

}  // namespace hgrag
