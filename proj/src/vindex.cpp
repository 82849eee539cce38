#include "hgrag/vindex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgrag/errors.hpp"

namespace hgrag {
namespace {

double l2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

VectorCollection::VectorCollection(CollectionKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
  if (dim == 0) throw ContractError("vector collection dimension must be positive");
}

void VectorCollection::add(std::string id, Vector vector, double weight) {
  if (vector.size() != dim_) {
    throw ContractError("vector for '" + id + "' has length " + std::to_string(vector.size()) +
                        ", collection dim is " + std::to_string(dim_));
  }
  double n = l2(vector);
  if (!(n > 0.0) || !std::isfinite(n)) throw ContractError("vector for '" + id + "' has zero norm");
  if (kind_ == CollectionKind::kChunk) {
    weight = 1.0;
  } else if (!(weight > 0.0)) {
    throw ContractError("weight for '" + id + "' must be positive");
  }
  items_.push_back({std::move(id), std::move(vector), weight});
  norms_.push_back(n);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractError("cosine of vectors with different lengths");
  double nu = l2(u);
  double nv = l2(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw ContractError("cosine of a zero-norm vector");
  return clamp_unit(std::inner_product(u.begin(), u.end(), v.begin(), 0.0) / (nu * nv));
}

std::vector<RankedHit> top_k_weighted(std::span<const double> query,
                                      const VectorCollection& collection, std::size_t k,
                                      double tau) {
  if (query.size() != collection.dim()) {
    throw ContractError("query length " + std::to_string(query.size()) +
                        " does not match collection dim " + std::to_string(collection.dim()));
  }
  const double qn = l2(query);
  if (!(qn > 0.0)) throw ContractError("query vector is all zero");

  std::vector<RankedHit> hits;
  if (k == 0 || collection.empty()) return hits;
  const auto& items = collection.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    double dot = std::inner_product(query.begin(), query.end(), item.vector.begin(), 0.0);
    double sim = clamp_unit(dot / (qn * collection.norm(i)));
    double combined = sim * item.weight;
    if (combined > tau) hits.push_back({item.id, sim, combined, 0});
  }
  auto better = [](const RankedHit& a, const RankedHit& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.id < b.id;
  };
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), better);
  }
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

}  // namespace hgrag
