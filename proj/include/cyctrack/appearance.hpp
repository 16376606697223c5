#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cyctrack/error.hpp"

namespace cyctrack {

/// Image, BEV and head embeddings of one object.
struct AppearanceState {
  std::vector<double> e_img;
  std::vector<double> e_bev;
  std::vector<double> e_head;

  std::size_t dim() const { return e_img.size(); }

  void validate() const {
    if (e_bev.size() != e_img.size() || e_head.size() != e_img.size()) {
      throw ContractViolation("appearance clues must share one dimension");
    }
    for (const auto* v : {&e_img, &e_bev, &e_head}) {
      for (double x : *v) {
        if (!std::isfinite(x)) throw ContractViolation("appearance vector is not finite");
      }
    }
  }

  friend bool operator==(const AppearanceState&, const AppearanceState&) = default;
};

struct ClueWeights {
  double w_img = 1.0 / 3.0;
  double w_bev = 1.0 / 3.0;
  double w_head = 1.0 / 3.0;

  double total() const { return w_img + w_bev + w_head; }

  void validate() const {
    if (w_img < 0.0 || w_bev < 0.0 || w_head < 0.0 || !(total() > 0.0)) {
      throw ContractViolation("clue weights must be non-negative with a positive sum");
    }
  }
};

/// Cosine similarity; 0 when either vector is (numerically) zero.
inline double normalized_inner_product(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ContractViolation("normalized_inner_product: dimension mismatch");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  const double c = dot / (nu * nv);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

/// Weighted sum of the three per-clue cosine similarities.
inline double multi_clue_similarity(const AppearanceState& d, const AppearanceState& t,
                                    const ClueWeights& w) {
  return w.w_img * normalized_inner_product(d.e_img, t.e_img) +
         w.w_bev * normalized_inner_product(d.e_bev, t.e_bev) +
         w.w_head * normalized_inner_product(d.e_head, t.e_head);
}

/// Dense rows x cols cost matrix with an admissibility mask. Rows are
/// detections, columns are tracklets.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0, bool admissible = true)
      : rows_(rows), cols_(cols), values_(rows * cols, fill),
        gate_(rows * cols, admissible ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& value(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double value(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  bool admissible(std::size_t r, std::size_t c) const { return gate_[r * cols_ + c] != 0; }
  void set_admissible(std::size_t r, std::size_t c, bool ok) {
    gate_[r * cols_ + c] = ok ? 1 : 0;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<unsigned char> gate_;
};

/// Negated multi-clue similarities; a pair is admissible when its similarity
/// reaches `sim_threshold`.
inline CostMatrix build_similarity_matrix(std::span<const AppearanceState> dets,
                                          std::span<const AppearanceState> trks,
                                          const ClueWeights& w, double sim_threshold) {
  CostMatrix c(dets.size(), trks.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < trks.size(); ++j) {
      const double sim = multi_clue_similarity(dets[i], trks[j], w);
      c.value(i, j) = -sim;
      c.set_admissible(i, j, sim >= sim_threshold);
    }
  }
  return c;
}

}  // namespace cyctrack
