#pragma once

// Backward refinement (object-aware filter masks applied to dense feature
// grids) and deformable-attention temporal fusion. Learned layers are
// replaced by seeded linear maps and fixed convolution kernels.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cyctrack/error.hpp"
#include "cyctrack/random.hpp"

namespace cyctrack {

enum class GridKind { kImage, kBev };

struct GridShape {
  int height = 0;
  int width = 0;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Dense H x W x C feature map, channel-fastest storage.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  GridKind kind = GridKind::kBev;
  std::vector<double> data;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c, GridKind k, double fill = 0.0)
      : height(h), width(w), channels(c), kind(k),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 1 || w < 1 || c < 1) throw ContractViolation("grid dimensions must be >= 1");
  }

  GridShape shape() const { return {height, width}; }

  std::size_t offset(int r, int col, int ch) const {
    return (static_cast<std::size_t>(r) * width + col) * channels + ch;
  }
  double& at(int r, int col, int ch) { return data[offset(r, col, ch)]; }
  double at(int r, int col, int ch) const { return data[offset(r, col, ch)]; }

  /// Zero outside the grid.
  double sample(int r, int col, int ch) const {
    if (r < 0 || r >= height || col < 0 || col >= width) return 0.0;
    return at(r, col, ch);
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

/// One object as seen by the refiner: concatenated embedding plus its
/// predicted center (fractional cell coordinates) and footprint in cells.
struct ObjectPrior {
  std::vector<double> e_cat;
  double center_row = 0.0;
  double center_col = 0.0;
  double extent_r = 1.0;
  double extent_c = 1.0;
};

struct FilterMask {
  int level = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FilterMask() = default;
  FilterMask(int lvl, GridShape s)
      : level(lvl), height(s.height), width(s.width),
        data(static_cast<std::size_t>(s.height) * s.width, 0.0) {}

  GridShape shape() const { return {height, width}; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }

  bool any_nonzero() const {
    return std::any_of(data.begin(), data.end(), [](double v) { return v != 0.0; });
  }

  friend bool operator==(const FilterMask&, const FilterMask&) = default;
};

/// Seeded stand-ins for the learned scale-level classifier and mask weight
/// predictor, plus the per-level spatial scope radii (cells).
struct InjectedMaps {
  int num_levels = 0;
  Eigen::MatrixXd level_map;    // L x 3C
  Eigen::VectorXd level_bias;   // L
  Eigen::RowVectorXd weight_map;  // 1 x 3C
  double weight_bias = 0.0;
  std::vector<double> scope_radii;  // per level, increasing
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return static_cast<std::size_t>(level_map.cols()); }

  double sigma(int level) const { return scope_radii.at(static_cast<std::size_t>(level)) / 3.0; }

  static InjectedMaps from_seed(std::uint64_t seed, std::size_t input_dim,
                                std::vector<double> scope_radii) {
    if (scope_radii.empty()) throw ContractViolation("at least one scale level is required");
    InjectedMaps m;
    m.num_levels = static_cast<int>(scope_radii.size());
    m.scope_radii = std::move(scope_radii);
    m.seed = seed;
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(input_dim, 1)));
    const auto n = static_cast<Eigen::Index>(input_dim);
    m.level_map.resize(m.num_levels, n);
    m.level_bias = Eigen::VectorXd::Zero(m.num_levels);
    m.weight_map.resize(n);
    for (int l = 0; l < m.num_levels; ++l) {
      for (Eigen::Index k = 0; k < n; ++k) m.level_map(l, k) = rng.normal(0.0, scale);
    }
    for (Eigen::Index k = 0; k < n; ++k) m.weight_map(k) = rng.normal(0.0, scale);
    return m;
  }
};

/// Defaults: three image levels with radii {2, 4, 8} cells, five BEV levels
/// with radii {2, 4, 8, 16, 24} cells.
inline std::vector<double> default_scope_radii(GridKind kind) {
  if (kind == GridKind::kImage) return {2.0, 4.0, 8.0};
  return {2.0, 4.0, 8.0, 16.0, 24.0};
}

/// Square kernel applied per channel with zero padding.
struct Kernel2D {
  int size = 1;
  std::vector<double> weights{1.0};

  static Kernel2D box(int size) {
    if (size < 1 || size % 2 == 0) throw ContractViolation("kernel size must be odd");
    Kernel2D k;
    k.size = size;
    k.weights.assign(static_cast<std::size_t>(size) * size, 1.0 / (size * size));
    return k;
  }

  double at(int r, int c) const { return weights[static_cast<std::size_t>(r) * size + c]; }
};

/// Per-level smoothing kernels: box kernels of size 2l+1, so the image
/// levels use {1, 3, 5} and the BEV levels {1, 3, 5, 7, 9} from small to
/// large objects.
inline std::vector<Kernel2D> default_level_kernels(int num_levels) {
  std::vector<Kernel2D> ks;
  for (int l = 0; l < num_levels; ++l) ks.push_back(Kernel2D::box(2 * l + 1));
  return ks;
}

/// Argmax of the injected level map; ties resolve to the lowest level.
inline int assign_scale_level(const ObjectPrior& o, const InjectedMaps& maps) {
  if (o.e_cat.size() != maps.input_dim()) {
    throw ContractViolation("e_cat dimension does not match the level map");
  }
  const Eigen::Map<const Eigen::VectorXd> e(o.e_cat.data(),
                                            static_cast<Eigen::Index>(o.e_cat.size()));
  const Eigen::VectorXd logits = maps.level_map * e + maps.level_bias;
  int best = 0;
  for (int l = 1; l < maps.num_levels; ++l) {
    if (logits(l) > logits(best)) best = l;
  }
  return best;
}

/// Peak amplitude in [0, 1] from the weight map through a logistic squash.
inline double mask_amplitude(const ObjectPrior& o, const InjectedMaps& maps) {
  if (o.e_cat.size() != maps.input_dim()) {
    throw ContractViolation("e_cat dimension does not match the weight map");
  }
  const Eigen::Map<const Eigen::VectorXd> e(o.e_cat.data(),
                                            static_cast<Eigen::Index>(o.e_cat.size()));
  const double z = maps.weight_map.dot(e) + maps.weight_bias;
  return 1.0 / (1.0 + std::exp(-z));
}

/// True when cell (r, c) lies within `radius` cells of the object's center.
inline bool in_scope(const ObjectPrior& o, double radius, int r, int c) {
  const double dr = r - o.center_row;
  const double dc = c - o.center_col;
  return dr * dr + dc * dc <= radius * radius;
}

/// Isotropic Gaussian weight mask for one object, truncated to its scope.
inline FilterMask object_mask(const ObjectPrior& o, int level, const InjectedMaps& maps,
                              GridShape shape) {
  if (!(o.center_row >= 0.0 && o.center_row <= shape.height - 1 && o.center_col >= 0.0 &&
        o.center_col <= shape.width - 1)) {
    throw ContractViolation("object center lies outside the grid");
  }
  if (level < 0 || level >= maps.num_levels) throw ContractViolation("level out of range");
  const double amp = mask_amplitude(o, maps);
  const double radius = maps.scope_radii[static_cast<std::size_t>(level)];
  const double sigma = maps.sigma(level);
  FilterMask m(level, shape);
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      if (!in_scope(o, radius, r, c)) continue;
      const double dr = r - o.center_row;
      const double dc = c - o.center_col;
      m.at(r, c) = amp * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
    }
  }
  return m;
}

/// Pointwise maximum of same-level masks; all zeros when `masks` is empty.
inline FilterMask combine_masks(std::span<const FilterMask> masks, int level, GridShape shape) {
  FilterMask out(level, shape);
  for (const FilterMask& m : masks) {
    if (m.shape() != shape) throw ContractViolation("combine_masks: shape mismatch");
    if (m.level != level) throw ContractViolation("combine_masks: level mismatch");
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] = std::max(out.data[i], m.data[i]);
    }
  }
  return out;
}

/// Depthwise "same" convolution (correlation) with zero padding.
inline FeatureGrid convolve(const FeatureGrid& f, const Kernel2D& k) {
  FeatureGrid out(f.height, f.width, f.channels, f.kind);
  const int half = k.size / 2;
  for (int r = 0; r < f.height; ++r) {
    for (int c = 0; c < f.width; ++c) {
      for (int ch = 0; ch < f.channels; ++ch) {
        double acc = 0.0;
        for (int kr = 0; kr < k.size; ++kr) {
          for (int kc = 0; kc < k.size; ++kc) {
            acc += k.at(kr, kc) * f.sample(r + kr - half, c + kc - half, ch);
          }
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

inline FeatureGrid apply_mask(const FeatureGrid& f, const FilterMask& m) {
  FeatureGrid out = f;
  for (int r = 0; r < f.height; ++r) {
    for (int c = 0; c < f.width; ++c) {
      const double w = m.at(r, c);
      for (int ch = 0; ch < f.channels; ++ch) out.at(r, c, ch) *= w;
    }
  }
  return out;
}

/// Each non-empty level mask gates the features, the gated copy is smoothed
/// with that level's kernel, and the branch outputs are averaged together
/// with the original grid. Levels whose mask is identically zero contribute
/// no branch, so an empty mask set returns the input unchanged.
inline FeatureGrid refine_features(const FeatureGrid& f, std::span<const FilterMask> masks,
                                   std::span<const Kernel2D> kernels) {
  for (const FilterMask& m : masks) {
    if (m.shape() != f.shape()) throw ContractViolation("refine_features: mask shape mismatch");
    if (m.level < 0 || static_cast<std::size_t>(m.level) >= kernels.size()) {
      throw ContractViolation("refine_features: no kernel for mask level");
    }
  }
  FeatureGrid acc = f;
  int branches = 0;
  for (const FilterMask& m : masks) {
    if (!m.any_nonzero()) continue;
    const FeatureGrid branch =
        convolve(apply_mask(f, m), kernels[static_cast<std::size_t>(m.level)]);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += branch.data[i];
    ++branches;
  }
  if (branches == 0) return f;
  const double inv = 1.0 / (branches + 1);
  for (double& v : acc.data) v *= inv;
  return acc;
}

/// Injected parameters of the deformable attention fusion. Offsets and
/// attention logits are linear in the concatenated [prev, curr] features of
/// the query cell.
struct DeformableFusionParams {
  int channels = 0;
  int heads = 1;
  int points = 1;
  std::vector<Eigen::MatrixXd> value_maps;   // per head, C_v x C
  std::vector<Eigen::MatrixXd> output_maps;  // per head, C x C_v
  Eigen::MatrixXd offset_map;     // (heads*points*2) x 2C, rows (h, k, {drow, dcol})
  Eigen::VectorXd offset_bias;    // heads*points*2
  Eigen::MatrixXd attention_map;  // (heads*points) x 2C
  Eigen::VectorXd attention_bias; // heads*points

  int value_dim() const { return channels / heads; }

  void validate() const {
    if (channels < 1 || heads < 1 || points < 1 || channels % heads != 0) {
      throw ContractViolation("channels must be divisible by the number of heads");
    }
    const int cv = value_dim();
    const auto hk = static_cast<Eigen::Index>(heads) * points;
    if (value_maps.size() != static_cast<std::size_t>(heads) ||
        output_maps.size() != static_cast<std::size_t>(heads)) {
      throw ContractViolation("one value and output map per head is required");
    }
    for (int h = 0; h < heads; ++h) {
      if (value_maps[h].rows() != cv || value_maps[h].cols() != channels ||
          output_maps[h].rows() != channels || output_maps[h].cols() != cv) {
        throw ContractViolation("value/output map shape mismatch");
      }
    }
    if (offset_map.rows() != 2 * hk || offset_map.cols() != 2 * channels ||
        offset_bias.size() != 2 * hk || attention_map.rows() != hk ||
        attention_map.cols() != 2 * channels || attention_bias.size() != hk) {
      throw ContractViolation("offset/attention generator shape mismatch");
    }
  }

  /// All-zero generators: zero offsets, uniform attention.
  static DeformableFusionParams zeros(int channels, int heads, int points) {
    DeformableFusionParams p;
    p.channels = channels;
    p.heads = heads;
    p.points = points;
    const int cv = channels / heads;
    const auto hk = static_cast<Eigen::Index>(heads) * points;
    p.value_maps.assign(heads, Eigen::MatrixXd::Zero(cv, channels));
    p.output_maps.assign(heads, Eigen::MatrixXd::Zero(channels, cv));
    p.offset_map = Eigen::MatrixXd::Zero(2 * hk, 2 * channels);
    p.offset_bias = Eigen::VectorXd::Zero(2 * hk);
    p.attention_map = Eigen::MatrixXd::Zero(hk, 2 * channels);
    p.attention_bias = Eigen::VectorXd::Zero(hk);
    return p;
  }

  static DeformableFusionParams from_seed(std::uint64_t seed, int channels, int heads,
                                          int points, double offset_scale = 0.5) {
    DeformableFusionParams p = zeros(channels, heads, points);
    Rng rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& m, double s) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal(0.0, s);
      }
    };
    const double ws = 1.0 / std::sqrt(static_cast<double>(channels));
    for (int h = 0; h < heads; ++h) {
      fill(p.value_maps[h], ws);
      fill(p.output_maps[h], ws);
    }
    fill(p.offset_map, offset_scale * ws);
    for (Eigen::Index i = 0; i < p.offset_bias.size(); ++i) {
      p.offset_bias(i) = rng.normal(0.0, offset_scale);
    }
    fill(p.attention_map, ws);
    for (Eigen::Index i = 0; i < p.attention_bias.size(); ++i) {
      p.attention_bias(i) = rng.normal(0.0, 1.0);
    }
    return p;
  }
};

/// Bilinear sample of channel `ch` at fractional (row, col); taps outside
/// the grid contribute zero.
inline double bilinear_sample(const FeatureGrid& f, double row, double col, int ch) {
  const double r0 = std::floor(row);
  const double c0 = std::floor(col);
  const double fr = row - r0;
  const double fc = col - c0;
  const int ir = static_cast<int>(r0);
  const int ic = static_cast<int>(c0);
  return (1.0 - fr) * (1.0 - fc) * f.sample(ir, ic, ch) +
         (1.0 - fr) * fc * f.sample(ir, ic + 1, ch) +
         fr * (1.0 - fc) * f.sample(ir + 1, ic, ch) + fr * fc * f.sample(ir + 1, ic + 1, ch);
}

/// Per-cell sampling offsets (cells) and softmax-normalized attention
/// weights, indexed [h * points + k].
struct SamplingPlan {
  std::vector<double> drow;
  std::vector<double> dcol;
  std::vector<double> weight;
};

inline SamplingPlan sampling_plan(const FeatureGrid& prev, const FeatureGrid& curr, int r, int c,
                                  const DeformableFusionParams& p) {
  const int C = curr.channels;
  Eigen::VectorXd x(2 * C);
  for (int ch = 0; ch < C; ++ch) {
    x(ch) = prev.at(r, c, ch);
    x(C + ch) = curr.at(r, c, ch);
  }
  const Eigen::VectorXd off = p.offset_map * x + p.offset_bias;
  const Eigen::VectorXd logits = p.attention_map * x + p.attention_bias;
  const int hk = p.heads * p.points;
  SamplingPlan plan;
  plan.drow.resize(hk);
  plan.dcol.resize(hk);
  plan.weight.resize(hk);
  for (int h = 0; h < p.heads; ++h) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < p.points; ++k) mx = std::max(mx, logits(h * p.points + k));
    double z = 0.0;
    for (int k = 0; k < p.points; ++k) {
      const int i = h * p.points + k;
      plan.weight[i] = std::exp(logits(i) - mx);
      z += plan.weight[i];
    }
    for (int k = 0; k < p.points; ++k) {
      const int i = h * p.points + k;
      plan.weight[i] /= z;
      plan.drow[i] = off(2 * i);
      plan.dcol[i] = off(2 * i + 1);
    }
  }
  return plan;
}

/// out(s) = sum_h W_h [ sum_k A_hk * W'_h curr(s + ds_hk) ], with offsets
/// and attention generated from the refined previous grid concatenated with
/// the current one.
inline FeatureGrid temporal_fuse(const FeatureGrid& prev_refined, const FeatureGrid& curr,
                                 const DeformableFusionParams& p) {
  p.validate();
  if (prev_refined.shape() != curr.shape() || prev_refined.channels != curr.channels) {
    throw ContractViolation("temporal_fuse: grid shapes differ");
  }
  if (curr.channels != p.channels) throw ContractViolation("temporal_fuse: channel mismatch");
  const int C = curr.channels;
  FeatureGrid out(curr.height, curr.width, C, curr.kind);
  Eigen::VectorXd sampled(C);
  for (int r = 0; r < curr.height; ++r) {
    for (int c = 0; c < curr.width; ++c) {
      const SamplingPlan plan = sampling_plan(prev_refined, curr, r, c, p);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(C);
      for (int h = 0; h < p.heads; ++h) {
        Eigen::VectorXd head = Eigen::VectorXd::Zero(p.value_dim());
        for (int k = 0; k < p.points; ++k) {
          const int i = h * p.points + k;
          for (int ch = 0; ch < C; ++ch) {
            sampled(ch) = bilinear_sample(curr, r + plan.drow[i], c + plan.dcol[i], ch);
          }
          head += plan.weight[i] * (p.value_maps[h] * sampled);
        }
        acc += p.output_maps[h] * head;
      }
      for (int ch = 0; ch < C; ++ch) out.at(r, c, ch) = acc(ch);
    }
  }
  return out;
}

/// Mask maps and smoothing kernels for one grid kind.
struct GridRefiner {
  InjectedMaps maps;
  std::vector<Kernel2D> kernels;

  int num_levels() const { return maps.num_levels; }

  static GridRefiner with_defaults(GridKind kind, std::uint64_t seed, std::size_t e_cat_dim) {
    GridRefiner g;
    g.maps = InjectedMaps::from_seed(seed, e_cat_dim, default_scope_radii(kind));
    g.kernels = default_level_kernels(g.maps.num_levels);
    return g;
  }
};

/// An object's prior on the image grid and on the BEV grid; both carry the
/// same concatenated embedding.
struct RefinerObject {
  ObjectPrior image;
  ObjectPrior bev;
};

struct GridRefinement {
  FeatureGrid refined;
  std::vector<FilterMask> level_masks;  // one per level, index == level
  std::vector<int> levels;              // per object
};

/// Level assignment, per-object masks, per-level combination and feature
/// refinement for a single grid.
inline GridRefinement refine_grid(const FeatureGrid& f, std::span<const ObjectPrior> objects,
                                  const GridRefiner& g) {
  if (g.kernels.size() < static_cast<std::size_t>(g.num_levels())) {
    throw ContractViolation("refiner needs one kernel per level");
  }
  GridRefinement out;
  std::vector<std::vector<FilterMask>> per_level(static_cast<std::size_t>(g.num_levels()));
  for (const ObjectPrior& o : objects) {
    const int level = assign_scale_level(o, g.maps);
    out.levels.push_back(level);
    per_level[static_cast<std::size_t>(level)].push_back(object_mask(o, level, g.maps, f.shape()));
  }
  for (int l = 0; l < g.num_levels(); ++l) {
    out.level_masks.push_back(combine_masks(per_level[static_cast<std::size_t>(l)], l, f.shape()));
  }
  out.refined = refine_features(f, out.level_masks, g.kernels);
  return out;
}

struct BackwardRefinement {
  GridRefinement image;
  GridRefinement bev;
};

inline BackwardRefinement backward_refine(const FeatureGrid& f_img, const FeatureGrid& f_bev,
                                          std::span<const RefinerObject> objects,
                                          const GridRefiner& image_refiner,
                                          const GridRefiner& bev_refiner) {
  std::vector<ObjectPrior> img, bev;
  img.reserve(objects.size());
  bev.reserve(objects.size());
  for (const RefinerObject& o : objects) {
    img.push_back(o.image);
    bev.push_back(o.bev);
  }
  return {refine_grid(f_img, img, image_refiner), refine_grid(f_bev, bev, bev_refiner)};
}

/// Mean |value| over cells where every level mask is zero, divided by the
/// same quantity on the reference grid. Returns 1 when no such cell exists
/// or the reference is zero there.
inline double outside_scope_ratio(const FeatureGrid& refined, const FeatureGrid& reference,
                                  std::span<const FilterMask> masks) {
  double num = 0.0, den = 0.0;
  for (int r = 0; r < reference.height; ++r) {
    for (int c = 0; c < reference.width; ++c) {
      bool outside = true;
      for (const FilterMask& m : masks) {
        if (m.at(r, c) != 0.0) {
          outside = false;
          break;
        }
      }
      if (!outside) continue;
      for (int ch = 0; ch < reference.channels; ++ch) {
        num += std::abs(refined.at(r, c, ch));
        den += std::abs(reference.at(r, c, ch));
      }
    }
  }
  return den > 0.0 ? num / den : 1.0;
}

}  // namespace cyctrack
