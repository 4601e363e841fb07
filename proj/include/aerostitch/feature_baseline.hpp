#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "aerostitch/error.hpp"
#include "aerostitch/geometry.hpp"
#include "aerostitch/image.hpp"
#include "aerostitch/transform_pipeline.hpp"

namespace aerostitch {

struct Keypoint {
  Vec2 position = Vec2::Zero();
  double response = 0.0;
};

/// x_i lives in image A (the earlier frame), x_j in image B.
struct Correspondence {
  Vec2 x_i = Vec2::Zero();
  Vec2 x_j = Vec2::Zero();
  double score = 0.0;
};

// ---------------------------------------------------------------------------
// Harris corners

struct HarrisOptions {
  double kappa = 0.04;
  double sigma = 1.5;
  /// Candidates weaker than quality * strongest response are dropped.
  double quality = 0.01;
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable convolution with edge replication.
inline std::vector<double> blur(const std::vector<double>& src, int w, int h,
                                const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[k + r] * src[y * w + std::clamp(x + k, 0, w - 1)];
      tmp[y * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[k + r] * tmp[std::clamp(y + k, 0, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Harris response det(M) - kappa * trace(M)^2 of the Gaussian-weighted
/// structure tensor, one value per pixel.
inline std::vector<double> harris_response(const ImageBuffer& gray, const HarrisOptions& opts = {}) {
  const int w = gray.width(), h = gray.height();
  const auto n = static_cast<std::size_t>(w) * h;
  std::vector<double> ixx(n), iyy(n), ixy(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx =
          0.5 * (gray.at(std::min(x + 1, w - 1), y) - gray.at(std::max(x - 1, 0), y));
      const double gy =
          0.5 * (gray.at(x, std::min(y + 1, h - 1)) - gray.at(x, std::max(y - 1, 0)));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  const auto kernel = detail::gaussian_kernel(opts.sigma);
  ixx = detail::blur(ixx, w, h, kernel);
  iyy = detail::blur(iyy, w, h, kernel);
  ixy = detail::blur(ixy, w, h, kernel);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
    const double tr = ixx[i] + iyy[i];
    r[i] = det - opts.kappa * tr * tr;
  }
  return r;
}

/// Up to max_count strongest Harris corners, sub-pixel refined and at least
/// min_distance apart, sorted by response (descending). max_count <= 0 means
/// no limit.
inline std::vector<Keypoint> detect_corners(const ImageBuffer& image, int max_count,
                                            double min_distance, const HarrisOptions& opts = {}) {
  if (std::min(image.width(), image.height()) < 16) {
    throw Error(ErrorCode::ImageTooSmall, "corner detection needs at least 16x16 pixels");
  }
  const ImageBuffer gray = to_gray(image);
  const int w = gray.width(), h = gray.height();
  const auto r = harris_response(gray, opts);
  const double peak = *std::max_element(r.begin(), r.end());
  if (!(peak > 1e-12)) return {};
  const double floor = std::max(opts.quality * peak, 1e-12);

  const int margin = static_cast<int>(std::ceil(3.0 * opts.sigma)) + 1;
  auto at = [&](int x, int y) { return r[static_cast<std::size_t>(y) * w + x]; };
  std::vector<Keypoint> candidates;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const double v = at(x, y);
      if (v < floor) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = at(x + dx, y + dy);
          // Plateaus keep their first pixel in scan order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (n > v || (earlier && n == v)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      auto offset = [](double m, double c, double p) {
        const double denom = m - 2.0 * c + p;
        if (std::abs(denom) < 1e-18) return 0.0;
        return std::clamp(0.5 * (m - p) / denom, -0.5, 0.5);
      };
      const Vec2 pos(x + offset(at(x - 1, y), v, at(x + 1, y)),
                     y + offset(at(x, y - 1), v, at(x, y + 1)));
      candidates.push_back({pos, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });

  std::vector<Keypoint> kept;
  const double min_d2 = min_distance * min_distance;
  for (const auto& c : candidates) {
    if (max_count > 0 && static_cast<int>(kept.size()) >= max_count) break;
    const bool crowded = std::any_of(kept.begin(), kept.end(), [&](const Keypoint& k) {
      return (k.position - c.position).squaredNorm() < min_d2;
    });
    if (!crowded) kept.push_back(c);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// ZNCC patch matching

struct MatchOptions {
  int patch = 11;
  double min_score = 0.8;
  /// Ambiguity test on (1 - score): the best candidate must beat the
  /// runner-up by this ratio in both directions.
  double max_ratio = 0.8;
};

namespace detail {

// Zero-mean, unit-norm patch centered on p; empty if it leaves the image or
// has no contrast.
inline std::vector<double> normalized_patch(const ImageBuffer& gray, const Vec2& p, int patch) {
  const int r = patch / 2;
  if (p.x() - r < 0 || p.y() - r < 0 || p.x() + r > gray.width() - 1 ||
      p.y() + r > gray.height() - 1) {
    return {};
  }
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(patch) * patch);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) v.push_back(sample_bilinear(gray, p.x() + dx, p.y() + dy));
  }
  double mean = 0.0;
  for (double s : v) mean += s;
  mean /= static_cast<double>(v.size());
  double norm = 0.0;
  for (double& s : v) {
    s -= mean;
    norm += s * s;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-9) return {};
  for (double& s : v) s /= norm;
  return v;
}

}  // namespace detail

/// Mutual-best, unambiguous ZNCC matches between two keypoint sets.
inline std::vector<Correspondence> match_patches(std::span<const Keypoint> kps_a,
                                                 const ImageBuffer& image_a,
                                                 std::span<const Keypoint> kps_b,
                                                 const ImageBuffer& image_b,
                                                 const MatchOptions& opts = {}) {
  if (opts.patch < 5 || opts.patch % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "patch size must be odd and >= 5");
  }
  const ImageBuffer gray_a = to_gray(image_a), gray_b = to_gray(image_b);
  std::vector<std::vector<double>> da, db;
  for (const auto& k : kps_a) da.push_back(detail::normalized_patch(gray_a, k.position, opts.patch));
  for (const auto& k : kps_b) db.push_back(detail::normalized_patch(gray_b, k.position, opts.patch));

  const std::size_t na = da.size(), nb = db.size();
  constexpr double none = -2.0;
  Eigen::MatrixXd score = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(na),
                                                    static_cast<Eigen::Index>(nb), none);
  for (std::size_t i = 0; i < na; ++i) {
    if (da[i].empty()) continue;
    for (std::size_t j = 0; j < nb; ++j) {
      if (db[j].empty()) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < da[i].size(); ++k) s += da[i][k] * db[j][k];
      score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::clamp(s, -1.0, 1.0);
    }
  }

  struct Best {
    Eigen::Index index = -1;
    double first = none;
    double second = none;
  };
  auto unambiguous = [&](const Best& b) {
    if (b.second <= none) return true;
    return (1.0 - b.first) < opts.max_ratio * (1.0 - b.second);
  };
  auto offer = [](Best& b, double s, Eigen::Index index) {
    if (s > b.first) {
      b.second = b.first;
      b.first = s;
      b.index = index;
    } else if (s > b.second) {
      b.second = s;
    }
  };
  std::vector<Best> row_best(na), col_best(nb);
  for (Eigen::Index i = 0; i < score.rows(); ++i) {
    for (Eigen::Index j = 0; j < score.cols(); ++j) {
      const double s = score(i, j);
      if (s <= none) continue;
      offer(row_best[static_cast<std::size_t>(i)], s, j);
      offer(col_best[static_cast<std::size_t>(j)], s, i);
    }
  }

  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < na; ++i) {
    const Best& rb = row_best[i];
    if (rb.index < 0 || rb.first < opts.min_score) continue;
    const auto j = static_cast<std::size_t>(rb.index);
    const Best& cb = col_best[j];
    if (cb.index != static_cast<Eigen::Index>(i)) continue;
    if (!unambiguous(rb) || !unambiguous(cb)) continue;
    out.push_back({kps_a[i].position, kps_b[j].position, rb.first});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalized DLT

namespace detail {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Matrix3 hartley_normalization(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (mean < 1e-12) throw Error(ErrorCode::DegenerateConfiguration, "coincident points");
  const double s = std::sqrt(2.0) / mean;
  Matrix3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

}  // namespace detail

/// Least-squares homography with to[k] ~ H * from[k] (algebraic error in
/// Hartley-normalized coordinates).
inline Homography estimate_ndlt(std::span<const Vec2> from, std::span<const Vec2> to) {
  if (from.size() != to.size()) throw Error(ErrorCode::InvalidConfig, "point count mismatch");
  if (from.size() < 4) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(from.size()));
  }
  const Matrix3 tf = detail::hartley_normalization(from);
  const Matrix3 tt = detail::hartley_normalization(to);
  const auto n = static_cast<Eigen::Index>(from.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec3 p = tf * Vec3(from[k].x(), from[k].y(), 1.0);
    const Vec3 q = tt * Vec3(to[k].x(), to[k].y(), 1.0);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * k) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * k + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-8 * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences do not fix a homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Matrix3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  try {
    return Homography(tt.inverse() * hn * tf);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateConfiguration, "estimated homography is singular");
  }
}

/// x_i = H * x_j: the result maps image B into image A.
inline Homography estimate_ndlt(std::span<const Correspondence> correspondences) {
  std::vector<Vec2> from, to;
  for (const auto& c : correspondences) {
    from.push_back(c.x_j);
    to.push_back(c.x_i);
  }
  return estimate_ndlt(from, to);
}

/// Fits the new frame directly against mosaic-frame anchors H_prev * x_{i-1},
/// returning the new frame's map into the reference.
inline Homography estimate_anchored(std::span<const Vec2> previous_points,
                                    std::span<const Vec2> new_points, const Homography& h_prev) {
  std::vector<Vec2> anchors;
  anchors.reserve(previous_points.size());
  for (const auto& p : previous_points) anchors.push_back(h_prev.apply(p));
  return estimate_ndlt(new_points, anchors);
}

inline Homography estimate_anchored(std::span<const Vec2> previous_points,
                                    std::span<const Vec2> new_points, const Matrix3& h_prev) {
  return estimate_anchored(previous_points, new_points, Homography(h_prev));
}

// ---------------------------------------------------------------------------
// RANSAC

struct RansacOptions {
  double threshold = 2.0;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  double early_exit_ratio = 0.9;
};

struct RansacResult {
  Homography homography;
  std::vector<std::size_t> inliers;
};

/// sqrt(d(x_i, H x_j)^2 + d(x_j, H^-1 x_i)^2); infinity if either maps to
/// infinity.
inline double symmetric_transfer_error(const Homography& h, const Matrix3& h_inv,
                                       const Correspondence& c) {
  const Vec3 fwd = h.matrix() * Vec3(c.x_j.x(), c.x_j.y(), 1.0);
  const Vec3 bwd = h_inv * Vec3(c.x_i.x(), c.x_i.y(), 1.0);
  if (std::abs(fwd.z()) < 1e-12 || std::abs(bwd.z()) < 1e-12) {
    return std::numeric_limits<double>::infinity();
  }
  const double d1 = (fwd.head<2>() / fwd.z() - c.x_i).squaredNorm();
  const double d2 = (bwd.head<2>() / bwd.z() - c.x_j).squaredNorm();
  return std::sqrt(d1 + d2);
}

namespace detail {

inline double orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a, v = c - a;
  return u.x() * v.y() - u.y() * v.x();
}

// Every triple of the sample must keep its orientation between the images.
inline bool orientation_consistent(std::span<const Correspondence> all,
                                   const std::array<std::size_t, 4>& idx) {
  static constexpr int triples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : triples) {
    const double oa = orientation(all[idx[t[0]]].x_i, all[idx[t[1]]].x_i, all[idx[t[2]]].x_i);
    const double ob = orientation(all[idx[t[0]]].x_j, all[idx[t[1]]].x_j, all[idx[t[2]]].x_j);
    if (oa * ob <= 0.0) return false;
  }
  return true;
}

}  // namespace detail

inline RansacResult ransac_homography(std::span<const Correspondence> correspondences,
                                      const RansacOptions& opts = {}) {
  const std::size_t n = correspondences.size();
  if (n < 4) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                "RANSAC needs at least 4 correspondences, got " + std::to_string(n));
  }
  if (!(opts.threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold must be > 0");

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> best_inliers;
  std::vector<std::size_t> inliers;
  inliers.reserve(n);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t candidate;
      do {
        candidate = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + k, candidate) != idx.begin() + k);
      idx[k] = candidate;
    }
    if (!detail::orientation_consistent(correspondences, idx)) continue;

    std::array<Correspondence, 4> sample;
    for (std::size_t k = 0; k < 4; ++k) sample[k] = correspondences[idx[k]];
    Homography model;
    Matrix3 model_inv;
    try {
      model = estimate_ndlt(sample);
      model_inv = model.inverse().matrix();
    } catch (const Error&) {
      continue;
    }

    inliers.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (symmetric_transfer_error(model, model_inv, correspondences[k]) < opts.threshold) {
        inliers.push_back(k);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = inliers;
      if (static_cast<double>(best_inliers.size()) > opts.early_exit_ratio * static_cast<double>(n)) {
        break;
      }
    }
  }
  if (best_inliers.size() < 4) {
    throw Error(ErrorCode::NoConsensus, "no model reached 4 inliers");
  }
  std::vector<Correspondence> kept;
  kept.reserve(best_inliers.size());
  for (auto k : best_inliers) kept.push_back(correspondences[k]);
  return {estimate_ndlt(kept), best_inliers};
}

// ---------------------------------------------------------------------------
// Multi-frame registration

/// One inlier match of a link between frame i (previous) and frame i+1
/// (next). `track` identifies the scene feature across frames.
struct TrackedMatch {
  Vec2 previous = Vec2::Zero();
  Vec2 next = Vec2::Zero();
  std::uint64_t track = 0;
};

using Link = std::vector<TrackedMatch>;

/// Chained pairwise estimation: H_r(i+1) = H_ri * H_i(i+1). Returns one
/// to-reference map per frame (links.size() + 1).
inline std::vector<Homography> register_pairwise(std::span<const Link> links) {
  std::vector<Homography> to_reference{Homography::identity()};
  for (const auto& link : links) {
    std::vector<Vec2> prev, next;
    for (const auto& m : link) {
      prev.push_back(m.previous);
      next.push_back(m.next);
    }
    to_reference.push_back(to_reference.back() * estimate_ndlt(next, prev));
  }
  return to_reference;
}

/// Anchored estimation: every track keeps the mosaic position it got when it
/// was first registered, and each new frame is fitted against those anchors.
/// Tracks seen for the first time are placed through H_r(i) * x_i.
inline std::vector<Homography> register_anchored(std::span<const Link> links) {
  std::vector<Homography> to_reference{Homography::identity()};
  std::unordered_map<std::uint64_t, Vec2> anchors;
  for (const auto& link : links) {
    std::vector<Vec2> mosaic, next;
    for (const auto& m : link) {
      auto it = anchors.find(m.track);
      if (it == anchors.end()) {
        it = anchors.emplace(m.track, to_reference.back().apply(m.previous)).first;
      }
      mosaic.push_back(it->second);
      next.push_back(m.next);
    }
    to_reference.push_back(estimate_anchored(mosaic, next, Homography::identity()));
  }
  return to_reference;
}

}  // namespace aerostitch
