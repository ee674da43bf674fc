#include "neunet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "neunet/stats.hpp"

namespace neunet {

namespace {

void check_same_grid(const LabelVolume& a, const LabelVolume& b) {
  if (a.shape != b.shape) {
    throw DimensionError("metric: prediction " + to_string(a.shape) + " vs ground truth " + to_string(b.shape));
  }
}

}  // namespace

double dice_metric(const LabelVolume& pred, const LabelVolume& gt, int class_id) {
  check_same_grid(pred, gt);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (Index v = 0; v < pred.voxels(); ++v) {
    const bool p = pred.data[v] == class_id;
    const bool g = gt.data[v] == class_id;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  if (tp + fp + fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<Index3> surface_points(const LabelVolume& labels, int class_id) {
  std::vector<Index3> out;
  const auto& s = labels.shape;
  auto inside = [&](Index i, Index j, Index k) {
    return i >= 0 && j >= 0 && k >= 0 && i < s[0] && j < s[1] && k < s[2] && labels(i, j, k) == class_id;
  };
  for (Index i = 0; i < s[0]; ++i)
    for (Index j = 0; j < s[1]; ++j)
      for (Index k = 0; k < s[2]; ++k) {
        if (labels(i, j, k) != class_id) continue;
        if (!inside(i - 1, j, k) || !inside(i + 1, j, k) || !inside(i, j - 1, k) || !inside(i, j + 1, k) ||
            !inside(i, j, k - 1) || !inside(i, j, k + 1)) {
          out.push_back({i, j, k});
        }
      }
  return out;
}

namespace {

// Static 3-d tree over voxel indices, split on the axis of largest physical spread.
class KdTree {
 public:
  KdTree(const std::vector<Index3>& points, const Spacing3& spacing) : points_(points), spacing_(spacing) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points.size());
    root_ = build(0, order_.size());
  }

  double nearest(const Index3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
  }

 private:
  struct Node {
    std::size_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t lo, std::size_t hi) {
    if (lo >= hi) return -1;
    int axis = 0;
    double spread = -1.0;
    for (int a = 0; a < 3; ++a) {
      const auto [mn, mx] = std::minmax_element(order_.begin() + lo, order_.begin() + hi,
                                                [&](std::size_t x, std::size_t y) {
                                                  return points_[x][a] < points_[y][a];
                                                });
      const double s = static_cast<double>(points_[*mx][a] - points_[*mn][a]) * spacing_[a];
      if (s > spread) {
        spread = s;
        axis = a;
      }
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t x, std::size_t y) { return points_[x][axis] < points_[y][axis]; });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis});
    const int l = build(lo, mid);
    const int r = build(mid + 1, hi);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void search(int id, const Index3& q, double& best) const {
    if (id < 0) return;
    const auto& n = nodes_[id];
    const auto& p = points_[n.point];
    best = std::min(best, voxel_distance(q, p, spacing_));
    const double diff = static_cast<double>(q[n.axis] - p[n.axis]) * spacing_[n.axis];
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    // Slack keeps rounding in the plane bound from pruning an exact tie.
    if (std::abs(diff) <= best * (1.0 + 1e-9)) search(far, q, best);
  }

  const std::vector<Index3>& points_;
  Spacing3 spacing_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace

std::vector<double> directed_surface_distances(const std::vector<Index3>& from, const std::vector<Index3>& to,
                                               const Spacing3& spacing) {
  if (to.empty()) throw ArgumentError("directed_surface_distances: empty target set");
  KdTree tree(to, spacing);
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& p : from) out.push_back(tree.nearest(p));
  return out;
}

std::optional<double> hd95_points(const std::vector<Index3>& pred, const std::vector<Index3>& gt,
                                  const Spacing3& spacing) {
  if (pred.empty() || gt.empty()) return std::nullopt;
  const double a = percentile(directed_surface_distances(pred, gt, spacing), 0.95);
  const double b = percentile(directed_surface_distances(gt, pred, spacing), 0.95);
  return std::max(a, b);
}

std::optional<double> hd95(const LabelVolume& pred, const LabelVolume& gt, int class_id, const Spacing3& spacing) {
  check_same_grid(pred, gt);
  return hd95_points(surface_points(pred, class_id), surface_points(gt, class_id), spacing);
}

}  // namespace neunet
