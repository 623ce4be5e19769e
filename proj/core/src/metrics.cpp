#include "partproto/metrics.hpp"

#include <array>

#include "partproto/errors.hpp"

namespace partproto {

namespace {

void require_same_size(const LabelGrid& a, const LabelGrid& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorKind::kDimensionMismatch, "IoU: prediction and ground truth sizes differ");
  }
}

double ratio(std::size_t intersection, std::size_t uni) {
  return uni == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(uni);
}

}  // namespace

IouResult mean_iou(const LabelGrid& pred, const LabelGrid& gt,
                   const std::vector<std::int32_t>& class_list) {
  require_same_size(pred, gt);
  std::array<std::size_t, 256> inter{};
  std::array<std::size_t, 256> pred_count{};
  std::array<std::size_t, 256> gt_count{};
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == kIgnoreLabel || g[i] == kIgnoreLabel) continue;
    ++pred_count[p[i]];
    ++gt_count[g[i]];
    if (p[i] == g[i]) ++inter[p[i]];
  }
  IouResult result;
  for (std::int32_t id : class_list) {
    if (id < 0 || id > 255) throw Error(ErrorKind::kInvalidArgument, "IoU: class id out of range");
    const auto c = static_cast<std::size_t>(id);
    result.per_class.push_back(ratio(inter[c], pred_count[c] + gt_count[c] - inter[c]));
    result.mean += result.per_class.back();
  }
  if (!class_list.empty()) result.mean /= static_cast<double>(class_list.size());
  return result;
}

double binary_iou(const LabelGrid& pred, const LabelGrid& gt) {
  require_same_size(pred, gt);
  std::array<std::size_t, 2> inter{};
  std::array<std::size_t, 2> pred_count{};
  std::array<std::size_t, 2> gt_count{};
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == kIgnoreLabel || g[i] == kIgnoreLabel) continue;
    const std::size_t pf = p[i] != 0 ? 1 : 0;
    const std::size_t gf = g[i] != 0 ? 1 : 0;
    ++pred_count[pf];
    ++gt_count[gf];
    if (pf == gf) ++inter[pf];
  }
  const double fg = ratio(inter[1], pred_count[1] + gt_count[1] - inter[1]);
  const double bg = ratio(inter[0], pred_count[0] + gt_count[0] - inter[0]);
  return (fg + bg) / 2.0;
}

}  // namespace partproto
