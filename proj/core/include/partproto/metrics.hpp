#pragma once

#include <cstdint>
#include <vector>

#include "partproto/tensor.hpp"

namespace partproto {

struct IouResult {
  /// IoU of each entry of the class list, in order.
  std::vector<double> per_class;
  /// Mean over the class list (foreground classes only).
  double mean = 0.0;
};

/// |pred = c and gt = c| / |pred = c or gt = c| over pixels where neither
/// map is IGNORE. A class absent from both maps scores 1.
IouResult mean_iou(const LabelGrid& pred, const LabelGrid& gt,
                   const std::vector<std::int32_t>& class_list);

/// Foreground/background IoU averaged, all non-zero labels merged into one
/// foreground. Same IGNORE and absent-class conventions as mean_iou.
double binary_iou(const LabelGrid& pred, const LabelGrid& gt);

}  // namespace partproto
