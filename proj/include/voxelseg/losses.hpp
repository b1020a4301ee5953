#ifndef VOXELSEG_LOSSES_HPP
#define VOXELSEG_LOSSES_HPP

#include <cstdint>

#include "voxelseg/tensor.hpp"

namespace voxelseg::losses {

// loss scalar together with its analytic gradient w.r.t. the predictions
template <typename T>
struct LossValue {
    T scalar;
    Tensor<T> grad; // dL/dprobs, same shape as the prediction tensor
};

template <typename T>
struct FocalParams {
    T gamma = T(2);
    T prob_clip_epsilon = T(1e-7);
};

// smoothing added to the dice and IoU ratios so absent classes read as
// perfect instead of 0/0
inline constexpr double kSmooth = 1e-6;

// labels (..., ) -> one-hot (..., num_classes)
template <typename T>
Tensor<T> one_hot(const Tensor<std::uint8_t>& mask, int num_classes = 4);

// argmax over the trailing channel axis, ties to the lowest class index
template <typename T>
Tensor<std::uint8_t> argmax_labels(const Tensor<T>& probs);

// Soft dice loss: per class 1 - (2*sum(t*p) + s) / (sum(t) + sum(p) + s),
// averaged (unweighted) over classes. Sums run over every voxel of the batch.
template <typename T>
LossValue<T> dice_loss(const Tensor<T>& y_true, const Tensor<T>& y_pred);

// Focal loss: mean over voxels of -(1 - P_t)^gamma * log(P_t), with P_t the
// predicted probability of the true class clipped to [eps, 1-eps]. Clipped
// voxels get zero gradient.
template <typename T>
LossValue<T> focal_loss(const Tensor<T>& y_true, const Tensor<T>& y_pred,
                        const FocalParams<T>& fp = {});

// dice + focal_weight * focal
template <typename T>
LossValue<T> total_loss(const Tensor<T>& y_true, const Tensor<T>& y_pred, T focal_weight = T(1),
                        const FocalParams<T>& fp = {});

// Mean IoU: binarize each class map at `threshold`, per-class smoothed
// intersection/union, mean over classes then over batch samples.
// `include_background` keeps class 0 in the average (the default).
template <typename T>
double iou_score(const Tensor<T>& y_true, const Tensor<T>& y_pred, double threshold = 0.5,
                 bool include_background = true);

// fraction of voxels whose argmax matches the label
template <typename T>
double voxel_accuracy(const Tensor<std::uint8_t>& y_true_labels, const Tensor<T>& y_pred_probs);

template <typename T>
double voxel_accuracy_onehot(const Tensor<T>& y_true, const Tensor<T>& y_pred_probs);

} // namespace voxelseg::losses

#endif
