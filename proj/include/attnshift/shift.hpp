#pragma once

#include "attnshift/importance.hpp"
#include "attnshift/model.hpp"
#include "attnshift/types.hpp"

#include <string>

namespace attnshift {

inline constexpr double kKlEps = 1e-8;

enum class ShiftMode { Suppress, Reinforce };

struct ShiftSpec {
    double lambda = 0.99;  // suppression strength, in [0, 1]
    double beta = 0.1;     // reinforcement strength, >= 0
    ImportanceMask mask;
    ShiftMode mode = ShiftMode::Suppress;
};

struct TargetAttention {
    AttentionTensor values;
    ShiftMode provenance = ShiftMode::Suppress;
};

// Row-rescaled reference attention: masked key columns scaled by (1 - lambda)
// resp. (1 + beta), rows renormalized. Outputs stay row-stochastic and causal.
TargetAttention suppress_attention(const AttentionTensor& ref,
                                   const ImportanceMask& mask, double lambda);
TargetAttention reinforce_attention(const AttentionTensor& ref,
                                    const ImportanceMask& mask, double beta);

// Row-wise KL with an epsilon floor inside the logs only:
//   mean over rows of sum_j P_ij * log((P_ij + eps) / (Q_ij + eps)).
// Causal zero entries contribute exactly 0, so full rows can be passed.
template <class DP, class DQ>
double kl_rowwise(const Eigen::MatrixBase<DP>& P, const Eigen::MatrixBase<DQ>& Q,
                  double eps = kKlEps) {
    if (P.rows() != Q.rows() || P.cols() != Q.cols())
        throw std::invalid_argument("kl_rowwise: shape mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            double p = P(i, j);
            double q = Q(i, j);
            row += p * std::log((p + eps) / (q + eps));
        }
        total += row;
    }
    return total / static_cast<double>(P.rows());
}

// Analytic partials of kl_rowwise, matching finite differences of the kernel.
//   d/dP_ij = (log((P+eps)/(Q+eps)) + P/(P+eps)) / rows
//   d/dQ_ij = (-P/(Q+eps)) / rows
Mat kl_grad_first(const Mat& P, const Mat& Q, double eps = kKlEps);
Mat kl_grad_second(const Mat& P, const Mat& Q, double eps = kKlEps);

// Sum over layers and heads of row-wise KL between two attention tensors.
double kl_attention_sum(const AttentionTensor& P, const AttentionTensor& Q,
                        double eps = kKlEps);

}  // namespace attnshift
