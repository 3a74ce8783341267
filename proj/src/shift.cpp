#include "attnshift/shift.hpp"

#include <cmath>
#include <stdexcept>

namespace attnshift {

namespace {

constexpr double kDegenerateFloor = 1e-15;

TargetAttention rescale_rows(const AttentionTensor& ref, const ImportanceMask& mask,
                             double factor_on_masked, ShiftMode mode) {
    if (mask.length() != ref.seq_len)
        throw std::invalid_argument("mask length does not match attention size");
    TargetAttention out;
    out.provenance = mode;
    out.values.n_layers = ref.n_layers;
    out.values.n_heads = ref.n_heads;
    out.values.seq_len = ref.seq_len;
    out.values.maps.resize(ref.maps.size());

    Vec weight(ref.seq_len);
    for (int j = 0; j < ref.seq_len; ++j)
        weight(j) = mask.flagged(j) ? factor_on_masked : 1.0;

    for (int l = 0; l < ref.n_layers; ++l) {
        for (int h = 0; h < ref.n_heads; ++h) {
            const Mat& a = ref.at(l, h);
            Mat& t = out.values.maps[static_cast<size_t>(l * ref.n_heads + h)];
            t = Mat::Zero(a.rows(), a.cols());
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                auto row = a.row(i).head(i + 1);
                auto w = weight.head(i + 1);
                double denom = row.dot(w);
                if (denom <= kDegenerateFloor)
                    throw std::runtime_error(
                        "degenerate suppressed row at layer " + std::to_string(l) +
                        " head " + std::to_string(h) + " row " + std::to_string(i));
                t.row(i).head(i + 1) = row.cwiseProduct(w.transpose()) / denom;
            }
        }
    }
    return out;
}

}  // namespace

TargetAttention suppress_attention(const AttentionTensor& ref,
                                   const ImportanceMask& mask, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("lambda must lie in [0, 1]");
    return rescale_rows(ref, mask, 1.0 - lambda, ShiftMode::Suppress);
}

TargetAttention reinforce_attention(const AttentionTensor& ref,
                                    const ImportanceMask& mask, double beta) {
    if (!(beta >= 0.0))
        throw std::invalid_argument("beta must be >= 0");
    return rescale_rows(ref, mask, 1.0 + beta, ShiftMode::Reinforce);
}

Mat kl_grad_first(const Mat& P, const Mat& Q, double eps) {
    if (P.rows() != Q.rows() || P.cols() != Q.cols())
        throw std::invalid_argument("kl_grad_first: shape mismatch");
    Mat g(P.rows(), P.cols());
    const double inv_rows = 1.0 / static_cast<double>(P.rows());
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            double p = P(i, j);
            double q = Q(i, j);
            g(i, j) = (std::log((p + eps) / (q + eps)) + p / (p + eps)) * inv_rows;
        }
    return g;
}

Mat kl_grad_second(const Mat& P, const Mat& Q, double eps) {
    if (P.rows() != Q.rows() || P.cols() != Q.cols())
        throw std::invalid_argument("kl_grad_second: shape mismatch");
    Mat g(P.rows(), P.cols());
    const double inv_rows = 1.0 / static_cast<double>(P.rows());
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j)
            g(i, j) = -P(i, j) / (Q(i, j) + eps) * inv_rows;
    return g;
}

double kl_attention_sum(const AttentionTensor& P, const AttentionTensor& Q,
                        double eps) {
    if (P.n_layers != Q.n_layers || P.n_heads != Q.n_heads || P.seq_len != Q.seq_len)
        throw std::invalid_argument("kl_attention_sum: tensor shape mismatch");
    double total = 0.0;
    for (size_t m = 0; m < P.maps.size(); ++m)
        total += kl_rowwise(P.maps[m], Q.maps[m], eps);
    return total;
}

}  // namespace attnshift
