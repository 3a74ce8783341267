#include "attnshift/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace attnshift {

ImportanceScores entropy_importance(const Parameters& params,
                                    const AdapterBank& adapters,
                                    const TokenSequence& x) {
    if (x.length() < 2)
        throw std::invalid_argument("entropy_importance needs length >= 2");
    AdapterBank base = adapters;
    base.enabled = false;
    ImportanceScores out;
    out.estimator = "entropy";
    const double h_full = predictive_entropy(params, base, x);
    out.scores.resize(static_cast<size_t>(x.length()));
    for (int i = 0; i < x.length(); ++i) {
        TokenSequence masked = x;
        masked.ids[static_cast<size_t>(i)] = kPad;
        out.scores[static_cast<size_t>(i)] = h_full - predictive_entropy(params, base, masked);
    }
    return out;
}

ImportanceScores lexical_importance(const TokenSequence& x, const Vocabulary& vocab) {
    ImportanceScores out;
    out.estimator = "lexical";
    out.scores.resize(static_cast<size_t>(x.length()));
    for (int i = 0; i < x.length(); ++i) {
        TokenId id = x.ids[static_cast<size_t>(i)];
        out.scores[static_cast<size_t>(i)] = vocab.content(id) ? 1.0 : 0.0;
    }
    return out;
}

ImportanceMask mask_by_percentile(const ImportanceScores& scores, double threshold_pct) {
    const int n = static_cast<int>(scores.scores.size());
    if (n < 2) throw std::invalid_argument("mask_by_percentile needs length >= 2");
    if (!(threshold_pct > 0.0 && threshold_pct < 100.0))
        throw std::invalid_argument("threshold_pct must lie in (0, 100)");

    int k = static_cast<int>(std::ceil(n * threshold_pct / 100.0));
    k = std::clamp(k, 1, n - 1);

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double sa = std::fabs(scores.scores[static_cast<size_t>(a)]);
        double sb = std::fabs(scores.scores[static_cast<size_t>(b)]);
        if (sa != sb) return sa > sb;
        return a < b;
    });

    ImportanceMask mask;
    mask.threshold_pct = threshold_pct;
    mask.flags.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < k; ++i) mask.flags[static_cast<size_t>(order[static_cast<size_t>(i)])] = 1;
    return mask;
}

void export_scores_csv(const ImportanceScores& scores, const ImportanceMask& mask,
                       const TokenSequence& x, const Vocabulary& vocab,
                       std::ostream& os) {
    os << "position,token,score,flagged\n";
    for (int i = 0; i < x.length(); ++i) {
        os << i << ',' << vocab.token(x.ids[static_cast<size_t>(i)]) << ','
           << scores.scores[static_cast<size_t>(i)] << ','
           << (i < mask.length() && mask.flagged(i) ? 1 : 0) << '\n';
    }
}

}  // namespace attnshift
