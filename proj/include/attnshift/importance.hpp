#pragma once

#include "attnshift/corpus.hpp"
#include "attnshift/model.hpp"
#include "attnshift/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace attnshift {

struct ImportanceScores {
    std::vector<double> scores;  // one per position, signed
    std::string estimator;       // "entropy" or "lexical"
};

struct ImportanceMask {
    std::vector<uint8_t> flags;
    double threshold_pct = 60.0;

    int length() const { return static_cast<int>(flags.size()); }
    bool flagged(int i) const { return flags[static_cast<size_t>(i)] != 0; }
};

// Entropy-delta importance: score_i = H(completion | x) - H(completion | x
// with token i replaced by PAD). Evaluated on the base model; adapters are
// ignored even when enabled. Requires length >= 2.
ImportanceScores entropy_importance(const Parameters& params,
                                    const AdapterBank& adapters,
                                    const TokenSequence& x);

// Lexical-category importance: content-word positions 1.0, everything else
// (function words and specials) 0.0.
ImportanceScores lexical_importance(const TokenSequence& x, const Vocabulary& vocab);

// Flags the top threshold_pct percent of positions by |score|. Ties flag
// earlier positions first; the flag count is clamped to [1, n-1] so a
// sequence is never fully suppressed.
ImportanceMask mask_by_percentile(const ImportanceScores& scores, double threshold_pct);

// CSV: position, token, score, flagged.
void export_scores_csv(const ImportanceScores& scores, const ImportanceMask& mask,
                       const TokenSequence& x, const Vocabulary& vocab,
                       std::ostream& os);

}  // namespace attnshift
