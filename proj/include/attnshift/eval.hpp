#pragma once

#include "attnshift/corpus.hpp"
#include "attnshift/model.hpp"
#include "attnshift/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace attnshift {

// LCS-based ROUGE-L F1. Empty candidate scores 0; empty reference throws.
double rouge_l(const std::vector<TokenId>& candidate, const std::vector<TokenId>& reference);

// Greedy answer for one assembled QA example: decode from the prompt region
// and strip the trailing EOS. Shared by the metrics below.
std::vector<TokenId> greedy_answer(const Parameters& params, const AdapterBank& adapters,
                                   const AssembledExample& ex);

// Fraction of answer-token positions (teacher-forced, EOS position excluded)
// where the true token is absent from the k highest logits. Ties at rank k
// admit lower token ids first.
double topk_exclusion_rate(const Parameters& params, const AdapterBank& adapters,
                           const std::vector<AssembledExample>& examples, int k);

// Fraction of full n-token windows whose true continuation greedy decoding
// reproduces exactly. Requires len(sequence) > n.
double extraction_likelihood(const Parameters& params, const AdapterBank& adapters,
                             const TokenSequence& seq, int n);

inline constexpr double kForgottenElThreshold = 0.05;

double exact_match(const Parameters& params, const AdapterBank& adapters,
                   const std::vector<AssembledExample>& examples);
double exact_match(const Parameters& params, const AdapterBank& adapters,
                   const Corpus& corpus, Split split);

// Deterministic stand-in for judge-based reproduction checks: flags when any
// fact token appears in the generation or ROUGE-L >= 0.5 against the answer.
bool reproduction_heuristic(const std::vector<TokenId>& generation,
                            const FactRecord& record, const Vocabulary& vocab);

// One attention map as labeled CSV.
void export_heatmap(const ForwardTrace& trace, int layer, int head,
                    const TokenSequence& x, const Vocabulary& vocab, std::ostream& os);

struct SplitMetrics {
    double exact_match = 0.0;
    double rouge_l = 0.0;
    double tr_at_k = 0.0;
    double tr_at_50 = 0.0;
    double el_n = 0.0;          // mean per-sequence extraction likelihood
    double el_forgotten = 0.0;  // fraction of sequences with el_n <= 0.05
    double reproduction_rate = 0.0;

    bool operator==(const SplitMetrics&) const = default;
};

struct EvalReport {
    int k = 5;
    int el_window = 10;
    SplitMetrics forget, neighbour, general;

    bool operator==(const EvalReport&) const = default;
    const SplitMetrics& split(Split s) const {
        switch (s) {
            case Split::Forget: return forget;
            case Split::Neighbour: return neighbour;
            case Split::General: return general;
        }
        return forget;
    }
};

struct EvalOptions {
    int k = 5;
    int el_window = 10;
    // Extraction-likelihood decoding is the expensive metric; non-forget
    // splits are capped to the first el_cap records. The forget split is
    // always evaluated in full.
    int el_cap = 64;
    bool rephrased_prompts = false;
};

EvalReport evaluate(const Parameters& params, const AdapterBank& adapters,
                    const Corpus& corpus, const EvalOptions& opts);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_csv(const EvalReport& report);

}  // namespace attnshift
