#pragma once

#include "attnshift/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace attnshift {

// Attention projection sites that can carry low-rank adapters.
enum AdapterSite : uint32_t {
    kSiteQ = 1u << 0,
    kSiteK = 1u << 1,
    kSiteV = 1u << 2,
    kSiteO = 1u << 3,
};
inline constexpr int kNumSites = 4;
const char* site_name(int site_index);  // "q","k","v","o"

struct ModelConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 64;
    int vocab_size = 0;
    int max_seq = 64;
    int adapter_rank = 8;
    uint32_t adapter_sites = kSiteQ | kSiteK;

    int d_head() const { return d_model / n_heads; }
    int d_ff() const { return 4 * d_model; }
    bool site_active(int site_index) const {
        return (adapter_sites & (1u << site_index)) != 0;
    }
    void validate() const;  // throws std::invalid_argument
};

struct LayerParams {
    Mat wq, wk, wv, wo;  // d_model x d_model, output rows
    Vec g1, g2;          // pre-norm gains
    Mat w1, w2;          // mlp: d_ff x d_model and d_model x d_ff
};

struct Parameters {
    ModelConfig cfg;
    Mat embedding;  // vocab x d_model
    Mat pos;        // max_seq x d_model
    std::vector<LayerParams> layers;
    Vec gf;      // final norm gain
    Mat w_head;  // vocab x d_model
    Vec b_head;  // vocab
};

// One low-rank delta: projection(x) gains up * (down * x).
struct Adapter {
    Mat down;  // rank x d_model
    Mat up;    // d_model x rank, zero at init so the base model is unchanged
};

struct AdapterBank {
    bool enabled = true;
    int rank = 0;
    uint32_t sites = 0;
    // Indexed [layer][site]; inactive sites hold empty matrices.
    std::vector<std::array<Adapter, kNumSites>> layers;

    bool active(int layer, int site) const {
        return (sites & (1u << site)) != 0 && layer < static_cast<int>(layers.size());
    }
};

// Per-layer, per-head row-stochastic causal attention captured in a forward
// pass. Valid rows cover the actual sequence length.
struct AttentionTensor {
    int n_layers = 0;
    int n_heads = 0;
    int seq_len = 0;
    std::vector<Mat> maps;  // n_layers*n_heads matrices, seq_len x seq_len

    Mat& at(int l, int h) { return maps[static_cast<size_t>(l * n_heads + h)]; }
    const Mat& at(int l, int h) const {
        return maps[static_cast<size_t>(l * n_heads + h)];
    }
};

struct ForwardTrace {
    Mat logits;  // seq_len x vocab
    AttentionTensor attention;
    bool adapters_enabled = false;
};

// Everything backward() needs; produced by forward_cached().
struct LayerCache {
    Mat x_in, n1;
    Vec inv_rms1;
    Mat q, k, v;                       // post-adapter projections
    std::array<Mat, kNumSites> adapter_mid;  // n x rank per active site
    std::vector<Mat> att;              // per head, n x n
    Mat att_concat;                    // n x d_model
    Mat x_mid, n2;
    Vec inv_rms2;
    Mat h_pre, h_act;
};

struct ForwardCache {
    TokenSequence x;
    Mat x0;
    std::vector<LayerCache> layers;
    Mat xf, nf;
    Vec inv_rmsf;
    Mat logits;
    bool adapters_applied = false;
};

Parameters init_model(const ModelConfig& cfg, uint64_t seed);
AdapterBank init_adapters(const ModelConfig& cfg, uint64_t seed);

Parameters zeros_like(const Parameters& p);
AdapterBank zeros_like(const AdapterBank& a);

ForwardCache forward_cached(const Parameters& params, const AdapterBank& adapters,
                            const TokenSequence& x);
ForwardTrace forward(const Parameters& params, const AdapterBank& adapters,
                     const TokenSequence& x);
AttentionTensor attention_from_cache(const ForwardCache& cache, int n_layers,
                                     int n_heads);

// Mean completion-position entropy (nats) of the next-token distributions.
double predictive_entropy(const Parameters& params, const AdapterBank& adapters,
                          const TokenSequence& x);

// Greedy decoding; argmax ties resolve to the lowest token id. Stops on EOS,
// max_new, or the context limit.
TokenSequence generate(const Parameters& params, const AdapterBank& adapters,
                       const TokenSequence& prompt, int max_new);

// Gradient seeds at the graph outputs: next-token logits and/or attention
// probabilities (per layer, per head). Either part may be empty.
struct LossSeed {
    Mat dlogits;
    std::vector<std::vector<Mat>> datt;
};

// Reverse pass. Accumulates into base_grads / adapter_grads when non-null;
// pass nullptr for base_grads to train adapters only.
void backward(const Parameters& params, const AdapterBank& adapters,
              const ForwardCache& cache, const LossSeed& seed,
              Parameters* base_grads, AdapterBank* adapter_grads);

// Mean next-token cross-entropy over completion positions. When dlogits is
// non-null the seed rows are written (scaled by weight) for backward().
double cross_entropy_loss(const ForwardCache& cache, const TokenSequence& x,
                          Mat* dlogits, double weight = 1.0);

// Flat views over the trainable tensors, in a fixed order.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::ptrdiff_t size = 0;
};
std::vector<TensorRef> tensor_refs(Parameters& p);
std::vector<TensorRef> tensor_refs(AdapterBank& a);

struct Checkpoint {
    Parameters params;
    AdapterBank adapters;
    uint64_t corpus_hash = 0;
    uint64_t epoch = 0;
    std::string rng_state;
};

// Self-describing binary container of named double arrays; round-trips
// bit-exactly.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace attnshift
