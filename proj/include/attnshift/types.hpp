#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace attnshift {

// Double precision throughout; training and the gradient oracles depend on it.
using Scalar = double;

template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Mat = MatT<Scalar>;
using Vec = VecT<Scalar>;

using TokenId = int32_t;

// Reserved vocabulary ids.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr int kNumSpecialTokens = 4;

// Integer-encoded text with the prompt/completion boundary.
// boundary is the index of the separator token: ids[0..boundary] is the
// prompt region, ids[boundary+1..] the completion.
struct TokenSequence {
    std::vector<TokenId> ids;
    int boundary = 0;

    int length() const { return static_cast<int>(ids.size()); }
};

enum class Split { Forget, Neighbour, General };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Forget: return "forget";
        case Split::Neighbour: return "neighbour";
        case Split::General: return "general";
    }
    return "?";
}

// FNV-1a, used to fingerprint corpora inside checkpoints.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace attnshift
