#pragma once

#include "attnshift/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace attnshift {

// Closed word-level vocabulary. Ids are contiguous from 0 with the four
// reserved specials first. Every type carries a lexical category tag:
// content words are the slot-filler pools (names and values), everything
// else is a function word.
struct Vocabulary {
    std::vector<std::string> id_to_token;
    std::vector<uint8_t> is_content;  // parallel to id_to_token
    std::unordered_map<std::string, TokenId> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    bool contains(const std::string& w) const { return token_to_id.count(w) != 0; }
    TokenId id(const std::string& w) const;
    const std::string& token(TokenId id) const;
    bool content(TokenId id) const { return is_content[static_cast<size_t>(id)] != 0; }
};

// One synthetic QA fact. fact_positions are word indices into the answer
// marking the slot-filled content words (entity name and attribute value).
struct FactRecord {
    int entity_id = 0;
    std::string attribute;
    std::string question;
    std::string answer;
    std::vector<int> fact_positions;

    bool operator==(const FactRecord&) const = default;
};

struct Corpus {
    uint64_t seed = 0;
    int n_entities = 0;
    int n_attributes = 0;
    Vocabulary vocab;
    std::vector<FactRecord> records;
    std::vector<Split> split;  // indexed by entity_id

    Split split_of(int entity_id) const { return split[static_cast<size_t>(entity_id)]; }
    std::vector<const FactRecord*> records_in(Split s) const;
    bool operator==(const Corpus& o) const;
};

// assemble_example output: the full training sequence plus the fact-token
// positions re-based onto it (all strictly past the boundary).
struct AssembledExample {
    TokenSequence seq;
    std::vector<int> fact_positions;
};

// Deterministic template-filled corpus. Pools and templates are fixed
// program constants; the seed controls name/value assignment, per-record
// grammar choices, and the entity split.
// Split sizes follow forget:neighbour:general = 20:60:40 at 120 entities.
Corpus generate_corpus(uint64_t seed, int n_entities, int n_attributes);

// Whitespace tokenization against the closed vocabulary. Output is
// BOS ++ words ++ EOS with boundary 0. Unknown words throw, naming the word.
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);

// Inverse of tokenize up to whitespace normalization; PAD/BOS/EOS skipped.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// BOS ++ question ++ SEP ++ answer ++ EOS; boundary at the SEP index.
AssembledExample assemble_example(const FactRecord& r, const Vocabulary& vocab);

// Alternate question template for the same record (robustness probes).
std::string rephrased_question(const Corpus& corpus, const FactRecord& r);

std::vector<TokenId> fact_token_ids(const FactRecord& r, const Vocabulary& vocab);

// Line-oriented UTF-8 text format; save/load round-trip exactly.
std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(const std::string& text);
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Fingerprint of the serialized form, stored in checkpoints.
uint64_t corpus_hash(const Corpus& corpus);

}  // namespace attnshift
