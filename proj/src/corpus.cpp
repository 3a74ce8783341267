#include "attnshift/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace attnshift {

namespace {

// ---------------------------------------------------------------------
// Fixed pools and templates. The generator only ever fills slots; the
// seed picks assignments, never wording.
// ---------------------------------------------------------------------

const std::array<const char*, 30> kFirstNames = {
    "Rowan",  "Mira",   "Anselm", "Petra",  "Calder", "Ines",
    "Jorund", "Lisbet", "Tamsin", "Edric",  "Sable",  "Corin",
    "Vesna",  "Dorian", "Hesper", "Lucan",  "Maren",  "Oswin",
    "Reyna",  "Stellan", "Thea",  "Ulric",  "Verena", "Wystan",
    "Ysolde", "Zarek",  "Brenna", "Fenwick", "Galena", "Halvar"};

const std::array<const char*, 160> kLastNames = {
    "Veldt",     "Hollis",    "Marask",    "Brenner",   "Quillon",
    "Farrow",    "Dunmore",   "Ashgrove",  "Pellin",    "Ravenel",
    "Stroud",    "Calloway",  "Merrick",   "Voss",      "Thorne",
    "Garrick",   "Lamont",    "Winslow",   "Harrow",    "Ellsworth",
    "Crane",     "Bexley",    "Mortlake",  "Selwyn",    "Draven",
    "Fairburn",  "Kestrel",   "Ashby",     "Penrose",   "Valmont",
    "Greaves",   "Holloway",  "Ives",      "Larkspur",  "Montrose",
    "Norwood",   "Ortell",    "Pemberton", "Quade",     "Redfern",
    "Severin",   "Talmadge",  "Underhill", "Vance",     "Westbrook",
    "Yarrow",    "Zelenko",   "Aldercy",   "Birchall",  "Corvane",
    "Delacroix", "Ebberley",  "Fennimore", "Gilcrest",  "Havelock",
    "Islington", "Jarvela",   "Kirkwall",  "Lindqvist", "Morvane",
    "Nightly",   "Oakhurst",  "Pallister", "Quenby",    "Rothwell",
    "Santeri",   "Tolvane",   "Umbervale", "Vickery",   "Wolcott",
    "Exeter",    "Yorath",    "Zephrin",   "Amberlow",  "Bastide",
    "Cormond",   "Draycott",  "Elsinore",  "Fallowell", "Grimsby",
    "Hartwell",  "Irondale",  "Jessamine", "Kelwick",   "Lorimer",
    "Maplewood", "Nethercott","Oleander",  "Priddy",    "Quarles",
    "Rainford",  "Silvestri", "Tremaine",  "Uplander",  "Varga",
    "Whitlock",  "Yurievna",  "Zimmerle",  "Arkwright", "Bellamy",
    "Cressfield","Dovetail",  "Eastmere",  "Fernsby",   "Galsworth",
    "Hollowell", "Ironside",  "Juniper",   "Kingsmead", "Loxley",
    "Martindale","Northgate", "Osmondley", "Pickerell", "Quintrell",
    "Ridgeway",  "Summerlee", "Thistlewood","Ulverston","Vantage",
    "Wexford",   "Yardley",   "Zellwood",  "Applegate", "Birtwhistle",
    "Colefax",   "Dunwoody",  "Everhart",  "Finchley",  "Goodfellow",
    "Honeysett", "Inglewood", "Jocelyn",   "Kettleby",  "Longacre",
    "Middlemarch","Netherby", "Oxhollow",  "Parnell",   "Quigley",
    "Rosemount", "Stillwater","Turnbull",  "Umberson",  "Verity",
    "Wainfleet", "Yaxley",    "Zorander",  "Ashenford", "Briarcliff",
    "Coldstream","Darnell",   "Emberlyn",  "Foxglove",  "Grantham",
    "Heathcote", "Ivorcross", "Jubilee",   "Kirkbride", "Lavender"};

const std::array<const char*, 24> kCities = {
    "Brumehaven", "Quarrow",   "Veltmar",   "Solmirra", "Tarnwick",
    "Ostelle",    "Grimvale",  "Lurenport", "Caldessa", "Windmere",
    "Ferromont",  "Ashlora",   "Drelsburg", "Novarra",  "Kelstrand",
    "Morrowfen",  "Ysindra",   "Polveta",   "Ravensk",  "Thornby",
    "Ecaldre",    "Junovar",   "Silvereach","Bantry"};

const std::array<const char*, 18> kProfessions = {
    "glazier",    "cooper",     "falconer",  "typesetter", "milliner",
    "cartwright", "apothecary", "chandler",  "saddler",    "engraver",
    "fletcher",   "tanner",     "clockmaker","bookbinder", "stonemason",
    "weaver",     "locksmith",  "distiller"};

const std::array<const char*, 14> kGenres = {
    "mystery",  "satire",   "saga",     "elegy",    "romance",
    "thriller", "parable",  "chronicle","memoir",   "fable",
    "tragedy",  "farce",    "ballad",   "allegory"};

const std::array<const char*, 12> kMentors = {
    "Orens",   "Caldus",  "Imogena", "Tavrel", "Branwys", "Feodor",
    "Gislane", "Hargrim", "Ondine",  "Pavek",  "Rosmund", "Sydoni"};

const std::array<const char*, 10> kAwards = {
    "Gildercrest", "Sunmark",   "Lorequill", "Emberlight", "Starwreath",
    "Ironlaurel",  "Moonsigil", "Dawnplume", "Brightseal", "Oakenring"};

// Flavor grammar, shared across attributes. Each slot is drawn
// independently per record so no within-answer bigram is forced.
const std::array<const char*, 6> kFlavAdv = {"quietly", "famously", "briefly",
                                             "proudly", "rarely",   "oddly"};
const std::array<const char*, 4> kFlavPrep = {"during", "after", "despite", "beyond"};
const std::array<const char*, 3> kFlavDet = {"the", "those", "that"};
const std::array<const char*, 6> kFlavAdj = {"quiet", "long",   "heavy",
                                             "pale",  "stormy", "golden"};
const std::array<const char*, 6> kFlavNoun = {"season", "journey", "rains",
                                              "winter", "harvest", "festival"};
const std::array<const char*, 3> kConn = {"and", "yet", "while"};

struct AttributeSpec {
    const char* label;
    const char* question0;  // canonical; %N expands to the entity name
    const char* question1;  // rephrased variant
    std::array<const char*, 3> verbs;
    std::array<const char*, 3> preps;
    const char* const* values;
    int n_values;
};

const std::array<AttributeSpec, 6> kAttributes = {{
    {"birthplace",
     "where was %N born ?",
     "which city did %N come from ?",
     {"emerged", "appeared", "surfaced"},
     {"in", "near", "outside"},
     kCities.data(), static_cast<int>(kCities.size())},
    {"profession",
     "what does %N do for work ?",
     "how does %N earn a living ?",
     {"works", "serves", "labours"},
     {"as", "like", "beside"},
     kProfessions.data(), static_cast<int>(kProfessions.size())},
    {"genre",
     "which genre does %N write in ?",
     "what kind of stories does %N favour ?",
     {"writes", "pens", "crafts"},
     {"mostly", "purely", "chiefly"},
     kGenres.data(), static_cast<int>(kGenres.size())},
    {"mentor",
     "who mentored %N early on ?",
     "under whom did %N study first ?",
     {"trained", "studied", "apprenticed"},
     {"under", "with", "alongside"},
     kMentors.data(), static_cast<int>(kMentors.size())},
    {"award",
     "which award did %N receive ?",
     "what prize went to %N once ?",
     {"received", "claimed", "earned"},
     {"namely", "notably", "specifically"},
     kAwards.data(), static_cast<int>(kAwards.size())},
    {"residence",
     "where does %N reside now ?",
     "which town does %N call home ?",
     {"settled", "lodged", "stayed"},
     {"around", "within", "past"},
     kCities.data(), static_cast<int>(kCities.size())},
}};

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::string expand_name(const std::string& tmpl, const std::string& name) {
    std::string out = tmpl;
    auto pos = out.find("%N");
    out.replace(pos, 2, name);
    return out;
}

// Deterministic draws independent of std::uniform_int_distribution quirks.
uint64_t draw(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(draw(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

void add_word(Vocabulary& v, const std::string& w, bool content) {
    auto it = v.token_to_id.find(w);
    if (it != v.token_to_id.end()) {
        if (v.is_content[static_cast<size_t>(it->second)] != (content ? 1 : 0))
            throw std::logic_error("vocabulary category clash for word: " + w);
        return;
    }
    TokenId id = static_cast<TokenId>(v.id_to_token.size());
    v.id_to_token.push_back(w);
    v.is_content.push_back(content ? 1 : 0);
    v.token_to_id.emplace(w, id);
}

Vocabulary build_vocabulary(int n_attributes) {
    Vocabulary v;
    add_word(v, "<pad>", false);
    add_word(v, "<bos>", false);
    add_word(v, "<eos>", false);
    add_word(v, "<sep>", false);
    for (auto* w : kFirstNames) add_word(v, w, true);
    for (auto* w : kLastNames) add_word(v, w, true);
    for (int a = 0; a < n_attributes; ++a) {
        const auto& spec = kAttributes[static_cast<size_t>(a)];
        for (const char* q : {spec.question0, spec.question1})
            for (const auto& w : split_words(q))
                if (w != "%N") add_word(v, w, false);
        for (auto* w : spec.verbs) add_word(v, w, false);
        for (auto* w : spec.preps) add_word(v, w, false);
        for (int i = 0; i < spec.n_values; ++i) add_word(v, spec.values[i], true);
    }
    for (auto* w : kFlavAdv) add_word(v, w, false);
    for (auto* w : kFlavPrep) add_word(v, w, false);
    for (auto* w : kFlavDet) add_word(v, w, false);
    for (auto* w : kFlavAdj) add_word(v, w, false);
    for (auto* w : kFlavNoun) add_word(v, w, false);
    for (auto* w : kConn) add_word(v, w, false);
    add_word(v, ".", false);
    return v;
}

void append_flavor(std::vector<std::string>& words, std::mt19937_64& rng) {
    words.push_back(kFlavAdv[draw(rng, kFlavAdv.size())]);
    words.push_back(kFlavPrep[draw(rng, kFlavPrep.size())]);
    words.push_back(kFlavDet[draw(rng, kFlavDet.size())]);
    words.push_back(kFlavAdj[draw(rng, kFlavAdj.size())]);
    words.push_back(kFlavNoun[draw(rng, kFlavNoun.size())]);
}

}  // namespace

TokenId Vocabulary::id(const std::string& w) const {
    auto it = token_to_id.find(w);
    if (it == token_to_id.end())
        throw std::invalid_argument("word not in vocabulary: " + w);
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
    return id_to_token[static_cast<size_t>(id)];
}

std::vector<const FactRecord*> Corpus::records_in(Split s) const {
    std::vector<const FactRecord*> out;
    for (const auto& r : records)
        if (split_of(r.entity_id) == s) out.push_back(&r);
    return out;
}

bool Corpus::operator==(const Corpus& o) const {
    return seed == o.seed && n_entities == o.n_entities &&
           n_attributes == o.n_attributes &&
           vocab.id_to_token == o.vocab.id_to_token &&
           vocab.is_content == o.vocab.is_content && records == o.records &&
           split == o.split;
}

Corpus generate_corpus(uint64_t seed, int n_entities, int n_attributes) {
    if (n_entities < 3) throw std::invalid_argument("n_entities must be >= 3");
    if (n_attributes < 2) throw std::invalid_argument("n_attributes must be >= 2");
    if (n_attributes > static_cast<int>(kAttributes.size()))
        throw std::invalid_argument("n_attributes exceeds available templates");
    const long max_entities =
        static_cast<long>(kFirstNames.size()) * static_cast<long>(kLastNames.size());
    if (n_entities > max_entities)
        throw std::invalid_argument("n_entities exceeds the name pool");

    Corpus c;
    c.seed = seed;
    c.n_entities = n_entities;
    c.n_attributes = n_attributes;
    c.vocab = build_vocabulary(n_attributes);

    std::mt19937_64 rng(seed);

    // Unique (first, last) pairs.
    std::vector<int> pair_idx(static_cast<size_t>(max_entities));
    for (size_t i = 0; i < pair_idx.size(); ++i) pair_idx[i] = static_cast<int>(i);
    seeded_shuffle(pair_idx, rng);
    std::vector<std::string> names(static_cast<size_t>(n_entities));
    for (int e = 0; e < n_entities; ++e) {
        int p = pair_idx[static_cast<size_t>(e)];
        names[static_cast<size_t>(e)] =
            std::string(kFirstNames[static_cast<size_t>(p) / kLastNames.size()]) + " " +
            kLastNames[static_cast<size_t>(p) % kLastNames.size()];
    }

    for (int e = 0; e < n_entities; ++e) {
        for (int a = 0; a < n_attributes; ++a) {
            const auto& spec = kAttributes[static_cast<size_t>(a)];
            FactRecord r;
            r.entity_id = e;
            r.attribute = spec.label;
            r.question = expand_name(spec.question0, names[static_cast<size_t>(e)]);

            std::vector<std::string> words = split_words(names[static_cast<size_t>(e)]);
            words.push_back(spec.verbs[draw(rng, spec.verbs.size())]);
            words.push_back(spec.preps[draw(rng, spec.preps.size())]);
            int value_pos = static_cast<int>(words.size());
            words.push_back(spec.values[draw(rng, static_cast<uint64_t>(spec.n_values))]);
            append_flavor(words, rng);
            if (draw(rng, 2) == 1) {
                words.push_back(kConn[draw(rng, kConn.size())]);
                append_flavor(words, rng);
            }
            words.push_back(".");

            std::ostringstream ans;
            for (size_t i = 0; i < words.size(); ++i) {
                if (i) ans << ' ';
                ans << words[i];
            }
            r.answer = ans.str();
            r.fact_positions = {0, 1, value_pos};
            c.records.push_back(std::move(r));
        }
    }

    // Entity split, 1:3:2 proportions.
    std::vector<int> order(static_cast<size_t>(n_entities));
    for (int e = 0; e < n_entities; ++e) order[static_cast<size_t>(e)] = e;
    seeded_shuffle(order, rng);
    int n_forget = std::max(1, static_cast<int>(std::lround(n_entities / 6.0)));
    int n_neighbour = std::max(1, static_cast<int>(std::lround(n_entities / 2.0)));
    if (n_forget + n_neighbour >= n_entities)
        n_neighbour = n_entities - n_forget - 1;
    c.split.assign(static_cast<size_t>(n_entities), Split::General);
    for (int i = 0; i < n_forget; ++i)
        c.split[static_cast<size_t>(order[static_cast<size_t>(i)])] = Split::Forget;
    for (int i = n_forget; i < n_forget + n_neighbour; ++i)
        c.split[static_cast<size_t>(order[static_cast<size_t>(i)])] = Split::Neighbour;
    return c;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
    TokenSequence seq;
    seq.ids.push_back(kBos);
    for (const auto& w : split_words(text)) seq.ids.push_back(vocab.id(w));
    seq.ids.push_back(kEos);
    seq.boundary = 0;
    return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
    std::ostringstream os;
    bool first = true;
    for (TokenId id : seq.ids) {
        if (id == kPad || id == kBos || id == kEos) continue;
        if (!first) os << ' ';
        os << vocab.token(id);
        first = false;
    }
    return os.str();
}

AssembledExample assemble_example(const FactRecord& r, const Vocabulary& vocab) {
    AssembledExample ex;
    ex.seq.ids.push_back(kBos);
    for (const auto& w : split_words(r.question)) ex.seq.ids.push_back(vocab.id(w));
    ex.seq.boundary = static_cast<int>(ex.seq.ids.size());
    ex.seq.ids.push_back(kSep);
    for (const auto& w : split_words(r.answer)) ex.seq.ids.push_back(vocab.id(w));
    ex.seq.ids.push_back(kEos);
    for (int p : r.fact_positions)
        ex.fact_positions.push_back(ex.seq.boundary + 1 + p);
    return ex;
}

std::string rephrased_question(const Corpus& corpus, const FactRecord& r) {
    const AttributeSpec* spec = nullptr;
    for (const auto& s : kAttributes)
        if (r.attribute == s.label) spec = &s;
    if (!spec) throw std::invalid_argument("unknown attribute: " + r.attribute);
    auto words = split_words(r.answer);
    (void)corpus;
    return expand_name(spec->question1, words[0] + " " + words[1]);
}

std::vector<TokenId> fact_token_ids(const FactRecord& r, const Vocabulary& vocab) {
    auto words = split_words(r.answer);
    std::vector<TokenId> out;
    for (int p : r.fact_positions) out.push_back(vocab.id(words[static_cast<size_t>(p)]));
    return out;
}

std::string serialize_corpus(const Corpus& c) {
    std::ostringstream os;
    os << "attnshift-corpus v1\n";
    os << "seed " << c.seed << "\n";
    os << "entities " << c.n_entities << "\n";
    os << "attributes " << c.n_attributes << "\n";
    os << "vocab " << c.vocab.size() << "\n";
    for (int i = 0; i < c.vocab.size(); ++i)
        os << i << "\t" << c.vocab.id_to_token[static_cast<size_t>(i)] << "\t"
           << (c.vocab.is_content[static_cast<size_t>(i)] ? 'c' : 'f') << "\n";
    os << "records " << c.records.size() << "\n";
    for (const auto& r : c.records) {
        os << r.entity_id << "\t" << r.attribute << "\t" << r.question << "\t"
           << r.answer << "\t";
        for (size_t i = 0; i < r.fact_positions.size(); ++i) {
            if (i) os << ',';
            os << r.fact_positions[i];
        }
        os << "\n";
    }
    os << "splits " << c.split.size() << "\n";
    for (size_t e = 0; e < c.split.size(); ++e)
        os << e << "\t" << split_name(c.split[e]) << "\n";
    return os.str();
}

namespace {

std::string next_line(std::istringstream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error(std::string("corpus file truncated at ") + what);
    return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

}  // namespace

Corpus parse_corpus(const std::string& text) {
    std::istringstream is(text);
    if (next_line(is, "header") != "attnshift-corpus v1")
        throw std::runtime_error("not an attnshift corpus file");
    Corpus c;
    std::string key;
    {
        std::istringstream ls(next_line(is, "seed"));
        ls >> key >> c.seed;
        if (key != "seed") throw std::runtime_error("expected seed line");
    }
    {
        std::istringstream ls(next_line(is, "entities"));
        ls >> key >> c.n_entities;
        if (key != "entities") throw std::runtime_error("expected entities line");
    }
    {
        std::istringstream ls(next_line(is, "attributes"));
        ls >> key >> c.n_attributes;
        if (key != "attributes") throw std::runtime_error("expected attributes line");
    }
    int n_vocab = 0;
    {
        std::istringstream ls(next_line(is, "vocab"));
        ls >> key >> n_vocab;
        if (key != "vocab") throw std::runtime_error("expected vocab line");
    }
    for (int i = 0; i < n_vocab; ++i) {
        auto cols = split_tabs(next_line(is, "vocab entry"));
        if (cols.size() != 3 || std::stoi(cols[0]) != i)
            throw std::runtime_error("malformed vocab entry");
        TokenId id = static_cast<TokenId>(c.vocab.id_to_token.size());
        c.vocab.id_to_token.push_back(cols[1]);
        c.vocab.is_content.push_back(cols[2] == "c" ? 1 : 0);
        c.vocab.token_to_id.emplace(cols[1], id);
    }
    size_t n_records = 0;
    {
        std::istringstream ls(next_line(is, "records"));
        ls >> key >> n_records;
        if (key != "records") throw std::runtime_error("expected records line");
    }
    for (size_t i = 0; i < n_records; ++i) {
        auto cols = split_tabs(next_line(is, "record"));
        if (cols.size() != 5) throw std::runtime_error("malformed record line");
        FactRecord r;
        r.entity_id = std::stoi(cols[0]);
        r.attribute = cols[1];
        r.question = cols[2];
        r.answer = cols[3];
        std::istringstream ps(cols[4]);
        std::string tok;
        while (std::getline(ps, tok, ',')) r.fact_positions.push_back(std::stoi(tok));
        c.records.push_back(std::move(r));
    }
    size_t n_split = 0;
    {
        std::istringstream ls(next_line(is, "splits"));
        ls >> key >> n_split;
        if (key != "splits") throw std::runtime_error("expected splits line");
    }
    c.split.resize(n_split);
    for (size_t i = 0; i < n_split; ++i) {
        auto cols = split_tabs(next_line(is, "split entry"));
        if (cols.size() != 2 || std::stoul(cols[0]) != i)
            throw std::runtime_error("malformed split entry");
        if (cols[1] == "forget") c.split[i] = Split::Forget;
        else if (cols[1] == "neighbour") c.split[i] = Split::Neighbour;
        else if (cols[1] == "general") c.split[i] = Split::General;
        else throw std::runtime_error("unknown split label: " + cols[1]);
    }
    return c;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << serialize_corpus(corpus);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str());
}

uint64_t corpus_hash(const Corpus& corpus) {
    return fnv1a64(serialize_corpus(corpus));
}

}  // namespace attnshift
