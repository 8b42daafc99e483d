#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "bzsl/datastore.hpp"

namespace bzsl {

// Nucleotide token codes. Canonical channel order is A,G,C,T,OTHER; every
// ambiguity/missing symbol maps to OTHER.
enum : std::uint8_t { TOK_A = 0, TOK_G = 1, TOK_C = 2, TOK_T = 3, TOK_OTHER = 4 };
constexpr int kNumTokens = 5;
constexpr std::size_t kDefaultBarcodeLength = 658;

struct BarcodeRecord {
    std::string sample_id;
    int class_id = -1;
    std::string sequence; // uppercase-normalized on ingest
};

struct BarcodeData {
    std::vector<BarcodeRecord> records;
    std::vector<std::string> class_names; // indexed by class id
};

struct TokenSeq {
    std::vector<std::uint8_t> tokens;

    std::size_t length() const { return tokens.size(); }
};

// L x 5 one-hot matrix; each row has exactly one set bit.
struct OneHotTensor {
    std::size_t length = 0;
    std::vector<std::uint8_t> values; // row-major, length * 5

    std::uint8_t at(std::size_t i, std::size_t channel) const {
        return values[i * kNumTokens + channel];
    }
};

enum class SideInfoSource { dna_kmer, dna_external, wordvec, visual_attr };

// Per-class attribute/embedding vectors used for class similarity. Rows are
// ordered by ascending class id.
struct SideInfoTable {
    std::vector<int> class_ids;
    FeatureMatrix vectors;
    SideInfoSource source_tag = SideInfoSource::dna_external;

    std::size_t n_classes() const { return class_ids.size(); }
    std::size_t dim() const { return vectors.n_cols; }
    Vector row_for(std::size_t table_row) const { return vectors.row(table_row); }
};

struct AlignScoring {
    int match = 1;
    int mismatch = -1;
    int gap = -2;
};

// FASTA records joined with a sample_id -> class label file. Throws
// UnmatchedSample naming every FASTA id missing from the label file.
BarcodeData parse_fasta(const std::string& fasta_path, const std::string& labels_path);

std::uint8_t token_of(char base);
TokenSeq tokenize(const std::string& sequence);
// Right-pads with OTHER / truncates to exactly `length`.
TokenSeq tokenize_to_length(const std::string& sequence, std::size_t length);

// Per-column majority over {A,G,C,T}; OTHER only when a column is all-OTHER.
// Ties resolve by the canonical token order A > G > C > T.
TokenSeq consensus(const std::vector<BarcodeRecord>& records, std::size_t length);

// Median training-sequence length, the default barcode length when building
// from data.
std::size_t median_sequence_length(const std::vector<BarcodeRecord>& records);

// Needleman-Wunsch global alignment against the consensus, projected onto
// consensus coordinates: insertions dropped, deletions become OTHER. Output
// length always equals the consensus length.
TokenSeq align_to_consensus(const BarcodeRecord& record, const TokenSeq& cons,
                            const AlignScoring& scoring = {});

OneHotTensor one_hot(const TokenSeq& seq);

// 4^k k-mer counts over sliding windows (windows containing OTHER skipped),
// L2-normalized. Zero vector when no window is valid.
Vector kmer_embedding(const TokenSeq& seq, int k);

// Row per class id = arithmetic mean of that class's sample vectors.
SideInfoTable class_attributes(const FeatureMatrix& per_sample_vectors,
                               const std::vector<int>& labels, int n_classes,
                               SideInfoSource tag);

// Alternative class-attribute route: per-class consensus sequence embedded
// as a single k-mer vector (instead of averaging per-sample embeddings).
SideInfoTable class_attributes_from_consensus(const std::vector<BarcodeRecord>& records,
                                              int n_classes, std::size_t length, int k);

// Stratified 1-NN holdout accuracy (Euclidean distance).
double nn_validate(const FeatureMatrix& vectors, const std::vector<int>& labels,
                   double train_frac, std::uint64_t seed);

// Composed embedding pipelines used by the CLI.
FeatureMatrix per_sample_kmer(const std::vector<BarcodeRecord>& records, int k);

struct OneHotExport {
    TokenSeq cons;
    FeatureMatrix samples; // flattened L*5 columns per record
};
OneHotExport per_sample_onehot_aligned(const std::vector<BarcodeRecord>& records,
                                       std::size_t length, const AlignScoring& scoring = {});

// Side-info persistence: matrix file plus "row_index,class_name" sidecar.
void save_sideinfo(const SideInfoTable& table, const std::vector<std::string>& class_names,
                   const std::string& matrix_path, MatrixFormat format,
                   const std::string& sidecar_path);
SideInfoTable load_sideinfo(const std::string& matrix_path, MatrixFormat format,
                            const std::string& sidecar_path,
                            const std::unordered_map<std::string, int>& class_id_of,
                            SideInfoSource tag);

// Sub-table for the given classes (ascending id order). Throws EmptyClass if
// a requested class is missing from the table.
SideInfoTable sideinfo_subset(const SideInfoTable& table, const std::vector<int>& class_ids);

} // namespace bzsl
