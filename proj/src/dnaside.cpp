#include "bzsl/dnaside.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bzsl/parallel.hpp"
#include "bzsl/rng.hpp"

namespace bzsl {

std::uint8_t token_of(char base) {
    switch (base) {
        case 'A': return TOK_A;
        case 'G': return TOK_G;
        case 'C': return TOK_C;
        case 'T': return TOK_T;
        default: return TOK_OTHER;
    }
}

TokenSeq tokenize(const std::string& sequence) {
    TokenSeq seq;
    seq.tokens.reserve(sequence.size());
    for (char c : sequence) seq.tokens.push_back(token_of(c));
    return seq;
}

TokenSeq tokenize_to_length(const std::string& sequence, std::size_t length) {
    TokenSeq seq;
    seq.tokens.assign(length, TOK_OTHER);
    const std::size_t n = std::min(length, sequence.size());
    for (std::size_t i = 0; i < n; ++i) seq.tokens[i] = token_of(sequence[i]);
    return seq;
}

BarcodeData parse_fasta(const std::string& fasta_path, const std::string& labels_path) {
    const LabeledSamples ls = load_labels(labels_path);
    std::unordered_map<std::string, int> class_of;
    for (std::size_t i = 0; i < ls.sample_ids.size(); ++i) {
        class_of[ls.sample_ids[i]] = ls.labels.labels[i];
    }

    std::ifstream is(fasta_path);
    if (!is) throw IoError("cannot open for reading: " + fasta_path);

    struct RawRecord {
        std::string id;
        std::string sequence;
    };
    std::vector<RawRecord> raw;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            std::size_t end = 1;
            while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) {
                ++end;
            }
            if (end == 1) throw FormatError("FASTA header with empty id in " + fasta_path);
            raw.push_back({line.substr(1, end - 1), {}});
        } else {
            if (raw.empty()) {
                throw FormatError("sequence data before first FASTA header in " + fasta_path);
            }
            for (char c : line) {
                if (std::isspace(static_cast<unsigned char>(c))) continue;
                raw.back().sequence.push_back(
                    static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            }
        }
    }
    if (raw.empty()) throw FormatError("no FASTA records in " + fasta_path);

    BarcodeData out;
    out.class_names = ls.labels.class_names;
    std::vector<std::string> unmatched;
    for (auto& r : raw) {
        if (r.sequence.empty()) {
            throw FormatError("empty sequence for FASTA record '" + r.id + "'");
        }
        const auto it = class_of.find(r.id);
        if (it == class_of.end()) {
            unmatched.push_back(r.id);
            continue;
        }
        out.records.push_back({std::move(r.id), it->second, std::move(r.sequence)});
    }
    if (!unmatched.empty()) {
        std::string msg = "UnmatchedSample:";
        for (const auto& id : unmatched) msg += " " + id;
        throw UnmatchedSample(msg);
    }
    return out;
}

TokenSeq consensus(const std::vector<BarcodeRecord>& records, std::size_t length) {
    if (records.empty()) throw EmptyInput("consensus of zero records");
    if (length == 0) throw EmptyInput("consensus length must be positive");
    std::vector<std::array<std::size_t, kNumTokens>> counts(
        length, std::array<std::size_t, kNumTokens>{});
    for (const auto& rec : records) {
        const TokenSeq seq = tokenize_to_length(rec.sequence, length);
        for (std::size_t i = 0; i < length; ++i) ++counts[i][seq.tokens[i]];
    }
    TokenSeq cons;
    cons.tokens.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
        std::uint8_t best = TOK_OTHER;
        std::size_t best_count = 0;
        for (std::uint8_t t = 0; t < TOK_OTHER; ++t) {
            if (counts[i][t] > best_count) {
                best_count = counts[i][t];
                best = t;
            }
        }
        cons.tokens[i] = best_count > 0 ? best : std::uint8_t{TOK_OTHER};
    }
    return cons;
}

std::size_t median_sequence_length(const std::vector<BarcodeRecord>& records) {
    if (records.empty()) throw EmptyInput("median length of zero records");
    std::vector<std::size_t> lens;
    lens.reserve(records.size());
    for (const auto& r : records) lens.push_back(r.sequence.size());
    std::sort(lens.begin(), lens.end());
    const std::size_t n = lens.size();
    if (n % 2 == 1) return lens[n / 2];
    return static_cast<std::size_t>(
        std::llround(0.5 * (static_cast<double>(lens[n / 2 - 1]) +
                            static_cast<double>(lens[n / 2]))));
}

TokenSeq align_to_consensus(const BarcodeRecord& record, const TokenSeq& cons,
                            const AlignScoring& scoring) {
    const TokenSeq seq = tokenize(record.sequence);
    const std::size_t nc = cons.length();
    const std::size_t ns = seq.length();

    // score[i][j]: best score aligning cons[0..i) with seq[0..j).
    std::vector<int> score((nc + 1) * (ns + 1));
    std::vector<std::uint8_t> move((nc + 1) * (ns + 1)); // 0 diag, 1 up, 2 left
    auto idx = [ns](std::size_t i, std::size_t j) { return i * (ns + 1) + j; };

    for (std::size_t j = 1; j <= ns; ++j) {
        score[idx(0, j)] = static_cast<int>(j) * scoring.gap;
        move[idx(0, j)] = 2;
    }
    for (std::size_t i = 1; i <= nc; ++i) {
        score[idx(i, 0)] = static_cast<int>(i) * scoring.gap;
        move[idx(i, 0)] = 1;
        for (std::size_t j = 1; j <= ns; ++j) {
            const bool same = cons.tokens[i - 1] == seq.tokens[j - 1];
            const int diag = score[idx(i - 1, j - 1)] + (same ? scoring.match : scoring.mismatch);
            const int up = score[idx(i - 1, j)] + scoring.gap;
            const int left = score[idx(i, j - 1)] + scoring.gap;
            // Tie preference: consensus gap, then diagonal, then insertion,
            // so score-equivalent alignments collect their gaps at the end.
            int best = diag;
            std::uint8_t mv = 0;
            if (up >= best) {
                best = up;
                mv = 1;
            }
            if (left > best) {
                best = left;
                mv = 2;
            }
            score[idx(i, j)] = best;
            move[idx(i, j)] = mv;
        }
    }

    TokenSeq out;
    out.tokens.assign(nc, TOK_OTHER);
    std::size_t i = nc, j = ns;
    while (i > 0 || j > 0) {
        const std::uint8_t mv = move[idx(i, j)];
        if (i > 0 && j > 0 && mv == 0) {
            out.tokens[i - 1] = seq.tokens[j - 1];
            --i;
            --j;
        } else if (i > 0 && (mv == 1 || j == 0)) {
            --i; // deletion relative to consensus: stays OTHER
        } else {
            --j; // insertion relative to consensus: dropped
        }
    }
    return out;
}

OneHotTensor one_hot(const TokenSeq& seq) {
    OneHotTensor t;
    t.length = seq.length();
    t.values.assign(t.length * kNumTokens, 0);
    for (std::size_t i = 0; i < t.length; ++i) {
        t.values[i * kNumTokens + seq.tokens[i]] = 1;
    }
    return t;
}

Vector kmer_embedding(const TokenSeq& seq, int k) {
    if (k < 1 || k > 6) throw DomainError("kmer k must be in [1, 6]");
    const std::size_t dim = static_cast<std::size_t>(1) << (2 * k);
    Vector counts = Vector::Zero(static_cast<Eigen::Index>(dim));
    if (seq.length() >= static_cast<std::size_t>(k)) {
        for (std::size_t start = 0; start + static_cast<std::size_t>(k) <= seq.length();
             ++start) {
            std::size_t code = 0;
            bool valid = true;
            for (int j = 0; j < k; ++j) {
                const std::uint8_t t = seq.tokens[start + static_cast<std::size_t>(j)];
                if (t == TOK_OTHER) {
                    valid = false;
                    break;
                }
                code = code * 4 + t;
            }
            if (valid) counts[static_cast<Eigen::Index>(code)] += 1.0;
        }
    }
    const double norm = counts.norm();
    if (norm > 0.0) counts /= norm;
    return counts;
}

SideInfoTable class_attributes(const FeatureMatrix& per_sample_vectors,
                               const std::vector<int>& labels, int n_classes,
                               SideInfoSource tag) {
    if (per_sample_vectors.n_rows != labels.size()) {
        throw DimensionMismatch("class_attributes: vector count / label count mismatch");
    }
    SideInfoTable table;
    table.source_tag = tag;
    table.vectors = FeatureMatrix(static_cast<std::size_t>(n_classes), per_sample_vectors.n_cols);
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++counts[c];
        for (std::size_t j = 0; j < per_sample_vectors.n_cols; ++j) {
            table.vectors.at(c, j) += per_sample_vectors.at(i, j);
        }
    }
    for (int c = 0; c < n_classes; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (counts[cc] == 0) {
            throw EmptyClass("class id " + std::to_string(c) + " has no sample vectors");
        }
        for (std::size_t j = 0; j < table.vectors.n_cols; ++j) {
            table.vectors.at(cc, j) /= static_cast<double>(counts[cc]);
        }
        table.class_ids.push_back(c);
    }
    return table;
}

SideInfoTable class_attributes_from_consensus(const std::vector<BarcodeRecord>& records,
                                              int n_classes, std::size_t length, int k) {
    std::vector<std::vector<BarcodeRecord>> by_class(static_cast<std::size_t>(n_classes));
    for (const auto& r : records) {
        by_class[static_cast<std::size_t>(r.class_id)].push_back(r);
    }
    const std::size_t dim = static_cast<std::size_t>(1) << (2 * k);
    SideInfoTable table;
    table.source_tag = SideInfoSource::dna_kmer;
    table.vectors = FeatureMatrix(static_cast<std::size_t>(n_classes), dim);
    for (int c = 0; c < n_classes; ++c) {
        const auto& group = by_class[static_cast<std::size_t>(c)];
        if (group.empty()) {
            throw EmptyClass("class id " + std::to_string(c) + " has no barcode records");
        }
        const Vector v = kmer_embedding(consensus(group, length), k);
        for (std::size_t j = 0; j < dim; ++j) {
            table.vectors.at(static_cast<std::size_t>(c), j) = v[static_cast<Eigen::Index>(j)];
        }
        table.class_ids.push_back(c);
    }
    return table;
}

double nn_validate(const FeatureMatrix& vectors, const std::vector<int>& labels,
                   double train_frac, std::uint64_t seed) {
    if (vectors.n_rows != labels.size()) {
        throw DimensionMismatch("nn_validate: vector count / label count mismatch");
    }
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw DegenerateSplit("train_frac must be in (0,1)");
    }
    std::unordered_map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<int> class_ids;
    for (const auto& [c, rows] : by_class) {
        if (rows.size() < 2) {
            throw DegenerateSplit("class id " + std::to_string(c) +
                                  " has fewer than 2 samples");
        }
        class_ids.push_back(c);
    }
    std::sort(class_ids.begin(), class_ids.end());

    Rng rng = Rng(seed).child("nn_validate");
    std::vector<std::size_t> train, test;
    for (int c : class_ids) {
        auto rows = by_class[c];
        rng.shuffle(rows);
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(train_frac * static_cast<double>(rows.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            (k < n_train ? train : test).push_back(rows[k]);
        }
    }

    std::size_t correct = 0;
    for (std::size_t t : test) {
        const Vector q = vectors.row(t);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_row = train[0];
        for (std::size_t r : train) {
            const double d2 = (vectors.row(r) - q).squaredNorm();
            if (d2 < best) {
                best = d2;
                best_row = r;
            }
        }
        if (labels[best_row] == labels[t]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

FeatureMatrix per_sample_kmer(const std::vector<BarcodeRecord>& records, int k) {
    if (records.empty()) throw EmptyInput("per_sample_kmer of zero records");
    if (k < 1 || k > 6) throw DomainError("kmer k must be in [1, 6]");
    const std::size_t dim = static_cast<std::size_t>(1) << (2 * k);
    FeatureMatrix out(records.size(), dim);
    parallel_for(records.size(), [&](std::size_t i) {
        const Vector v = kmer_embedding(tokenize(records[i].sequence), k);
        for (std::size_t j = 0; j < dim; ++j) out.at(i, j) = v[static_cast<Eigen::Index>(j)];
    });
    return out;
}

OneHotExport per_sample_onehot_aligned(const std::vector<BarcodeRecord>& records,
                                       std::size_t length, const AlignScoring& scoring) {
    if (records.empty()) throw EmptyInput("per_sample_onehot_aligned of zero records");
    OneHotExport out;
    out.cons = consensus(records, length);
    out.samples = FeatureMatrix(records.size(), length * kNumTokens);
    parallel_for(records.size(), [&](std::size_t i) {
        const TokenSeq aligned = align_to_consensus(records[i], out.cons, scoring);
        const OneHotTensor oh = one_hot(aligned);
        for (std::size_t j = 0; j < oh.values.size(); ++j) {
            out.samples.at(i, j) = static_cast<double>(oh.values[j]);
        }
    });
    return out;
}

void save_sideinfo(const SideInfoTable& table, const std::vector<std::string>& class_names,
                   const std::string& matrix_path, MatrixFormat format,
                   const std::string& sidecar_path) {
    save_matrix(table.vectors, matrix_path, format);
    std::ofstream os(sidecar_path);
    if (!os) throw IoError("cannot open for writing: " + sidecar_path);
    os << "row_index,class_name\n";
    for (std::size_t r = 0; r < table.class_ids.size(); ++r) {
        os << r << ',' << class_names[static_cast<std::size_t>(table.class_ids[r])] << '\n';
    }
    if (!os) throw IoError("write failed: " + sidecar_path);
}

SideInfoTable load_sideinfo(const std::string& matrix_path, MatrixFormat format,
                            const std::string& sidecar_path,
                            const std::unordered_map<std::string, int>& class_id_of,
                            SideInfoSource tag) {
    SideInfoTable table;
    table.source_tag = tag;
    FeatureMatrix m = load_matrix(matrix_path, format);

    std::ifstream is(sidecar_path);
    if (!is) throw IoError("cannot open for reading: " + sidecar_path);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty sidecar: " + sidecar_path);
    std::vector<std::pair<int, std::size_t>> id_row; // (class id, matrix row)
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw FormatError("sidecar row " + std::to_string(line_no) + " malformed");
        }
        std::string name = line.substr(comma + 1);
        if (!name.empty() && name.back() == '\r') name.pop_back();
        const std::size_t row = static_cast<std::size_t>(std::stoull(line.substr(0, comma)));
        if (row >= m.n_rows) {
            throw FormatError("sidecar row index " + std::to_string(row) + " out of range");
        }
        const auto it = class_id_of.find(name);
        if (it == class_id_of.end()) continue; // class not used by this dataset
        id_row.emplace_back(it->second, row);
    }
    std::sort(id_row.begin(), id_row.end());
    for (std::size_t k = 1; k < id_row.size(); ++k) {
        if (id_row[k].first == id_row[k - 1].first) {
            throw FormatError("duplicate class in sidecar: " + sidecar_path);
        }
    }

    table.vectors = FeatureMatrix(id_row.size(), m.n_cols);
    for (std::size_t k = 0; k < id_row.size(); ++k) {
        table.class_ids.push_back(id_row[k].first);
        const double* src = m.values.data() + id_row[k].second * m.n_cols;
        std::copy(src, src + m.n_cols, table.vectors.values.data() + k * m.n_cols);
    }
    return table;
}

SideInfoTable sideinfo_subset(const SideInfoTable& table, const std::vector<int>& class_ids) {
    std::unordered_map<int, std::size_t> row_of;
    for (std::size_t r = 0; r < table.class_ids.size(); ++r) row_of[table.class_ids[r]] = r;
    std::vector<int> wanted = class_ids;
    std::sort(wanted.begin(), wanted.end());

    SideInfoTable out;
    out.source_tag = table.source_tag;
    out.vectors = FeatureMatrix(wanted.size(), table.vectors.n_cols);
    for (std::size_t k = 0; k < wanted.size(); ++k) {
        const auto it = row_of.find(wanted[k]);
        if (it == row_of.end()) {
            throw EmptyClass("side information missing for class id " +
                             std::to_string(wanted[k]));
        }
        out.class_ids.push_back(wanted[k]);
        const double* src = table.vectors.values.data() + it->second * table.vectors.n_cols;
        std::copy(src, src + table.vectors.n_cols,
                  out.vectors.values.data() + k * table.vectors.n_cols);
    }
    return out;
}

} // namespace bzsl
