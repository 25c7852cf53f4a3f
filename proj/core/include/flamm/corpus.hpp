#pragma once

// Text ingestion: tokenization, document-frequency vocabulary, tf-idf,
// validation sampling, and raw corpus discovery.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "flamm/classifier.hpp"
#include "flamm/moments.hpp"

namespace flamm {

using Document = std::vector<std::string>;

/// Lowercases ASCII and splits on runs of ASCII non-alphanumerics. Bytes >= 0x80
/// are kept inside tokens so UTF-8 words survive intact.
Document tokenize(std::string_view text);

struct Vocabulary {
  std::vector<std::string> terms;
  std::unordered_map<std::string, Index> index;
  std::vector<std::size_t> document_frequency;  // parallel to terms
  bool truncated = false;  // fewer distinct terms than requested

  Index size() const { return static_cast<Index>(terms.size()); }
  std::optional<Index> find(const std::string& term) const;

  static Vocabulary from_terms(std::vector<std::string> terms);
};

/// Top-`size` terms by document frequency over all `docs`; ties broken
/// lexicographically.
Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t size);

/// Smoothed idf, ln((1 + N) / (1 + df)) + 1, fitted on `docs`.
Eigen::VectorXd fit_idf(const std::vector<Document>& docs, const Vocabulary& vocab);

struct TfidfMatrix {
  DataMatrix x;                     // |vocab| x |docs|
  std::vector<bool> empty_columns;  // documents with no vocabulary term
  std::size_t empty_count() const;
};

/// Raw term counts times `idf`; optionally scaled to unit column norm.
TfidfMatrix tfidf_vectorize(const std::vector<Document>& docs, const Vocabulary& vocab,
                            const Eigen::VectorXd& idf, bool unit_normalize);

/// Overload that fits idf on `docs` itself.
TfidfMatrix tfidf_vectorize(const std::vector<Document>& docs, const Vocabulary& vocab,
                            bool unit_normalize);

/// Adds a final feature row equal to `value` in every column. Gives the
/// bias-free stacked layers an intercept to work with.
DataMatrix append_constant_row(const DataMatrix& x, double value = 1.0);

struct ValidationSplit {
  std::vector<Index> validation;  // ascending
  std::vector<Index> remainder;   // complement, original order
};

/// Uniformly random subset of `size` pool indices, deterministic in `seed`.
ValidationSplit sample_validation(const LabeledSet& pool, std::size_t size, std::uint64_t seed);

/// Maps label spellings to {-1, +1}: +1/1/pos/positive/spam -> +1,
/// -1/0/neg/negative/ham -> -1. Returns nullopt for "unlabeled".
std::optional<int> parse_label_name(std::string_view name);

struct RawDocument {
  std::string split;
  std::optional<int> label;
  std::string id;
  std::string text;
};

/// Reads `<root>/<split>/<label>/<docid>.txt`.
std::vector<RawDocument> load_corpus_dir(const std::string& root);

/// Reads a manifest of `<split> <label> <path>` lines (whitespace separated,
/// paths relative to the manifest's directory, '#' comments allowed).
std::vector<RawDocument> load_manifest(const std::string& path);

struct IngestOptions {
  std::size_t vocabulary_size = 5000;
  bool unit_normalize = true;
  /// Fit idf on the source split only instead of every split.
  bool source_only_idf = false;
  std::string source_split = "source";
};

struct IngestedSplit {
  DataMatrix x;
  std::vector<int> labels;  // empty when the split is unlabeled
  std::vector<std::string> ids;
};

struct IngestedCorpus {
  Vocabulary vocab;
  std::map<std::string, IngestedSplit> splits;
  std::vector<std::string> dropped;  // "<split>/<id>" of documents without vocabulary terms
};

/// Vocabulary over all documents, tf-idf per split, and removal of documents
/// that contain no vocabulary term.
IngestedCorpus ingest_corpus(const std::vector<RawDocument>& docs, const IngestOptions& options);

}  // namespace flamm
