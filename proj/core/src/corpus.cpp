#include "flamm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "flamm/error.hpp"

namespace flamm {

namespace fs = std::filesystem;

namespace {

bool is_token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (want_dirs ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Document tokenize(std::string_view text) {
  Document tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::optional<Index> Vocabulary::find(const std::string& term) const {
  const auto it = index.find(term);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

Vocabulary Vocabulary::from_terms(std::vector<std::string> terms) {
  Vocabulary vocab;
  vocab.terms = std::move(terms);
  for (std::size_t i = 0; i < vocab.terms.size(); ++i) {
    if (!vocab.index.emplace(vocab.terms[i], static_cast<Index>(i)).second) {
      throw InvalidInput("duplicate vocabulary term '" + vocab.terms[i] + "'");
    }
  }
  vocab.document_frequency.assign(vocab.terms.size(), 0);
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t size) {
  if (size < 1) throw InvalidInput("vocabulary size must be at least 1");
  if (docs.empty()) throw InvalidInput("cannot build a vocabulary from an empty corpus");

  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    const std::unordered_set<std::string> distinct(doc.begin(), doc.end());
    for (const auto& term : distinct) ++df[term];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  const auto by_rank = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  const std::size_t keep = std::min(size, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), by_rank);
  ranked.resize(keep);

  std::vector<std::string> terms;
  terms.reserve(keep);
  for (const auto& [term, count] : ranked) terms.push_back(term);
  Vocabulary vocab = Vocabulary::from_terms(std::move(terms));
  for (std::size_t i = 0; i < keep; ++i) vocab.document_frequency[i] = ranked[i].second;
  vocab.truncated = ranked.size() < size;
  return vocab;
}

Eigen::VectorXd fit_idf(const std::vector<Document>& docs, const Vocabulary& vocab) {
  if (docs.empty()) throw InvalidInput("cannot fit idf on an empty corpus");
  Eigen::VectorXd df = Eigen::VectorXd::Zero(vocab.size());
  for (const auto& doc : docs) {
    std::unordered_set<Index> seen;
    for (const auto& token : doc) {
      if (auto i = vocab.find(token); i && seen.insert(*i).second) df(*i) += 1.0;
    }
  }
  const double n_docs = static_cast<double>(docs.size());
  return ((1.0 + n_docs) / (1.0 + df.array())).log() + 1.0;
}

std::size_t TfidfMatrix::empty_count() const {
  return static_cast<std::size_t>(std::count(empty_columns.begin(), empty_columns.end(), true));
}

TfidfMatrix tfidf_vectorize(const std::vector<Document>& docs, const Vocabulary& vocab,
                            const Eigen::VectorXd& idf, bool unit_normalize) {
  if (docs.empty()) throw InvalidInput("cannot vectorize an empty corpus");
  if (vocab.size() < 1) throw InvalidInput("vocabulary is empty");
  if (idf.size() != vocab.size()) throw InvalidInput("idf length does not match vocabulary");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(vocab.size(), static_cast<Index>(docs.size()));
  std::vector<bool> empty(docs.size(), false);
  for (std::size_t j = 0; j < docs.size(); ++j) {
    const auto col = static_cast<Index>(j);
    for (const auto& token : docs[j]) {
      if (auto i = vocab.find(token)) x(*i, col) += 1.0;
    }
    x.col(col).array() *= idf.array();
    const double norm = x.col(col).norm();
    if (norm == 0.0) {
      empty[j] = true;
    } else if (unit_normalize) {
      x.col(col) /= norm;
    }
  }
  return {DataMatrix(std::move(x)), std::move(empty)};
}

TfidfMatrix tfidf_vectorize(const std::vector<Document>& docs, const Vocabulary& vocab,
                            bool unit_normalize) {
  return tfidf_vectorize(docs, vocab, fit_idf(docs, vocab), unit_normalize);
}

DataMatrix append_constant_row(const DataMatrix& x, double value) {
  Eigen::MatrixXd out(x.d() + 1, x.n());
  out.topRows(x.d()) = x.values();
  out.row(x.d()).setConstant(value);
  return DataMatrix(std::move(out));
}

ValidationSplit sample_validation(const LabeledSet& pool, std::size_t size, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(pool.n());
  if (size > n) {
    throw InvalidInput("validation size " + std::to_string(size) + " exceeds pool size " +
                       std::to_string(n));
  }
  std::vector<Index> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<Index>(i);

  ValidationSplit split;
  split.validation.reserve(size);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(split.validation),
              static_cast<std::ptrdiff_t>(size), rng);
  std::set_difference(all.begin(), all.end(), split.validation.begin(), split.validation.end(),
                      std::back_inserter(split.remainder));
  return split;
}

std::optional<int> parse_label_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "+1" || lower == "1" || lower == "pos" || lower == "positive" || lower == "spam") {
    return 1;
  }
  if (lower == "-1" || lower == "0" || lower == "neg" || lower == "negative" || lower == "ham") {
    return -1;
  }
  if (lower == "unlabeled" || lower == "unlabelled" || lower == "?") return std::nullopt;
  throw InvalidInput("unrecognized label '" + std::string(name) + "'");
}

std::vector<RawDocument> load_corpus_dir(const std::string& root) {
  const fs::path base(root);
  if (!fs::is_directory(base)) throw InvalidInput("corpus root " + root + " is not a directory");
  std::vector<RawDocument> docs;
  for (const auto& split_dir : sorted_entries(base, true)) {
    for (const auto& label_dir : sorted_entries(split_dir, true)) {
      const auto label = parse_label_name(label_dir.filename().string());
      for (const auto& file : sorted_entries(label_dir, false)) {
        docs.push_back({split_dir.filename().string(), label, file.stem().string(), read_file(file)});
      }
    }
  }
  if (docs.empty()) throw InvalidInput("no documents found under " + root);
  return docs;
}

std::vector<RawDocument> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest " + path);
  const fs::path dir = fs::path(path).parent_path();
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string split, label, rel;
    if (!(fields >> split) || split.front() == '#') continue;
    if (!(fields >> label >> rel)) throw ParseError("expected '<split> <label> <path>'", line_no);
    std::optional<int> parsed;
    try {
      parsed = parse_label_name(label);
    } catch (const InvalidInput& e) {
      throw ParseError(e.what(), line_no);
    }
    const fs::path file = fs::path(rel).is_absolute() ? fs::path(rel) : dir / rel;
    docs.push_back({split, parsed, fs::path(rel).stem().string(), read_file(file)});
  }
  if (docs.empty()) throw InvalidInput("manifest " + path + " lists no documents");
  return docs;
}

IngestedCorpus ingest_corpus(const std::vector<RawDocument>& raw, const IngestOptions& options) {
  if (raw.empty()) throw InvalidInput("no documents to ingest");

  std::vector<Document> tokens;
  tokens.reserve(raw.size());
  for (const auto& doc : raw) tokens.push_back(tokenize(doc.text));

  IngestedCorpus out;
  out.vocab = build_vocabulary(tokens, options.vocabulary_size);

  Eigen::VectorXd idf;
  if (options.source_only_idf) {
    std::vector<Document> source_docs;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].split == options.source_split) source_docs.push_back(tokens[i]);
    }
    if (source_docs.empty()) {
      throw InvalidInput("source-only idf requested but split '" + options.source_split +
                         "' is empty");
    }
    idf = fit_idf(source_docs, out.vocab);
  } else {
    idf = fit_idf(tokens, out.vocab);
  }

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < raw.size(); ++i) members[raw[i].split].push_back(i);

  for (const auto& [split, indices] : members) {
    std::vector<Document> docs;
    for (auto i : indices) docs.push_back(tokens[i]);
    const TfidfMatrix tfidf = tfidf_vectorize(docs, out.vocab, idf, options.unit_normalize);

    std::vector<Index> kept;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto& doc = raw[indices[k]];
      if (tfidf.empty_columns[k]) {
        out.dropped.push_back(split + "/" + doc.id);
      } else {
        kept.push_back(static_cast<Index>(k));
      }
    }
    if (kept.empty()) continue;

    const bool labeled = raw[indices.front()].label.has_value();
    Eigen::MatrixXd cols(out.vocab.size(), static_cast<Index>(kept.size()));
    IngestedSplit result;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& doc = raw[indices[static_cast<std::size_t>(kept[k])]];
      if (doc.label.has_value() != labeled) {
        throw InvalidInput("split '" + split + "' mixes labeled and unlabeled documents");
      }
      cols.col(static_cast<Index>(k)) = tfidf.x.values().col(kept[k]);
      if (labeled) result.labels.push_back(*doc.label);
      result.ids.push_back(doc.id);
    }
    result.x = DataMatrix(std::move(cols));
    out.splits.emplace(split, std::move(result));
  }
  return out;
}

}  // namespace flamm
