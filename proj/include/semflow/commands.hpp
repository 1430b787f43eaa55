#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "semflow/config.hpp"
#include "semflow/corpus.hpp"
#include "semflow/embeddings.hpp"
#include "semflow/pipeline.hpp"
#include "semflow/synth.hpp"
#include "semflow/topics.hpp"

namespace semflow {

/// Process exit code for a library error: 1 usage, 2 data, 3 numerical.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return 1;
    case ErrorKind::kDomain:
    case ErrorKind::kSolverFailure: return 3;
    default: return 2;
  }
}

struct IndexSummary {
  std::size_t vocabulary = 0;
  std::size_t documents = 0;
  double coverage = 0.0;
  std::vector<std::string> excluded;  // empty after preprocessing or restriction
};

/// Builds the index from a `doc_id<TAB>text` corpus, restricted to terms
/// with an embedding, and writes it to `out_path`.
inline IndexSummary cmd_index(const std::string& corpus_path, const std::string& embeddings_path,
                              const std::string& out_path, const Config& c, std::ostream& log) {
  const StopwordSet stop = c.stopwords_path.empty() ? StopwordSet{} : load_stopwords(c.stopwords_path);
  IndexSummary s;
  const Corpus full = build_corpus(load_raw_corpus(corpus_path), stop, c.corpus, &s.excluded);
  const EmbeddingMatrix x = load_embeddings(embeddings_path, full.vocabulary, c.missing_policy);
  EmbeddedCorpus e = restrict_to_embeddings(full, x);
  s.excluded.insert(s.excluded.end(), e.dropped_documents.begin(), e.dropped_documents.end());
  save_index(e.corpus, out_path);
  s.vocabulary = e.corpus.vocabulary.size();
  s.documents = e.corpus.size();
  s.coverage = x.coverage;
  log << "vocabulary\t" << s.vocabulary << "\ndocuments\t" << s.documents << "\ncoverage\t"
      << format_double(s.coverage, 6) << '\n';
  if (!s.excluded.empty()) log << "excluded_documents\t" << s.excluded.size() << '\n';
  return s;
}

/// Fits the topic model on an index and writes it to `out_path`; logs the
/// cluster sizes, catchword counts and any pipeline diagnostics.
inline TopicFit cmd_topics(const std::string& index_path, const std::string& out_path, const Config& c,
                           std::ostream& log) {
  const Corpus corpus = load_index(index_path);
  if (c.topics.k_topics > corpus.size()) {
    throw Error(ErrorKind::kInvalidArgument, "topics.k (" + std::to_string(c.topics.k_topics) +
                                                 ") exceeds the number of documents (" +
                                                 std::to_string(corpus.size()) + ")");
  }
  TopicFit fit = fit_topics(corpus, c.topics);
  save_topic_model(fit.model, corpus.vocabulary, out_path);
  std::vector<std::size_t> sizes(fit.model.k(), 0);
  for (std::size_t t : fit.model.dominant()) ++sizes[t];
  log << "topic\tdocuments\tcatchwords\n";
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    log << l << '\t' << sizes[l] << '\t' << fit.model.catchwords()[l].size() << '\n';
  }
  for (const std::string& d : fit.diagnostics) log << "warning: " << d << '\n';
  return fit;
}

/// Optional debug outputs of a single query.
struct QueryDumps {
  std::ostream* graph = nullptr;
  std::ostream* seeds = nullptr;
  std::ostream* trace = nullptr;
};

/// What to query: free text, or an indexed document by id (excluded from its
/// own results).
struct QueryInput {
  std::string text;
  std::optional<std::string> doc_id;
  std::string query_id = "query";
};

inline Query make_query(const Corpus& corpus, const QueryInput& in) {
  if (in.doc_id) {
    const auto doc = corpus.find(*in.doc_id);
    if (!doc) throw Error(ErrorKind::kInvalidArgument, "unknown document '" + *in.doc_id + "'");
    return query_from_document(corpus, *doc);
  }
  // Stopwords never reach the index vocabulary, so none are needed here.
  return query_from_text(in.query_id, in.text, {}, corpus);
}

inline QueryResult run_query_on(const Artifacts& a, const QueryInput& in, const Config& c,
                                const QueryDumps& dumps = {}) {
  c.validate();
  const Query q = make_query(a.corpus, in);
  const SearchIndex index(a.corpus, a.embeddings);
  TraceSink trace;
  if (dumps.trace) {
    trace = [out = dumps.trace](std::size_t it, double delta, double obj) {
      *out << it << '\t' << format_double(delta) << '\t' << format_double(obj) << '\n';
    };
  }
  QueryResult r = run_query(q, index, a.model, c, trace);
  if (dumps.graph) write_graph(r.graph, *dumps.graph);
  if (dumps.seeds) write_seeds(r.seeds, r.graph, *dumps.seeds);
  return r;
}

/// Loads the artifacts, runs one query and prints the ranking (`--method wmd`
/// prints the plain WMD k-NN instead).
inline void cmd_query(const std::string& index_path, const std::string& topics_path,
                      const std::string& embeddings_path, const QueryInput& in, const Config& c,
                      std::ostream& out, const QueryDumps& dumps = {}) {
  const Artifacts a = load_artifacts(index_path, topics_path, embeddings_path);
  if (c.method == RankingMethod::kWmd) {
    c.validate();
    write_ranking(wmd_baseline(make_query(a.corpus, in), SearchIndex(a.corpus, a.embeddings), c), out);
    return;
  }
  write_ranking(run_query_on(a, in, c, dumps).ranking, out);
}

inline EvalReport cmd_eval(const std::string& index_path, const std::string& topics_path,
                           const std::string& embeddings_path, const std::string& qrels_path,
                           const Config& c) {
  const Artifacts a = load_artifacts(index_path, topics_path, embeddings_path);
  return evaluate(a, load_qrels(qrels_path, a.corpus), c);
}

inline SynthCorpus cmd_synth(const SynthSpec& spec, const std::string& out_dir, std::uint64_t seed) {
  SynthCorpus s = generate_synth(spec, seed);
  write_synth(s, out_dir);
  return s;
}

}  // namespace semflow
