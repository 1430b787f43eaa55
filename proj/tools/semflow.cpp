// semflow: index, topics, query, eval and synth subcommands.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "semflow/commands.hpp"

namespace {

using namespace semflow;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k_out;
  std::optional<double> dropout_p;
  bool no_dropout = false;
  std::optional<std::size_t> threads;
  std::optional<std::string> method;
};

Config resolve(const Overrides& o) {
  Config c = o.config_path.empty() ? Config{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.k_out) c.k_out = *o.k_out;
  if (o.dropout_p) c.propagate.dropout_p = *o.dropout_p;
  if (o.no_dropout) c.propagate.dropout = false;
  if (o.threads) c.threads = *o.threads;
  if (o.method) c.method = parse_method(*o.method);
  c.validate();
  return c;
}

// Opens a dump target, or returns null when the path is empty.
std::unique_ptr<std::ofstream> dump_file(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<std::ofstream>(open_output(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semflow: soft-seeded graph retrieval over word mover's distance"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON config with flat keys")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "global RNG seed");
  app.add_option("--k-out", o.k_out, "results per query");
  app.add_option("--dropout-p", o.dropout_p, "seed dropout probability");
  app.add_flag("--no-dropout", o.no_dropout, "disable seed dropout (SSG-WD)");
  app.add_option("--threads", o.threads, "evaluation workers");
  app.add_option("--method", o.method, "ranking: ssg (default) or the plain wmd baseline");

  std::string corpus, embeddings, index, topics, out, qrels, text, stopwords;
  auto* idx = app.add_subcommand("index", "build a corpus index");
  idx->add_option("corpus", corpus, "doc_id<TAB>text file")->required();
  idx->add_option("embeddings", embeddings, "word2vec text embeddings")->required();
  idx->add_option("out", out, "index file to write")->required();
  idx->add_option("--stopwords", stopwords, "stopword list (overrides paths.stopwords)");

  std::optional<std::size_t> k_topics;
  auto* top = app.add_subcommand("topics", "fit the TSVD topic model");
  top->add_option("index", index)->required();
  top->add_option("out", out, "topic model file to write")->required();
  top->add_option("--k-topics", k_topics, "number of topics");

  std::optional<std::string> doc_id;
  std::string query_id = "query", graph_dump, seeds_dump, trace_dump;
  auto* qry = app.add_subcommand("query", "rank documents for one query");
  qry->add_option("index", index)->required();
  qry->add_option("topics", topics)->required();
  qry->add_option("embeddings", embeddings)->required();
  qry->add_option("text", text, "query text");
  qry->add_option("--doc", doc_id, "query with an indexed document instead of text");
  qry->add_option("--query-id", query_id, "id of a text query (seeds its dropout stream)");
  qry->add_option("--dump-graph", graph_dump, "write the query subgraph");
  qry->add_option("--dump-seeds", seeds_dump, "write the seed assignment");
  qry->add_option("--trace", trace_dump, "write iter/max_delta/objective per sweep");

  auto* evl = app.add_subcommand("eval", "score rankings against qrels");
  evl->add_option("index", index)->required();
  evl->add_option("topics", topics)->required();
  evl->add_option("embeddings", embeddings)->required();
  evl->add_option("qrels", qrels, "query<TAB>relevant pairs")->required();
  evl->add_option("--out", out, "write the JSON report here instead of stdout");

  SynthSpec spec;
  auto* syn = app.add_subcommand("synth", "generate a synthetic corpus with planted structure");
  syn->add_option("out_dir", out)->required();
  syn->add_option("--topics", spec.topics, "number of planted topics")->capture_default_str();
  syn->add_option("--docs", spec.docs, "base documents")->capture_default_str();
  syn->add_option("--vocab", spec.vocab, "catchwords plus background words")->capture_default_str();
  syn->add_option("--clusters", spec.clusters, "duplicate pairs")->capture_default_str();
  syn->add_option("--noise", spec.noise, "paraphrase substitution rate")->capture_default_str();
  syn->add_option("--alpha", spec.alpha, "dominant-topic share")->capture_default_str();
  syn->add_option("--catchwords", spec.catchwords, "catchwords per topic")->capture_default_str();
  syn->add_option("--dim", spec.dim, "embedding dimension")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    Config c = resolve(o);
    if (*idx) {
      if (!stopwords.empty()) c.stopwords_path = stopwords;
      cmd_index(corpus, embeddings, out, c, std::cerr);
    } else if (*top) {
      if (k_topics) c.topics.k_topics = *k_topics;
      cmd_topics(index, out, c, std::cerr);
    } else if (*qry) {
      if (!doc_id && text.empty()) throw Error(ErrorKind::kInvalidArgument, "give query text or --doc");
      const auto graph = dump_file(graph_dump), seeds = dump_file(seeds_dump), trace = dump_file(trace_dump);
      cmd_query(index, topics, embeddings, {text, doc_id, query_id}, c, std::cout,
                {graph.get(), seeds.get(), trace.get()});
    } else if (*evl) {
      const std::string report = cmd_eval(index, topics, embeddings, qrels, c).to_json().dump(2) + "\n";
      if (out.empty()) {
        std::cout << report;
      } else {
        auto f = open_output(out);
        f << report;
      }
    } else if (*syn) {
      const SynthCorpus s = cmd_synth(spec, out, c.seed);
      std::cerr << "documents\t" << s.docs.size() << "\nqrels\t" << s.qrels.size() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "semflow: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "semflow: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
