// Builds a small planted-duplicate corpus, indexes it, fits topics and asks
// for the neighbours of one paraphrased copy, with and without propagation.
//
//   basic_retrieval [work_dir]

#include <filesystem>
#include <iostream>

#include "semflow/commands.hpp"

int main(int argc, char** argv) try {
  namespace fs = std::filesystem;
  using namespace semflow;
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "semflow-demo";

  SynthSpec spec;
  spec.docs = 200;
  spec.clusters = 20;
  const SynthCorpus synth = cmd_synth(spec, dir.string(), 3);

  Config c;
  c.stopwords_path = (dir / "stopwords.txt").string();
  c.topics.k_topics = spec.topics;
  c.retrieval.k = 5;
  c.propagate.mu_pp = 10.0;
  c.k_out = 5;

  cmd_index((dir / "corpus.tsv").string(), (dir / "embeddings.txt").string(), (dir / "index").string(), c,
            std::cout);
  cmd_topics((dir / "index").string(), (dir / "topics").string(), c, std::cout);

  const auto& [copy, original] = synth.qrels.front();
  const Artifacts a = load_artifacts((dir / "index").string(), (dir / "topics").string(),
                                     (dir / "embeddings.txt").string());
  const SearchIndex index(a.corpus, a.embeddings);
  const Query q = query_from_document(a.corpus, *a.corpus.find(copy));

  std::cout << "\nquery " << copy << " (duplicate of " << original << ")\nrank\tdoc\tlabel\twmd\n";
  write_ranking(run_query(q, index, a.model, c).ranking, std::cout);
  std::cout << "\nplain WMD neighbours\n";
  write_ranking(wmd_baseline(q, index, c), std::cout);
} catch (const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return 1;
}
