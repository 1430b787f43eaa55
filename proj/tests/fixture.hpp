#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "semflow/commands.hpp"
#include "test_util.hpp"

namespace semflow::testing {

// Small planted corpus: 3 topics, 60 base documents, 10 duplicate pairs.
inline SynthSpec small_spec() {
  SynthSpec s;
  s.topics = 3;
  s.docs = 60;
  s.vocab = 45;
  s.catchwords = 5;
  s.clusters = 10;
  s.noise = 0.3;
  s.dim = 8;
  s.min_length = 20;
  s.max_length = 30;
  s.fillers = 10;
  return s;
}

inline Config small_config() {
  Config c;
  c.corpus.prune_top = 10;
  c.topics.k_topics = 3;
  c.retrieval.k = 3;
  c.propagate.mu_pp = 10.0;
  c.seed = 5;
  return c;
}

// Per-test scratch directory, recreated empty.
inline std::string test_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const std::string dir = tmp_path(std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Fixture {
  std::string dir;
  Config config;
  SynthCorpus synth;

  std::string corpus() const { return dir + "/corpus.tsv"; }
  std::string embeddings() const { return dir + "/embeddings.txt"; }
  std::string qrels() const { return dir + "/qrels.tsv"; }
  std::string index() const { return dir + "/index"; }
  std::string topics() const { return dir + "/topics"; }
};

// synth → index → topics in a fresh directory.
inline Fixture build_fixture(const SynthSpec& spec = small_spec(), std::uint64_t seed = 11) {
  Fixture f{test_dir(), small_config(), {}};
  f.config.stopwords_path = f.dir + "/stopwords.txt";
  f.synth = cmd_synth(spec, f.dir, seed);
  std::ostringstream log;
  cmd_index(f.corpus(), f.embeddings(), f.index(), f.config, log);
  cmd_topics(f.index(), f.topics(), f.config, log);
  return f;
}

}  // namespace semflow::testing
