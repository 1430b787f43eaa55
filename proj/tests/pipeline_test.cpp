#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixture.hpp"
#include "semflow/pipeline.hpp"
#include "semflow/synth.hpp"

namespace semflow {
namespace {

using testing::build_fixture;
using testing::small_spec;
using testing::tmp_path;
using testing::write_file;

// --- config ----------------------------------------------------------------

TEST(Config, FlatKeysOverrideDefaults) {
  Config c;
  apply_config_json(c, nlohmann::json::parse(R"({
    "retrieval.k": 7, "retrieval.edge_threshold": 0.25, "retrieval.features": ["unigrams", "bigrams"],
    "topics.k": 4, "topics.w0": 0.3, "propagate.mu_pp": 0.0, "propagate.dropout": false,
    "propagate.dropout_p": 0.2, "query.k_out": 3, "eval.method": "wmd", "seed": 9, "threads": 2,
    "seeding.k_prime": 4, "embeddings.missing_policy": "error", "corpus.prune_top": 0})"));
  EXPECT_EQ(c.retrieval.k, 7u);
  EXPECT_EQ(c.retrieval.edge_threshold, 0.25);
  EXPECT_EQ(c.retrieval.features, unsigned{kUnigrams | kBigrams});
  EXPECT_EQ(c.topics.k_topics, 4u);
  EXPECT_EQ(c.topics.w0, 0.3);
  EXPECT_EQ(c.propagate.mu_pp, 0.0);
  EXPECT_FALSE(c.propagate.dropout);
  EXPECT_EQ(c.propagate.dropout_p, 0.2);
  EXPECT_EQ(c.k_out, 3u);
  EXPECT_EQ(c.method, RankingMethod::kWmd);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.threads, 2u);
  EXPECT_EQ(c.k_prime, 4u);
  EXPECT_EQ(c.missing_policy, MissingPolicy::kError);
  EXPECT_EQ(c.corpus.prune_top, 0u);
  // Prefetch defaults to ten times k unless given.
  EXPECT_EQ(c.resolved_retrieval().prefetch, 70u);
  apply_config_json(c, nlohmann::json::parse(R"({"retrieval.prefetch": 5})"));
  EXPECT_THROW(c.validate(), Error);  // prefetch < k
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  Config c;
  for (const char* bad : {R"({"retrieval.kk": 1})", R"({"retrieval.k": -1})", R"({"retrieval.k": 1.5})",
                          R"({"propagate.mu_np": "x"})", R"({"eval.method": "bm25"})",
                          R"({"retrieval.features": ["fourgrams"]})", R"([1, 2])"}) {
    try {
      apply_config_json(c, nlohmann::json::parse(bad));
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument) << bad;
    }
  }
}

TEST(Config, LoadsFileAndReportsSyntaxErrors) {
  const std::string good = tmp_path("config_good.json"), bad = tmp_path("config_bad.json");
  write_file(good, R"({"propagate.mu_np": 2.5})");
  write_file(bad, R"({"propagate.mu_np": )");
  EXPECT_EQ(load_config(good).propagate.mu_np, 2.5);
  try {
    load_config(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  try {
    load_config(tmp_path("config_missing.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Config, ValidationDelegatesToModules) {
  Config c;
  c.propagate.dropout_p = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = Config{};
  c.k_out = 0;
  EXPECT_THROW(c.validate(), Error);
  c = Config{};
  c.topics.delta = 0.2;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(Config{}.validate());
}

// --- scoring ----------------------------------------------------------------

TEST(Scoring, OutcomeMarksRelevantRanks) {
  const std::vector<RankedDoc> ranking{{"a", 1, 0}, {"b", .9, 0}, {"c", .8, 0}, {"d", .7, 0}};
  const QueryOutcome o = outcome_of("q", ranking, {"c", "a", "z"});
  EXPECT_EQ(o.retrieved, (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(o.hit_ranks, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(o.relevant, 3u);
}

TEST(Scoring, MatchesHandScoredSuite) {
  // Ten queries with relevant results at these ranks.
  const std::vector<std::vector<std::size_t>> ranks{{1}, {2}, {}, {5, 6}, {10}, {1, 2, 3}, {11}, {}, {4}, {7, 8, 9, 10}};
  EvalReport r;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    QueryOutcome o;
    o.query_id = "q" + std::to_string(i);
    o.hit_ranks = ranks[i];
    r.queries.push_back(o);
  }
  score_report(r);
  // Hit within top 1: q0 q5. Top 5: q0 q1 q3 q5 q8. Top 10: + q4 q9.
  EXPECT_DOUBLE_EQ(r.hit_rate[1], 0.2);
  EXPECT_DOUBLE_EQ(r.hit_rate[5], 0.5);
  EXPECT_DOUBLE_EQ(r.hit_rate[10], 0.7);
  // Relevant results in top k: 2; 1+1+1+3+1 = 7; 1+1+2+1+3+1+4 = 13.
  EXPECT_DOUBLE_EQ(r.precision[1], 2.0 / 10.0);
  EXPECT_DOUBLE_EQ(r.precision[5], 7.0 / 50.0);
  EXPECT_DOUBLE_EQ(r.precision[10], 13.0 / 100.0);
}

TEST(Scoring, EmptyReportIsZero) {
  EvalReport r;
  score_report(r);
  for (std::size_t k : kCutoffs) {
    EXPECT_EQ(r.hit_rate[k], 0.0);
    EXPECT_EQ(r.precision[k], 0.0);
  }
}

// --- qrels -----------------------------------------------------------------

TEST(Qrels, ParsesPairsAndBareQueries) {
  const Corpus corpus = testing::make_corpus({{"a"}, {"b"}, {"c"}});
  const std::string path = tmp_path("qrels_ok.tsv");
  write_file(path, "d1\td0\nd1\td2\n\nd2\n");
  const Qrels q = load_qrels(path, corpus);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.at("d1"), (std::set<std::string>{"d0", "d2"}));
  EXPECT_TRUE(q.at("d2").empty());
}

TEST(Qrels, UnknownIdsAreFormatErrorsWithLine) {
  const Corpus corpus = testing::make_corpus({{"a"}, {"b"}});
  const std::string path = tmp_path("qrels_bad.tsv");
  write_file(path, "d0\td1\nd0\tnope\n");
  try {
    load_qrels(path, corpus);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  write_file(path, "ghost\td1\n");
  EXPECT_THROW(load_qrels(path, corpus), FormatError);
  write_file(path, "d0\td1\textra\n");
  EXPECT_THROW(load_qrels(path, corpus), FormatError);
}

// --- synth -----------------------------------------------------------------

TEST(Synth, ZeroNoiseGivesExactCopies) {
  SynthSpec spec = small_spec();
  spec.noise = 0.0;
  const SynthCorpus s = generate_synth(spec, 3);
  ASSERT_EQ(s.docs.size(), spec.docs + spec.clusters);
  ASSERT_EQ(s.qrels.size(), spec.clusters);
  for (std::size_t j = 0; j < spec.clusters; ++j) {
    const SynthDoc& copy = s.docs[spec.docs + j];
    EXPECT_EQ(copy.id, s.docs[j].id + "x1");
    EXPECT_EQ(copy.tokens, s.docs[j].tokens);
    EXPECT_EQ(s.qrels[j], std::make_pair(copy.id, s.docs[j].id));
  }
}

TEST(Synth, NoiseSubstitutesVariantsOnly) {
  SynthSpec spec = small_spec();
  spec.noise = 0.5;
  const SynthCorpus s = generate_synth(spec, 3);
  std::size_t changed = 0, content = 0;
  for (std::size_t j = 0; j < spec.clusters; ++j) {
    const auto& a = s.docs[j].tokens;
    const auto& b = s.docs[spec.docs + j].tokens;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      const bool is_content = a[t][0] == 't' || a[t].rfind("bg", 0) == 0;
      content += is_content;
      if (a[t] != b[t]) {
        ++changed;
        EXPECT_TRUE(is_content) << a[t];
        EXPECT_EQ(b[t].rfind(a[t] + "v", 0), 0u) << b[t];
      }
    }
  }
  const double rate = static_cast<double>(changed) / static_cast<double>(content);
  EXPECT_GT(rate, 0.4);
  EXPECT_LT(rate, 0.6);
}

TEST(Synth, SameSeedSameCorpus) {
  const SynthCorpus a = generate_synth(small_spec(), 8), b = generate_synth(small_spec(), 8);
  const SynthCorpus c = generate_synth(small_spec(), 9);
  ASSERT_EQ(a.docs.size(), b.docs.size());
  for (std::size_t i = 0; i < a.docs.size(); ++i) EXPECT_EQ(a.docs[i].tokens, b.docs[i].tokens);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_NE(a.docs[0].tokens, c.docs[0].tokens);
}

TEST(Synth, PlantedStructure) {
  const SynthSpec spec = small_spec();
  const SynthCorpus s = generate_synth(spec, 4);
  std::set<std::string> all_catchwords;
  for (const auto& set : s.catchwords) {
    EXPECT_EQ(set.size(), spec.catchwords);
    all_catchwords.insert(set.begin(), set.end());
  }
  EXPECT_EQ(all_catchwords.size(), spec.topics * spec.catchwords);
  std::set<std::string> embedded;
  for (const auto& [w, v] : s.embeddings) {
    EXPECT_EQ(v.size(), spec.dim);
    EXPECT_TRUE(embedded.insert(w).second) << w;
  }
  for (const SynthDoc& d : s.docs) {
    for (const std::string& t : d.tokens) {
      const bool stop = std::find(s.stopwords.begin(), s.stopwords.end(), t) != s.stopwords.end();
      EXPECT_TRUE(stop || embedded.count(t)) << t;
      // Catchwords only ever come from the document's own topic.
      if (all_catchwords.count(t)) {
        EXPECT_EQ(t.substr(0, 2), "t" + std::to_string(d.topic)) << t;
      }
    }
  }
}

TEST(Synth, ValidatesSpec) {
  for (auto mutate : std::vector<void (*)(SynthSpec&)>{
           [](SynthSpec& s) { s.topics = 0; }, [](SynthSpec& s) { s.vocab = 15; },
           [](SynthSpec& s) { s.clusters = 61; }, [](SynthSpec& s) { s.noise = 1.5; },
           [](SynthSpec& s) { s.alpha = 0.0; }, [](SynthSpec& s) { s.max_length = 10; }}) {
    SynthSpec s = small_spec();
    mutate(s);
    EXPECT_THROW(generate_synth(s, 1), Error);
  }
}

// --- single queries ----------------------------------------------------------

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    f_ = build_fixture();
    a_ = load_artifacts(f_.index(), f_.topics(), f_.embeddings());
  }
  testing::Fixture f_;
  Artifacts a_;
};

TEST_F(PipelineTest, IndexedTextQueryRanksItsDocumentFirst) {
  const SearchIndex index(a_.corpus, a_.embeddings);
  for (const char* id : {"d000", "d017", "d042"}) {
    const Document& d = a_.corpus.documents[*a_.corpus.find(id)];
    const Query q = query_from_text("probe", join(d.tokens, " "), {}, a_.corpus);
    const QueryResult r = run_query(q, index, a_.model, f_.config);
    ASSERT_FALSE(r.ranking.empty());
    EXPECT_EQ(r.ranking[0].doc_id, id);
    EXPECT_EQ(r.ranking[0].wmd, 0.0);
  }
}

TEST_F(PipelineTest, RankingRespectsKOutAndLabelsAreInRange) {
  const SearchIndex index(a_.corpus, a_.embeddings);
  Config c = f_.config;
  c.k_out = 4;
  const QueryResult r = run_query(query_from_document(a_.corpus, 5), index, a_.model, c);
  EXPECT_EQ(r.ranking.size(), 4u);
  for (double v : r.state.labels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (const RankedDoc& d : r.ranking) EXPECT_NE(d.doc_id, a_.corpus.documents[5].id);
}

TEST_F(PipelineTest, QueryIsDeterministicAndSeedDependent) {
  const SearchIndex index(a_.corpus, a_.embeddings);
  const Query q = query_from_document(a_.corpus, 3);
  const QueryResult r1 = run_query(q, index, a_.model, f_.config);
  const QueryResult r2 = run_query(q, index, a_.model, f_.config);
  EXPECT_EQ(r1.state.labels, r2.state.labels);
  EXPECT_EQ(r1.ranking, r2.ranking);
  EXPECT_NE(query_seed(1, "a"), query_seed(1, "b"));
  EXPECT_NE(query_seed(1, "a"), query_seed(2, "a"));
}

TEST_F(PipelineTest, DropoutOffEqualsZeroProbability) {
  const SearchIndex index(a_.corpus, a_.embeddings);
  const Query q = query_from_document(a_.corpus, 7);
  Config off = f_.config, zero = f_.config;
  off.propagate.dropout = false;
  zero.propagate.dropout_p = 0.0;
  EXPECT_EQ(run_query(q, index, a_.model, off).state.labels, run_query(q, index, a_.model, zero).state.labels);
}

TEST_F(PipelineTest, WmdBaselineIsExactKnn) {
  const SearchIndex index(a_.corpus, a_.embeddings);
  const Query q = query_from_document(a_.corpus, 0);
  Config c = f_.config;
  c.prefetch = a_.corpus.size();
  const auto ranking = wmd_baseline(q, index, c);
  ASSERT_EQ(ranking.size(), c.k_out);
  // Brute force over every other document.
  std::vector<std::pair<double, std::string>> all;
  for (std::size_t d = 1; d < a_.corpus.size(); ++d) {
    all.emplace_back(wmd(q.nbow, a_.corpus.documents[d].nbow, a_.embeddings).distance, a_.corpus.documents[d].id);
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    EXPECT_EQ(ranking[i].doc_id, all[i].second);
    EXPECT_NEAR(ranking[i].wmd, all[i].first, 1e-12);
  }
}

TEST_F(PipelineTest, EvaluationIsIndependentOfThreads) {
  const Qrels qrels = load_qrels(f_.qrels(), a_.corpus);
  Config c = f_.config;
  const std::string one = evaluate(a_, qrels, c).to_json().dump();
  c.threads = 3;
  EXPECT_EQ(evaluate(a_, qrels, c).to_json().dump(), one);
}

TEST_F(PipelineTest, EvaluationReportsQueriesInIdOrder) {
  const Qrels qrels = load_qrels(f_.qrels(), a_.corpus);
  const EvalReport r = evaluate(a_, qrels, f_.config);
  ASSERT_EQ(r.queries.size(), qrels.size());
  for (std::size_t i = 1; i < r.queries.size(); ++i) EXPECT_LT(r.queries[i - 1].query_id, r.queries[i].query_id);
  const auto j = r.to_json();
  EXPECT_EQ(j["method"], "ssg");
  EXPECT_EQ(j["queries"], qrels.size());
  EXPECT_TRUE(j["per_query"][0].contains("converged"));
}

}  // namespace
}  // namespace semflow
