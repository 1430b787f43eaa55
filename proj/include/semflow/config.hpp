#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "semflow/corpus.hpp"
#include "semflow/embeddings.hpp"
#include "semflow/error.hpp"
#include "semflow/graph.hpp"
#include "semflow/propagate.hpp"
#include "semflow/text.hpp"
#include "semflow/topics.hpp"

namespace semflow {

enum class RankingMethod { kSsg, kWmd };

/// Run configuration. JSON files use flat, module-namespaced keys such as
/// `retrieval.k` or `propagate.mu_np`; command-line flags override them.
struct Config {
  std::string stopwords_path;  // optional
  CorpusOptions corpus;
  MissingPolicy missing_policy = MissingPolicy::kDrop;
  RetrievalParams retrieval;
  std::optional<std::size_t> prefetch;  // unset: 10 × retrieval.k
  TsvdParams topics;
  PropagationParams propagate;
  std::optional<std::size_t> k_prime;   // unset: size-based default
  std::size_t k_out = 10;
  RankingMethod method = RankingMethod::kSsg;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Retrieval parameters with the prefetch default resolved.
  RetrievalParams resolved_retrieval() const {
    RetrievalParams r = retrieval;
    r.prefetch = prefetch ? *prefetch : 10 * r.k;
    return r;
  }

  void validate() const {
    resolved_retrieval().validate();
    topics.validate();
    propagate.validate();
    if (k_out < 1) throw Error(ErrorKind::kInvalidArgument, "query.k_out must be >= 1");
    if (threads < 1) throw Error(ErrorKind::kInvalidArgument, "threads must be >= 1");
  }
};

inline RankingMethod parse_method(const std::string& s) {
  if (s == "ssg") return RankingMethod::kSsg;
  if (s == "wmd") return RankingMethod::kWmd;
  throw Error(ErrorKind::kInvalidArgument, "unknown ranking method '" + s + "' (ssg|wmd)");
}

inline unsigned parse_feature_kinds(const nlohmann::json& v) {
  if (!v.is_array()) throw Error(ErrorKind::kInvalidArgument, "retrieval.features must be a list");
  unsigned kinds = 0;
  for (const auto& item : v) {
    const std::string s = item.get<std::string>();
    if (s == "unigrams") {
      kinds |= kUnigrams;
    } else if (s == "bigrams") {
      kinds |= kBigrams;
    } else if (s == "trigrams") {
      kinds |= kTrigrams;
    } else if (s == "skip_bigrams") {
      kinds |= kSkipBigrams;
    } else if (s == "skip_trigrams") {
      kinds |= kSkipTrigrams;
    } else {
      throw Error(ErrorKind::kInvalidArgument, "unknown feature kind '" + s + "'");
    }
  }
  return kinds;
}

/// Applies every key of a flat JSON object; unknown keys and mistyped values
/// are InvalidArgument errors.
inline void apply_config_json(Config& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kInvalidArgument, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      auto count = [&] {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
          throw Error(ErrorKind::kInvalidArgument, "expected a non-negative integer");
        }
        return v.get<std::size_t>();
      };
      auto real = [&] {
        if (!v.is_number()) throw Error(ErrorKind::kInvalidArgument, "expected a number");
        return v.get<double>();
      };
      if (key == "paths.stopwords") c.stopwords_path = v.get<std::string>();
      else if (key == "corpus.prune_top") c.corpus.prune_top = count();
      else if (key == "embeddings.missing_policy") {
        const auto s = v.get<std::string>();
        if (s == "drop") c.missing_policy = MissingPolicy::kDrop;
        else if (s == "error") c.missing_policy = MissingPolicy::kError;
        else throw Error(ErrorKind::kInvalidArgument, "expected \"drop\" or \"error\"");
      }
      else if (key == "retrieval.k") c.retrieval.k = count();
      else if (key == "retrieval.prefetch") c.prefetch = count();
      else if (key == "retrieval.edge_threshold") {
        if (v.is_null()) c.retrieval.edge_threshold.reset();
        else c.retrieval.edge_threshold = real();
      }
      else if (key == "retrieval.features") c.retrieval.features = parse_feature_kinds(v);
      else if (key == "topics.k") c.topics.k_topics = count();
      else if (key == "topics.w0") c.topics.w0 = real();
      else if (key == "topics.eps") c.topics.eps = real();
      else if (key == "topics.eps0") c.topics.eps0 = real();
      else if (key == "topics.alpha") c.topics.alpha = real();
      else if (key == "topics.beta") c.topics.beta = real();
      else if (key == "topics.rho") c.topics.rho = real();
      else if (key == "topics.delta") c.topics.delta = real();
      else if (key == "topics.p0") c.topics.p0 = real();
      else if (key == "topics.kmeans_seed") c.topics.kmeans_seed = v.get<std::uint64_t>();
      else if (key == "topics.kmeans_max_iter") c.topics.kmeans_max_iter = count();
      else if (key == "topics.kmeans_restarts") c.topics.kmeans_restarts = count();
      else if (key == "seeding.k_prime") c.k_prime = count();
      else if (key == "propagate.mu_pp") c.propagate.mu_pp = real();
      else if (key == "propagate.mu_np") c.propagate.mu_np = real();
      else if (key == "propagate.dropout_p") c.propagate.dropout_p = real();
      else if (key == "propagate.dropout") c.propagate.dropout = v.get<bool>();
      else if (key == "propagate.max_iters") c.propagate.max_iters = count();
      else if (key == "propagate.tol") c.propagate.tol = real();
      else if (key == "query.k_out") c.k_out = count();
      else if (key == "eval.method") c.method = parse_method(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "threads") c.threads = count();
      else throw Error(ErrorKind::kInvalidArgument, "unknown key");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kInvalidArgument, "config key '" + key + "': " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::kInvalidArgument, "config key '" + key + "': " + e.what());
    }
  }
}

inline Config load_config(const std::string& path) {
  std::ifstream in = open_input(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kFormat, path + ": " + e.what());
  }
  Config c;
  apply_config_json(c, j);
  return c;
}

}  // namespace semflow
