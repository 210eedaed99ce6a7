#pragma once

#include "gemvpc/data.hpp"
#include "gemvpc/embedder.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gemvpc {

// Sentence-level co-occurrence counts: a word pair is counted once per
// sentence regardless of multiplicity.
struct CooccurrenceStats {
  long total_sentences = 0;
  std::map<std::string, long> word_counts;
  std::map<std::pair<std::string, std::string>, long> pair_counts;  // first < second

  // When `restrict_vocab` is non-null, only those words (and their pairs)
  // are counted; keeps support-corpus stats bounded.
  static CooccurrenceStats from_corpus(const std::vector<std::vector<std::string>>& sentences,
                                       const std::vector<std::string>* restrict_vocab = nullptr);
  void merge(const CooccurrenceStats& other);

  long pair_count(const std::string& i, const std::string& j) const;
};

constexpr double kNpmiNeverCooccur = -std::numeric_limits<double>::infinity();

// NPMI = PMI / (-log p(i,j)), in [-1, 1]; returns the -inf sentinel when the
// pair never co-occurs. Throws ValidationError for words absent from the corpus.
double compute_npmi(const CooccurrenceStats& stats, const std::string& i, const std::string& j);

struct ThemeGraphNode {
  std::string word;
  long corpus_count = 0;
  Eigen::VectorXd feature;
};

struct ThemeGraphEdge {
  int a = 0, b = 0;   // node indices, a < b; undirected
  double npmi = 0;
};

struct ThemeGraph {
  std::string action_class;
  std::vector<ThemeGraphNode> nodes;
  std::vector<ThemeGraphEdge> edges;
};

// Maps (video_id, event timestep) to an action class, or nullopt when unknown.
using ClassOfEvent = std::function<std::optional<std::string>(const std::string&, int)>;

struct ClassVocabResult {
  // class -> (word, count), sorted by count desc then word asc, truncated to top_n
  std::map<std::string, std::vector<std::pair<std::string, long>>> vocab;
  int skipped_events = 0;  // events without a class mapping
};

// Counts caption tokens tagged noun/verb/adverb (tags from the bundles),
// grouped by the event's action class.
ClassVocabResult build_class_vocab(const std::vector<VideoRecord>& records,
                                   const std::map<std::string, AnnotationBundle>& bundles,
                                   const ClassOfEvent& class_of_event, int top_n);

struct ActionClusterModel {
  Eigen::MatrixXd centroids;  // k x dim
  double inertia = 0;         // within-cluster sum of squares of the kept run

  int k() const { return static_cast<int>(centroids.rows()); }
  // argmin Euclidean distance, ties to the lowest index
  int assign(const Eigen::VectorXd& embedding) const;
};

ActionClusterModel kmeans_cluster(const std::vector<Eigen::VectorXd>& embeddings, int k,
                                  std::uint64_t seed, int restarts = 10,
                                  int max_iters = 300);

ThemeGraph build_theme_graph(const std::string& action_class,
                             const std::vector<std::pair<std::string, long>>& class_vocab,
                             const std::vector<std::vector<std::string>>& support_corpus,
                             double npmi_threshold, const TextEmbedder& embedder);

std::string theme_graph_to_json(const ThemeGraph& g);
ThemeGraph theme_graph_from_json(const std::string& text, const TextEmbedder& embedder);
void save_theme_graphs(const std::vector<ThemeGraph>& graphs, const std::string& path);
std::vector<ThemeGraph> load_theme_graphs(const std::string& path, const TextEmbedder& embedder);

// One sentence per line, UTF-8.
std::vector<std::vector<std::string>> load_support_corpus(const std::string& path);

}  // namespace gemvpc
