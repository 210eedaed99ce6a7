#include "gemvpc/theme_graph.hpp"

#include "gemvpc/rng.hpp"
#include "gemvpc/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

using nlohmann::json;

namespace gemvpc {

CooccurrenceStats CooccurrenceStats::from_corpus(
    const std::vector<std::vector<std::string>>& sentences,
    const std::vector<std::string>* restrict_vocab) {
  std::set<std::string> keep;
  if (restrict_vocab) keep.insert(restrict_vocab->begin(), restrict_vocab->end());
  CooccurrenceStats s;
  for (const auto& sent : sentences) {
    ++s.total_sentences;
    std::set<std::string> uniq;
    for (const auto& w : sent)
      if (!restrict_vocab || keep.count(w)) uniq.insert(w);
    for (const auto& w : uniq) s.word_counts[w]++;
    for (auto it = uniq.begin(); it != uniq.end(); ++it) {
      auto jt = it;
      for (++jt; jt != uniq.end(); ++jt) s.pair_counts[{*it, *jt}]++;
    }
  }
  return s;
}

void CooccurrenceStats::merge(const CooccurrenceStats& other) {
  total_sentences += other.total_sentences;
  for (const auto& [w, c] : other.word_counts) word_counts[w] += c;
  for (const auto& [p, c] : other.pair_counts) pair_counts[p] += c;
}

long CooccurrenceStats::pair_count(const std::string& i, const std::string& j) const {
  auto key = i < j ? std::make_pair(i, j) : std::make_pair(j, i);
  auto it = pair_counts.find(key);
  return it == pair_counts.end() ? 0 : it->second;
}

double compute_npmi(const CooccurrenceStats& stats, const std::string& i,
                    const std::string& j) {
  auto it_i = stats.word_counts.find(i);
  auto it_j = stats.word_counts.find(j);
  if (it_i == stats.word_counts.end() || it_i->second == 0)
    throw ValidationError("word absent from corpus: " + i);
  if (it_j == stats.word_counts.end() || it_j->second == 0)
    throw ValidationError("word absent from corpus: " + j);
  long cij = stats.pair_count(i, j);
  if (cij == 0) return kNpmiNeverCooccur;
  double S = static_cast<double>(stats.total_sentences);
  double pij = cij / S;
  double pi = it_i->second / S;
  double pj = it_j->second / S;
  double pmi = std::log(pij / (pi * pj));
  double denom = -std::log(pij);
  if (denom == 0.0) return 1.0;  // p(i,j) = 1: words co-occur in every sentence
  return pmi / denom;
}

ClassVocabResult build_class_vocab(const std::vector<VideoRecord>& records,
                                   const std::map<std::string, AnnotationBundle>& bundles,
                                   const ClassOfEvent& class_of_event, int top_n) {
  std::map<std::string, std::map<std::string, long>> counts;
  int skipped = 0;
  for (const auto& rec : records) {
    auto bit = bundles.find(rec.video_id);
    for (size_t t = 0; t < rec.captions.size(); ++t) {
      auto cls = class_of_event(rec.video_id, static_cast<int>(t));
      if (!cls) {
        ++skipped;
        continue;
      }
      // tag lookup for this event's caption tokens
      std::map<std::string, std::string> tag_of;
      if (bit != bundles.end() && t < bit->second.events.size())
        for (const auto& [tok, tag] : bit->second.events[t].pos_tags)
          tag_of[to_lower(tok)] = tag;
      for (const auto& tok : rec.captions[t]) {
        auto it = tag_of.find(to_lower(tok));
        if (it != tag_of.end() && is_content_tag(it->second))
          counts[*cls][to_lower(tok)]++;
      }
    }
  }
  ClassVocabResult out;
  out.skipped_events = skipped;
  for (const auto& [cls, wc] : counts) {
    std::vector<std::pair<std::string, long>> words(wc.begin(), wc.end());
    std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;  // lexicographic tie-break
    });
    if (static_cast<int>(words.size()) > top_n) words.resize(top_n);
    out.vocab[cls] = std::move(words);
  }
  return out;
}

int ActionClusterModel::assign(const Eigen::VectorXd& embedding) const {
  int best = 0;
  double best_d = (centroids.row(0).transpose() - embedding).squaredNorm();
  for (int c = 1; c < k(); ++c) {
    double d = (centroids.row(c).transpose() - embedding).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

ActionClusterModel kmeans_cluster(const std::vector<Eigen::VectorXd>& embeddings, int k,
                                  std::uint64_t seed, int restarts, int max_iters) {
  const int n = static_cast<int>(embeddings.size());
  if (n < k) throw ValidationError("kmeans: fewer points than clusters");
  const int dim = static_cast<int>(embeddings[0].size());
  ActionClusterModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  DetRng rng(seed);
  for (int run = 0; run < restarts; ++run) {
    // init: k distinct points chosen without replacement
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    Eigen::MatrixXd cent(k, dim);
    for (int c = 0; c < k; ++c) cent.row(c) = embeddings[order[c]].transpose();

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int a = 0;
        double da = (cent.row(0).transpose() - embeddings[i]).squaredNorm();
        for (int c = 1; c < k; ++c) {
          double d = (cent.row(c).transpose() - embeddings[i]).squaredNorm();
          if (d < da) {
            da = d;
            a = c;
          }
        }
        if (a != assign[i]) {
          assign[i] = a;
          changed = true;
        }
      }
      if (!changed && iter > 0) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
      std::vector<int> sizes(k, 0);
      for (int i = 0; i < n; ++i) {
        sums.row(assign[i]) += embeddings[i].transpose();
        sizes[assign[i]]++;
      }
      for (int c = 0; c < k; ++c)
        if (sizes[c] > 0) cent.row(c) = sums.row(c) / sizes[c];
      // empty clusters keep their previous centroid
    }
    double inertia = 0;
    for (int i = 0; i < n; ++i)
      inertia += (cent.row(assign[i]).transpose() - embeddings[i]).squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centroids = cent;
    }
  }
  return best;
}

ThemeGraph build_theme_graph(const std::string& action_class,
                             const std::vector<std::pair<std::string, long>>& class_vocab,
                             const std::vector<std::vector<std::string>>& support_corpus,
                             double npmi_threshold, const TextEmbedder& embedder) {
  if (class_vocab.empty()) throw ValidationError("build_theme_graph: empty class vocabulary");
  std::vector<std::string> words;
  for (const auto& [w, _] : class_vocab) words.push_back(w);
  CooccurrenceStats stats = CooccurrenceStats::from_corpus(support_corpus, &words);
  ThemeGraph g;
  g.action_class = action_class;
  for (const auto& [w, c] : class_vocab)
    g.nodes.push_back({w, c, embedder.embed(w)});
  for (size_t a = 0; a < words.size(); ++a) {
    if (!stats.word_counts.count(words[a]) || stats.word_counts[words[a]] == 0)
      continue;  // vocab word absent from support corpus: kept as isolated node
    for (size_t b = a + 1; b < words.size(); ++b) {
      if (!stats.word_counts.count(words[b]) || stats.word_counts[words[b]] == 0) continue;
      double w = compute_npmi(stats, words[a], words[b]);
      if (w > npmi_threshold)
        g.edges.push_back({static_cast<int>(a), static_cast<int>(b), w});
    }
  }
  return g;
}

std::string theme_graph_to_json(const ThemeGraph& g) {
  json j;
  j["class"] = g.action_class;
  json nodes = json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"word", n.word}, {"count", n.corpus_count}});
  j["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({e.a, e.b, e.npmi});
  j["edges"] = edges;
  return j.dump();
}

ThemeGraph theme_graph_from_json(const std::string& text, const TextEmbedder& embedder) {
  json j = json::parse(text);
  ThemeGraph g;
  g.action_class = j.at("class").get<std::string>();
  for (const auto& n : j.at("nodes"))
    g.nodes.push_back({n.at("word").get<std::string>(), n.at("count").get<long>(),
                       embedder.embed(n.at("word").get<std::string>())});
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
  return g;
}

void save_theme_graphs(const std::vector<ThemeGraph>& graphs, const std::string& path) {
  std::ofstream f(path);
  for (const auto& g : graphs) f << theme_graph_to_json(g) << "\n";
}

std::vector<ThemeGraph> load_theme_graphs(const std::string& path,
                                          const TextEmbedder& embedder) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open theme graph file: " + path);
  std::vector<ThemeGraph> out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(theme_graph_from_json(line, embedder));
  return out;
}

std::vector<std::vector<std::string>> load_support_corpus(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open support corpus: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(f, line)) {
    auto toks = tokenize(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

}  // namespace gemvpc
