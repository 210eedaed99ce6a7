#pragma once

// Randomized video records + annotation bundles for property tests of the
// graph construction pipeline.

#include "gemvpc/rng.hpp"
#include "gemvpc/video_graph.hpp"

#include <string>
#include <vector>

namespace testutil {

struct RandomVideo {
  gemvpc::VideoRecord record;
  gemvpc::AnnotationBundle bundle;
};

inline gemvpc::TrainingLexicon random_bundle_lexicon(const gemvpc::TextEmbedder& emb) {
  gemvpc::TrainingLexicon lex;
  for (const char* v : {"chops", "stirs", "pours", "bakes"}) {
    lex.verbs.push_back(v);
    lex.verb_embeddings.push_back(emb.embed(v));
  }
  for (const char* w : {"knife", "bowl", "pan", "onion", "quickly", "slowly"})
    lex.noun_adverbs.insert(w);
  return lex;
}

inline RandomVideo random_video(gemvpc::DetRng& rng, gemvpc::GraphMethod method,
                                const gemvpc::TrainingLexicon& lex, int index) {
  using namespace gemvpc;
  static const char* kActions[] = {"chop", "stir", "pour", "whisk", "bake"};
  static const char* kLocations[] = {"kitchen", "garden", "garage"};
  static const char* kObjects[] = {"knife", "bowl", "pan", "onion"};
  static const char* kAudio[] = {"sizzling", "speech", "music"};
  static const char* kTails[] = {"sharp blade", "hot oil", "fresh herbs",
                                 "a steady hand", "mixing slowly"};

  RandomVideo out;
  out.record.video_id = "rand_" + std::to_string(index);
  out.bundle.video_id = out.record.video_id;
  int n_events = 1 + static_cast<int>(rng.uniform_int(3));
  double t0 = 0;
  for (int e = 0; e < n_events; ++e) {
    EventSegment seg{e, t0, t0 + 5.0};
    t0 = seg.end_s;
    out.record.events.push_back(seg);
    out.record.captions.push_back({"a", "person", "acts"});

    EventAnnotations ev;
    std::vector<std::string> ev_actions;
    if (method == GraphMethod::VF) {
      int n_act = static_cast<int>(rng.uniform_int(4));  // 0 = "no action" path
      for (int i = 0; i < n_act; ++i) {
        std::string a = kActions[rng.uniform_int(5)];
        ev.action_preds.push_back({a, rng.uniform()});
        ev_actions.push_back(a);
      }
      if (rng.uniform() < 0.8) {
        int n_loc = 1 + static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < n_loc; ++i)
          ev.vqa_locations.push_back(kLocations[rng.uniform_int(3)]);
      }
      for (int i = 0; i < static_cast<int>(rng.uniform_int(3)); ++i)
        ev.vqa_objects.push_back(kObjects[rng.uniform_int(4)]);
      for (int i = 0; i < static_cast<int>(rng.uniform_int(3)); ++i)
        ev.detected_objects.push_back({kObjects[rng.uniform_int(4)], rng.uniform()});
    } else {
      int n_tup = static_cast<int>(rng.uniform_int(3));
      std::vector<std::string> labels;  // predicted retained-action labels
      for (int i = 0; i < n_tup; ++i) {
        OpenIETuple tup;
        tup.verb = lex.verbs[rng.uniform_int(lex.verbs.size())];
        std::string label = tup.verb;
        if (rng.uniform() < 0.7) {
          std::string arg = kObjects[rng.uniform_int(4)];
          tup.args.push_back(arg);
          if (lex.noun_adverbs.count(arg)) label += " " + arg;
        }
        if (rng.uniform() < 0.3) tup.args.push_back("gibberishword");
        labels.push_back(label);
        ev.openie_tuples.push_back(tup);
      }
      // the contextual-phrase label the pipeline will derive; lets some
      // commonsense heads attach to the ASR anchor
      std::string cp;
      if (labels.empty()) cp = "speaking";
      else
        for (size_t i = 0; i < labels.size(); ++i) cp += (i ? "; " : "") + labels[i];
      ev_actions.push_back(cp);
      ev.asr_text = "someone " + std::string(kActions[rng.uniform_int(5)]) +
                    " with a " + kObjects[rng.uniform_int(4)];
      ev.pos_tags = {{"someone", "noun"}};
    }
    if (rng.uniform() < 0.7) {
      int n_win = 1 + static_cast<int>(rng.uniform_int(2));
      for (int w = 0; w < n_win; ++w)
        ev.audio_preds.push_back({{kAudio[rng.uniform_int(3)], rng.uniform()}});
    }
    // commonsense heads: mostly real action labels, sometimes junk
    int n_cs = static_cast<int>(rng.uniform_int(4));
    const auto& rels = all_relations();
    for (int i = 0; i < n_cs; ++i) {
      CommonsenseRecord cs;
      if (!ev_actions.empty() && rng.uniform() < 0.8)
        cs.head = ev_actions[rng.uniform_int(ev_actions.size())];
      else
        cs.head = "unmatched head";
      cs.relation = rels[rng.uniform_int(rels.size())];
      int n_tail = 1 + static_cast<int>(rng.uniform_int(3));
      for (int j = 0; j < n_tail; ++j) cs.tails.push_back(kTails[rng.uniform_int(5)]);
      ev.commonsense.push_back(cs);
    }
    out.bundle.events.push_back(std::move(ev));
  }
  out.record.duration = t0;
  return out;
}

}  // namespace testutil
