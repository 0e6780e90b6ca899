#include "evorag/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace evorag {

namespace {

struct ParsedDoc {
  std::string subject;
  std::string word;
  std::string object;
};

ParsedDoc parse_doc(const Document& doc) {
  const auto tokens = tokenize(doc.text);
  ParsedDoc p;
  if (!tokens.empty()) p.subject = tokens[0];
  if (tokens.size() > 1) p.word = tokens[1];
  if (tokens.size() > 2) p.object = tokens[2];
  return p;
}

/// Retrieved documents the agent treats as evidence: those sharing at least
/// one token with the query that returned them. Zero-score fillers drop out.
std::vector<std::vector<int>> relevant_sets(const EpisodeState& state, const Corpus& corpus) {
  std::vector<std::vector<int>> out;
  out.reserve(state.retrieved_sets.size());
  for (std::size_t i = 0; i < state.retrieved_sets.size(); ++i) {
    const auto q = tokenize(state.sub_queries[i]);
    const std::set<std::string> query_tokens(q.begin(), q.end());
    std::vector<int> kept;
    for (int id : state.retrieved_sets[i]) {
      for (const auto& tok : tokenize(corpus.document(id).full_text())) {
        if (query_tokens.count(tok)) {
          kept.push_back(id);
          break;
        }
      }
    }
    out.push_back(std::move(kept));
  }
  return out;
}

std::vector<std::string> entities_in(std::string_view text) {
  std::vector<std::string> out;
  for (auto& tok : tokenize(text)) {
    if (vocab::is_entity(tok)) out.push_back(std::move(tok));
  }
  return out;
}

/// Observable facts about a state, computed once and shared by every
/// candidate's feature row.
struct StateSummary {
  std::vector<Embedding> previous_queries;
  std::set<std::string> queried_entities;
  std::set<std::string> latest_query_entities;
  std::set<std::string> forward_entities;  // objects of latest-retrieval links from a queried subject
  std::set<std::string> linked_entities;   // reachable from the question entities via retrieved links
  std::set<std::string> question_tokens;
  std::vector<int> retrieved_union;
  std::vector<ParsedDoc> retrieved_docs;   // relevant retrieved documents
  double last_novelty = 0.0;
  bool has_history = false;
  bool open_lead = false;       // a linked entity not yet queried
  bool grounded_answer = false; // a retrieved value with the asked attribute on a linked entity
};

StateSummary summarize(const EpisodeState& state, const QuestionInstance& question,
                       const Corpus& corpus, int embed_dim) {
  StateSummary s;
  for (const auto& q : state.sub_queries) {
    s.previous_queries.push_back(embed_text(q, embed_dim));
    for (auto& e : entities_in(q)) s.queried_entities.insert(std::move(e));
  }
  for (auto& tok : tokenize(question.question_text)) {
    if (vocab::is_entity(tok)) s.linked_entities.insert(tok);
    s.question_tokens.insert(std::move(tok));
  }
  const auto relevant = relevant_sets(state, corpus);
  std::set<int> evidence;
  for (const auto& set : relevant) evidence.insert(set.begin(), set.end());
  s.retrieved_union = state.retrieved_union();
  for (int id : evidence) s.retrieved_docs.push_back(parse_doc(corpus.document(id)));
  // Entities reachable from the question through retrieved relation links.
  for (bool grew = true; grew;) {
    grew = false;
    for (const ParsedDoc& d : s.retrieved_docs) {
      if (vocab::is_relation_word(d.word) && vocab::is_entity(d.object) &&
          s.linked_entities.count(d.subject) && s.linked_entities.insert(d.object).second) {
        grew = true;
      }
    }
  }
  for (const auto& e : s.linked_entities) {
    if (!s.queried_entities.count(e)) s.open_lead = true;
  }
  for (const ParsedDoc& d : s.retrieved_docs) {
    if (vocab::is_attribute_word(d.word) && s.question_tokens.count(d.word) &&
        s.linked_entities.count(d.subject)) {
      s.grounded_answer = true;
    }
  }
  s.has_history = !state.sub_queries.empty();
  if (s.has_history) {
    for (auto& e : entities_in(state.sub_queries.back())) s.latest_query_entities.insert(std::move(e));
    const auto& last = relevant.back();
    std::set<int> earlier;
    for (std::size_t i = 0; i + 1 < relevant.size(); ++i) {
      earlier.insert(relevant[i].begin(), relevant[i].end());
    }
    int novel = 0;
    for (int id : last) {
      if (!earlier.count(id)) ++novel;
      const ParsedDoc d = parse_doc(corpus.document(id));
      if (vocab::is_relation_word(d.word) && s.latest_query_entities.count(d.subject) &&
          vocab::is_entity(d.object) && !s.queried_entities.count(d.object)) {
        s.forward_entities.insert(d.object);
      }
    }
    s.last_novelty = last.empty() ? 0.0 : static_cast<double>(novel) / static_cast<double>(last.size());
  }
  return s;
}

Eigen::VectorXd featurize_with(const StateSummary& s, const EpisodeState& state,
                               const Action& candidate, const FeatureContext& ctx) {
  using namespace feature;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  const double p = progress(std::min(state.t, ctx.t_max), ctx.t_max);
  const double verified = ctx.verified ? 1.0 : 0.0;
  f(kBias) = 1.0;
  f(kProgress) = p;
  f(kVerified) = verified;
  f(kPriorBacktracks) = static_cast<double>(state.backtracks) / static_cast<double>(std::max(state.t, 1));

  switch (candidate.type) {
    case ActionType::Search: {
      f(kIsSearch) = 1.0;
      const Embedding q = embed_text(candidate.text, ctx.embed_dim);
      double overlap = 0.0;
      for (const auto& prev : s.previous_queries) overlap = std::max(overlap, cosine(q, prev));
      f(kSearchOverlap) = overlap;
      f(kSearchRetrievedCount) =
          static_cast<double>(s.retrieved_union.size()) /
          static_cast<double>(ctx.top_k * std::max(state.t, 1));
      f(kSearchLastNovelty) = s.last_novelty;
      bool new_entity = false;
      bool forward = false;
      bool linked = false;
      for (const auto& e : entities_in(candidate.text)) {
        if (!s.queried_entities.count(e)) {
          new_entity = true;
          if (s.linked_entities.count(e)) linked = true;
        }
        if (s.forward_entities.count(e)) forward = true;
      }
      f(kSearchNewEntity) = new_entity ? 1.0 : 0.0;
      f(kSearchForwardLink) = forward ? 1.0 : 0.0;
      f(kSearchLinked) = linked ? 1.0 : 0.0;
      f(kSearchProgress) = p;
      f(kSearchVerified) = verified;
      break;
    }
    case ActionType::Backtrack:
      f(kIsBacktrack) = 1.0;
      f(kBacktrackStale) = s.has_history ? 1.0 - s.last_novelty : 0.0;
      f(kBacktrackProgress) = p;
      break;
    case ActionType::Answer: {
      f(kIsAnswer) = 1.0;
      f(kAnswerVerified) = verified;
      f(kAnswerProgress) = p;
      // Strongest supporting document among those stating this value.
      double attr = 0.0;
      double linked = 0.0;
      for (const ParsedDoc& d : s.retrieved_docs) {
        if (!vocab::is_attribute_word(d.word) || d.object != candidate.text) continue;
        const double a = s.question_tokens.count(d.word) ? 1.0 : 0.0;
        const double l = s.linked_entities.count(d.subject) ? 1.0 : 0.0;
        if (a + l > attr + linked) {
          attr = a;
          linked = l;
        }
      }
      f(kAnswerAttributeMatch) = attr;
      f(kAnswerLinked) = linked;
      f(kAnswerGrounded) = attr * linked;
      f(kAnswerUngrounded) = 1.0 - attr * linked;
      break;
    }
    case ActionType::Refuse:
      f(kIsRefuse) = 1.0;
      f(kRefuseVerified) = verified;
      f(kRefuseProgress) = p;
      f(kRefuseNoLead) = s.open_lead ? 0.0 : 1.0;
      f(kRefuseNoAnswer) = s.grounded_answer ? 0.0 : 1.0;
      // Every linked entity has been searched and nothing answers the question.
      f(kRefuseExhausted) = !s.open_lead && !s.grounded_answer ? 1.0 : 0.0;
      break;
  }
  return f;
}

}  // namespace

PolicyParams prior_policy(double strength) {
  using namespace feature;
  PolicyParams p;
  p.weights(kIsSearch) = strength;
  p.weights(kAnswerGrounded) = strength;
  p.weights(kIsBacktrack) = -strength;
  return p;
}

std::vector<Action> candidate_actions(const EpisodeState& state, const QuestionInstance& question,
                                      const Corpus& corpus, const PolicyConfig& cfg) {
  std::vector<Action> out;
  std::set<std::string> seen_queries;
  int searches = 0;
  auto add_search = [&](std::string q) {
    if (searches >= cfg.max_search_candidates || tokenize(q).empty()) return;
    if (!seen_queries.insert(q).second) return;
    out.push_back(Action::search(std::move(q)));
    ++searches;
  };

  add_search(question.question_text);

  // Entities from retrieved documents, most recent retrieval first.
  std::vector<std::string> entities;
  std::set<std::string> seen_entities;
  std::vector<std::pair<std::string, std::string>> answers;  // (value, source) in discovery order
  std::set<std::string> seen_answers;
  const auto relevant = relevant_sets(state, corpus);
  for (auto set = relevant.rbegin(); set != relevant.rend(); ++set) {
    for (int id : *set) {
      const ParsedDoc d = parse_doc(corpus.document(id));
      for (const std::string* tok : {&d.subject, &d.object}) {
        if (vocab::is_entity(*tok) && seen_entities.insert(*tok).second) entities.push_back(*tok);
      }
      if (vocab::is_attribute_word(d.word) && !d.object.empty() &&
          seen_answers.insert(d.object).second) {
        answers.emplace_back(d.object, d.subject);
      }
    }
  }
  for (const auto& e : entities) add_search(e);
  for (const auto& qe : entities_in(question.question_text)) {
    for (const auto& e : entities) {
      if (e != qe) add_search(qe + " " + e);
    }
  }

  if (!state.sub_queries.empty()) out.push_back(Action::backtrack());
  for (const auto& [value, source] : answers) out.push_back(Action::answer(value));
  out.push_back(Action::refuse());
  return out;
}

Eigen::VectorXd featurize(const EpisodeState& state, const Action& candidate,
                          const QuestionInstance& question, const Corpus& corpus,
                          const FeatureContext& ctx) {
  return featurize_with(summarize(state, question, corpus, ctx.embed_dim), state, candidate, ctx);
}

Eigen::MatrixXd feature_matrix(const EpisodeState& state, const std::vector<Action>& candidates,
                               const QuestionInstance& question, const Corpus& corpus,
                               const FeatureContext& ctx) {
  const StateSummary s = summarize(state, question, corpus, ctx.embed_dim);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(candidates.size()), kFeatureDim);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = featurize_with(s, state, candidates[i], ctx).transpose();
  }
  return x;
}

std::vector<CandidateAction> featurized_candidates(const EpisodeState& state,
                                                   const QuestionInstance& question,
                                                   const Corpus& corpus, const FeatureContext& ctx,
                                                   const PolicyConfig& cfg) {
  const auto actions = candidate_actions(state, question, corpus, cfg);
  const Eigen::MatrixXd x = feature_matrix(state, actions, question, corpus, ctx);
  std::vector<CandidateAction> out;
  out.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    out.push_back({actions[i], x.row(static_cast<Eigen::Index>(i)).transpose()});
  }
  return out;
}

Eigen::VectorXd log_probabilities(const PolicyParams& params, const Eigen::MatrixXd& features,
                                  double temperature) {
  if (features.rows() == 0) throw std::invalid_argument("empty candidate list");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (features.cols() != params.weights.size()) {
    throw std::invalid_argument("feature dimension does not match policy weights");
  }
  const Eigen::VectorXd logits = features * params.weights / temperature;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

double log_prob(const PolicyParams& params, const Eigen::MatrixXd& features, int chosen,
                double temperature) {
  if (chosen < 0 || chosen >= features.rows()) {
    if (features.rows() == 0) throw std::invalid_argument("empty candidate list");
    throw std::out_of_range("chosen candidate index out of range");
  }
  return log_probabilities(params, features, temperature)(chosen);
}

Eigen::VectorXd log_prob_gradient(const PolicyParams& params, const Eigen::MatrixXd& features,
                                  int chosen, double temperature) {
  const Eigen::VectorXd probs = log_probabilities(params, features, temperature).array().exp();
  if (chosen < 0 || chosen >= features.rows()) throw std::out_of_range("chosen candidate index");
  return (features.row(chosen).transpose() - features.transpose() * probs) / temperature;
}

Trajectory rollout_from(const PolicyParams& params, const QuestionInstance& question,
                        const World& world, const RolloutSettings& settings,
                        const EpisodeState& start, std::optional<Action> forced_first, Rng& rng) {
  const int t_max = settings.schedule.t_max;
  const int top_k = world.config.top_k;
  const int embed_dim = world.corpus.embed_dim();

  Trajectory traj;
  traj.question_id = question.question_id;
  traj.stage = settings.stage;
  traj.mode = settings.schedule.mode;

  EpisodeState state = start;
  bool truncated = false;
  while (!state.done && state.t < t_max) {
    StepRecord rec;
    rec.state = state;
    rec.enough_evidence = verifier(state, question);
    rec.candidates = candidate_actions(state, question, world.corpus, settings.policy);
    const FeatureContext fctx{t_max, top_k, embed_dim, rec.enough_evidence};
    rec.features = feature_matrix(state, rec.candidates, question, world.corpus, fctx);
    const Eigen::VectorXd logp =
        log_probabilities(params, rec.features, settings.policy.temperature);

    if (forced_first) {
      auto it = std::find(rec.candidates.begin(), rec.candidates.end(), *forced_first);
      if (it == rec.candidates.end()) {
        throw std::invalid_argument("forced action is not a candidate at this state");
      }
      rec.chosen = static_cast<int>(it - rec.candidates.begin());
      forced_first.reset();
    } else if (settings.greedy) {
      Eigen::Index best = 0;
      logp.maxCoeff(&best);
      rec.chosen = static_cast<int>(best);
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      rec.chosen = static_cast<int>(logp.size()) - 1;
      for (Eigen::Index i = 0; i < logp.size(); ++i) {
        acc += std::exp(logp(i));
        if (u < acc) {
          rec.chosen = static_cast<int>(i);
          break;
        }
      }
    }
    rec.log_prob = logp(rec.chosen);

    const Action& action = rec.action();
    StepOutcome out = step(state, action, world.corpus, question, t_max, top_k);
    rec.retrieved = out.retrieved;

    const RewardContext rctx{state,          action,
                             rec.retrieved,  question,
                             rec.enough_evidence, progress(state.t, t_max),
                             embed_dim,      settings.reward};
    rec.reward = reward_vector(rctx);
    rec.weights = weights_at(settings.schedule, settings.stage, state.t);
    rec.aggregate = aggregate(rec.reward, rec.weights);

    if (action.type == ActionType::Answer) traj.final_answer = action.text;
    truncated = out.truncated;
    traj.steps.push_back(std::move(rec));
    state = std::move(out.next_state);
  }
  traj.truncated = truncated;
  traj.final_state = state;
  traj.total_return = episode_return(traj, 0);
  return traj;
}

Trajectory rollout(const PolicyParams& params, const QuestionInstance& question,
                   const World& world, const RolloutSettings& settings, std::uint64_t seed,
                   int episode_id) {
  Rng rng(seed, static_cast<std::uint64_t>(episode_id));
  Trajectory traj = rollout_from(params, question, world, settings,
                                 EpisodeState::initial(question.question_id), std::nullopt, rng);
  traj.episode_id = episode_id;
  traj.seed = seed;
  return traj;
}

}  // namespace evorag
