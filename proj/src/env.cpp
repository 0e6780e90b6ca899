#include "evorag/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace evorag {

std::string_view to_string(ActionType type) {
  switch (type) {
    case ActionType::Search: return "search";
    case ActionType::Backtrack: return "backtrack";
    case ActionType::Answer: return "answer";
    case ActionType::Refuse: return "refuse";
  }
  return "unknown";
}

ActionType parse_action_type(std::string_view name) {
  if (name == "search") return ActionType::Search;
  if (name == "backtrack") return ActionType::Backtrack;
  if (name == "answer") return ActionType::Answer;
  if (name == "refuse") return ActionType::Refuse;
  throw std::invalid_argument("unknown action type '" + std::string(name) + "'");
}

Action Action::search(std::string query) {
  if (tokenize(query).empty()) throw std::invalid_argument("search query must be non-empty");
  return {ActionType::Search, std::move(query)};
}

Action Action::backtrack() { return {ActionType::Backtrack, {}}; }

Action Action::answer(std::string text) {
  if (tokenize(text).empty()) throw std::invalid_argument("answer text must be non-empty");
  return {ActionType::Answer, std::move(text)};
}

Action Action::refuse() { return {ActionType::Refuse, {}}; }

std::vector<int> EpisodeState::retrieved_union() const {
  std::set<int> all;
  for (const auto& set : retrieved_sets) all.insert(set.begin(), set.end());
  return {all.begin(), all.end()};
}

// ---------------------------------------------------------------------------
// Rng

namespace {
std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a;
  std::uint64_t h = splitmix64(x);
  x = h ^ (b + 0x632BE59BD9B4E019ULL);
  return splitmix64(x);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : state_(mix_seed(seed, stream)) {}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

// ---------------------------------------------------------------------------
// Vocabulary

namespace vocab {
bool is_relation_word(std::string_view token) {
  return std::find(kRelationWords.begin(), kRelationWords.end(), token) != kRelationWords.end();
}

bool is_attribute_word(std::string_view token) {
  return std::find(kAttributeWords.begin(), kAttributeWords.end(), token) !=
         kAttributeWords.end();
}

bool is_entity(std::string_view token) {
  if (token.size() < 2 || token[0] != 'e') return false;
  return std::all_of(token.begin() + 1, token.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}
}  // namespace vocab

// ---------------------------------------------------------------------------
// Corpus

namespace {
std::map<int, int> bucket_counts(std::string_view text, int dim) {
  std::map<int, int> counts;
  for (const auto& tok : tokenize(text)) ++counts[token_bucket(tok, dim)];
  return counts;
}
}  // namespace

Corpus::Corpus(std::vector<Document> docs, int embed_dim)
    : docs_(std::move(docs)), embed_dim_(embed_dim) {
  if (embed_dim_ < kMinEmbedDim) throw std::invalid_argument("corpus embed_dim too small");
  sq_norms_.resize(docs_.size(), 0);
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!index_of_.emplace(docs_[i].doc_id, i).second) {
      throw std::invalid_argument("duplicate doc_id " + std::to_string(docs_[i].doc_id));
    }
    for (const auto& [bucket, count] : bucket_counts(docs_[i].full_text(), embed_dim_)) {
      postings_[bucket].push_back({static_cast<int>(i), count});
      sq_norms_[i] += static_cast<long long>(count) * count;
    }
  }
  by_id_.resize(docs_.size());
  std::iota(by_id_.begin(), by_id_.end(), std::size_t{0});
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return docs_[a].doc_id < docs_[b].doc_id; });
}

const Document& Corpus::document(int doc_id) const {
  auto it = index_of_.find(doc_id);
  if (it == index_of_.end()) throw std::out_of_range("unknown doc_id " + std::to_string(doc_id));
  return docs_[it->second];
}

std::vector<int> Corpus::retrieve(std::string_view query, int top_k) const {
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  std::vector<int> out;
  if (docs_.empty()) return out;

  // Integer dot products and norms keep equal-structure documents at
  // bit-identical scores, so the doc-id tie-break is exact.
  const auto q = bucket_counts(query, embed_dim_);
  long long q_sq = 0;
  for (const auto& [bucket, c] : q) q_sq += static_cast<long long>(c) * c;

  std::map<int, long long> dots;  // doc index -> dot
  for (const auto& [bucket, qc] : q) {
    auto it = postings_.find(bucket);
    if (it == postings_.end()) continue;
    for (const Posting& p : it->second) dots[p.doc_index] += static_cast<long long>(qc) * p.count;
  }

  struct Scored {
    double score;
    int doc_id;
  };
  std::vector<Scored> scored;
  scored.reserve(dots.size());
  for (const auto& [idx, dot] : dots) {
    if (dot == 0) continue;
    const double denom = std::sqrt(static_cast<double>(q_sq) *
                                   static_cast<double>(sq_norms_[static_cast<std::size_t>(idx)]));
    scored.push_back({static_cast<double>(dot) / denom, docs_[static_cast<std::size_t>(idx)].doc_id});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });

  const auto k = static_cast<std::size_t>(top_k);
  for (const Scored& s : scored) {
    if (out.size() == k) return out;
    out.push_back(s.doc_id);
  }
  // Zero-score documents follow in ascending id order.
  std::set<int> taken(out.begin(), out.end());
  for (std::size_t idx : by_id_) {
    if (out.size() == k) break;
    const int id = docs_[idx].doc_id;
    if (!taken.count(id)) out.push_back(id);
  }
  return out;
}

std::vector<int> retrieve(std::string_view query, const Corpus& corpus, int top_k) {
  return corpus.retrieve(query, top_k);
}

const QuestionInstance& World::question(int question_id) const {
  // Generated worlds use question_id == index; fall back to a scan otherwise.
  if (question_id >= 0 && static_cast<std::size_t>(question_id) < questions.size() &&
      questions[static_cast<std::size_t>(question_id)].question_id == question_id) {
    return questions[static_cast<std::size_t>(question_id)];
  }
  for (const auto& q : questions) {
    if (q.question_id == question_id) return q;
  }
  throw std::out_of_range("unknown question_id " + std::to_string(question_id));
}

// ---------------------------------------------------------------------------
// World generation

void WorldConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("world." + field + ": " + why);
  };
  if (n_questions < 1) fail("n_questions", "must be >= 1");
  if (hops_min < 1) fail("hops_min", "must be >= 1");
  if (hops_max < hops_min) fail("hops_max", "must be >= hops_min");
  if (distractors_per_question < 0) fail("distractors_per_question", "must be >= 0");
  if (!(unanswerable_fraction >= 0.0 && unanswerable_fraction <= 1.0)) {
    fail("unanswerable_fraction", "must lie in [0, 1]");
  }
  if (top_k < 1) fail("top_k", "must be >= 1");
  if (embed_dim < kMinEmbedDim) fail("embed_dim", "must be >= " + std::to_string(kMinEmbedDim));
  const long long needed = static_cast<long long>(n_questions) *
                           (static_cast<long long>(hops_max) + 2LL * distractors_per_question);
  if (vocab_size < needed) {
    fail("vocab_size", "needs at least " + std::to_string(needed) +
                           " entity tokens for this many questions, hops and distractors");
  }
}

namespace {

/// Draws distinct integers in [0, n) without replacement.
class DistinctDraw {
 public:
  DistinctDraw(int n, Rng& rng) : pool_(static_cast<std::size_t>(n)), rng_(rng) {
    std::iota(pool_.begin(), pool_.end(), 0);
  }
  int next() {
    if (used_ >= pool_.size()) throw std::invalid_argument("vocabulary exhausted");
    const std::size_t j = used_ + static_cast<std::size_t>(rng_.below(pool_.size() - used_));
    std::swap(pool_[used_], pool_[j]);
    return pool_[used_++];
  }

 private:
  std::vector<int> pool_;
  std::size_t used_ = 0;
  Rng& rng_;
};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return std::string(words[static_cast<std::size_t>(rng.below(N))]);
}

struct DraftDoc {
  std::string title;
  std::string text;
};

}  // namespace

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, 0x776f726c64ULL);  // "world"
  DistinctDraw entities(cfg.vocab_size, rng);
  DistinctDraw values(cfg.vocab_size, rng);
  auto entity = [&] { return "e" + std::to_string(entities.next()); };
  auto value = [&] { return "v" + std::to_string(values.next()); };

  const auto n_unanswerable = static_cast<int>(
      std::llround(cfg.unanswerable_fraction * static_cast<double>(cfg.n_questions)));
  std::vector<int> order(static_cast<std::size_t>(cfg.n_questions));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<bool> unanswerable(static_cast<std::size_t>(cfg.n_questions), false);
  for (int i = 0; i < n_unanswerable; ++i) unanswerable[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  std::vector<DraftDoc> drafts;
  std::vector<std::vector<std::size_t>> chain_drafts(static_cast<std::size_t>(cfg.n_questions));
  std::vector<QuestionInstance> questions;
  questions.reserve(static_cast<std::size_t>(cfg.n_questions));

  for (int qi = 0; qi < cfg.n_questions; ++qi) {
    const int hops = cfg.hops_min + static_cast<int>(rng.below(
                                        static_cast<std::uint64_t>(cfg.hops_max - cfg.hops_min + 1)));
    std::vector<std::string> chain;
    for (int h = 0; h < hops; ++h) chain.push_back(entity());
    const std::string attribute = pick(vocab::kAttributeWords, rng);
    const std::string answer = value();
    const bool answerable = !unanswerable[static_cast<std::size_t>(qi)];

    auto& gold = chain_drafts[static_cast<std::size_t>(qi)];
    for (int h = 1; h < hops; ++h) {
      const auto& subj = chain[static_cast<std::size_t>(h - 1)];
      gold.push_back(drafts.size());
      drafts.push_back({subj, subj + " " + pick(vocab::kRelationWords, rng) + " " +
                                  chain[static_cast<std::size_t>(h)]});
    }
    const auto& last = chain.back();
    if (answerable) {
      gold.push_back(drafts.size());
      drafts.push_back({last, last + " " + attribute + " " + answer});
    } else {
      // The chain stays searchable but the attribute link is missing, so
      // the question cannot be grounded; its gold set is empty.
      gold.clear();
    }

    // Distractor counts vary per question (mean distractors_per_question) so
    // that questions differ in how much exploration they need.
    const int n_distractors = static_cast<int>(
        rng.below(2 * static_cast<std::uint64_t>(cfg.distractors_per_question) + 1));
    for (int d = 0; d < n_distractors; ++d) {
      const auto& anchor = chain[static_cast<std::size_t>(rng.below(chain.size()))];
      const std::string other = entity();
      switch (rng.below(3)) {
        case 0:  // points at a chain entity from outside the chain
          drafts.push_back({other, other + " " + pick(vocab::kRelationWords, rng) + " " + anchor});
          break;
        case 1:  // same attribute, unrelated entity
          drafts.push_back({other, other + " " + attribute + " " + value()});
          break;
        default:  // dead-end branch off a chain entity
          drafts.push_back({anchor, anchor + " " + pick(vocab::kRelationWords, rng) + " " + other});
          break;
      }
    }

    QuestionInstance q;
    q.question_id = qi;
    q.question_text = "what " + attribute + " " + chain.front();
    q.gold_answer = answerable ? answer : std::string{};
    q.answerable = answerable;
    q.hops = hops;
    questions.push_back(std::move(q));
  }

  // Shuffle so doc ids (and therefore tie-breaks) carry no structure.
  std::vector<std::size_t> perm(drafts.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  std::vector<int> id_of(drafts.size());
  std::vector<Document> docs(drafts.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    const std::size_t src = perm[pos];
    id_of[src] = static_cast<int>(pos);
    docs[pos] = {static_cast<int>(pos), drafts[src].title, drafts[src].text};
  }
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    auto& ids = questions[qi].gold_doc_ids;
    for (std::size_t src : chain_drafts[qi]) ids.push_back(id_of[src]);
    std::sort(ids.begin(), ids.end());
  }

  World world;
  world.config = cfg;
  world.corpus = Corpus(std::move(docs), cfg.embed_dim);
  world.questions = std::move(questions);
  return world;
}

// ---------------------------------------------------------------------------
// Verifier and step

bool verifier(const EpisodeState& state, const QuestionInstance& question) {
  if (!question.answerable || question.gold_doc_ids.empty()) return false;
  const auto have = state.retrieved_union();
  return std::includes(have.begin(), have.end(), question.gold_doc_ids.begin(),
                       question.gold_doc_ids.end());
}

StepOutcome step(const EpisodeState& state, const Action& action, const Corpus& corpus,
                 const QuestionInstance& question, int t_max, int top_k) {
  if (state.done) throw std::logic_error("step on a terminal state");
  if (state.t >= t_max) throw std::logic_error("step budget exhausted");
  if (state.question_id != question.question_id) {
    throw std::logic_error("state does not belong to this question");
  }

  StepOutcome out;
  out.next_state = state;
  EpisodeState& next = out.next_state;
  switch (action.type) {
    case ActionType::Search:
      out.retrieved = corpus.retrieve(action.text, top_k);
      next.sub_queries.push_back(action.text);
      next.retrieved_sets.push_back(out.retrieved);
      next.notes.push_back("search: " + action.text);
      break;
    case ActionType::Backtrack:
      if (!next.sub_queries.empty()) {
        next.sub_queries.pop_back();
        next.retrieved_sets.pop_back();
      }
      ++next.backtracks;
      next.notes.push_back("backtrack");
      break;
    case ActionType::Answer:
      next.notes.push_back("answer: " + action.text);
      break;
    case ActionType::Refuse:
      next.notes.push_back("refuse");
      break;
  }
  next.t += 1;
  if (action.terminal()) {
    out.terminal = true;
  } else if (next.t >= t_max) {
    out.terminal = true;
    out.truncated = true;
  }
  next.done = out.terminal;
  return out;
}

}  // namespace evorag
