#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evorag/embed.hpp"

namespace evorag {

struct Document {
  int doc_id = 0;
  std::string title;
  std::string text;

  /// Text that retrieval scores against: title followed by body.
  std::string full_text() const { return title + " " + text; }

  friend bool operator==(const Document&, const Document&) = default;
};

struct QuestionInstance {
  int question_id = 0;
  std::string question_text;
  std::string gold_answer;
  std::vector<int> gold_doc_ids;  // sorted ascending
  bool answerable = true;
  int hops = 1;

  friend bool operator==(const QuestionInstance&, const QuestionInstance&) = default;
};

enum class ActionType { Search = 0, Backtrack = 1, Answer = 2, Refuse = 3 };

inline constexpr int kNumActionTypes = 4;

std::string_view to_string(ActionType type);
ActionType parse_action_type(std::string_view name);

struct Action {
  ActionType type = ActionType::Refuse;
  std::string text;  // query for Search, answer for Answer, empty otherwise

  /// Throws std::invalid_argument on an empty query.
  static Action search(std::string query);
  static Action backtrack();
  /// Throws std::invalid_argument on an empty answer.
  static Action answer(std::string text);
  static Action refuse();

  bool terminal() const { return type == ActionType::Answer || type == ActionType::Refuse; }

  friend bool operator==(const Action&, const Action&) = default;
};

/// Agent state: sub-queries issued so far, the documents each returned,
/// free-text notes, and the step counter.
struct EpisodeState {
  int question_id = 0;
  std::vector<std::string> sub_queries;
  std::vector<std::vector<int>> retrieved_sets;  // parallel to sub_queries
  std::vector<std::string> notes;
  int t = 0;
  int backtracks = 0;
  bool done = false;

  static EpisodeState initial(int question_id) {
    EpisodeState s;
    s.question_id = question_id;
    return s;
  }

  /// Sorted union of every retrieved set still on the history stack.
  std::vector<int> retrieved_union() const;

  friend bool operator==(const EpisodeState&, const EpisodeState&) = default;
};

struct StepOutcome {
  EpisodeState next_state;
  std::vector<int> retrieved;
  bool terminal = false;
  bool truncated = false;
};

struct WorldConfig {
  int n_questions = 300;
  int hops_min = 2;
  int hops_max = 3;
  int distractors_per_question = 3;
  double unanswerable_fraction = 0.2;
  int top_k = 3;
  int vocab_size = 5000;
  int embed_dim = 1 << 20;
  std::uint64_t seed = 42;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Word lists shared by the world generator and the agent's parser. Every
/// document reads "<subject> <word> <object>": a relation word links two
/// entities, an attribute word attaches a value to an entity.
namespace vocab {
inline constexpr std::array<std::string_view, 6> kRelationWords = {
    "founded", "married", "located", "leads", "owns", "mentored"};
inline constexpr std::array<std::string_view, 6> kAttributeWords = {
    "born", "colour", "capital", "rank", "height", "genre"};

bool is_relation_word(std::string_view token);
bool is_attribute_word(std::string_view token);
bool is_entity(std::string_view token);  // "e<digits>"
}  // namespace vocab

/// Documents plus a token-count index for exact cosine ranking.
class Corpus {
 public:
  Corpus() = default;
  /// Throws std::invalid_argument on duplicate doc ids.
  Corpus(std::vector<Document> docs, int embed_dim);

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  int embed_dim() const { return embed_dim_; }

  bool contains(int doc_id) const { return index_of_.count(doc_id) != 0; }
  /// Throws std::out_of_range for an unknown id.
  const Document& document(int doc_id) const;

  /// Top-k doc ids by cosine(embed(query), embed(title + text)); ties go to
  /// the smaller doc id. Empty corpus gives an empty list.
  std::vector<int> retrieve(std::string_view query, int top_k) const;

 private:
  struct Posting {
    int doc_index;
    int count;
  };

  std::vector<Document> docs_;
  std::unordered_map<int, std::size_t> index_of_;
  std::unordered_map<int, std::vector<Posting>> postings_;  // bucket -> docs
  std::vector<long long> sq_norms_;                         // squared count norms
  std::vector<std::size_t> by_id_;                          // doc indices sorted by id
  int embed_dim_ = kDefaultEmbedDim;
};

struct World {
  WorldConfig config;
  Corpus corpus;
  std::vector<QuestionInstance> questions;

  /// Throws std::out_of_range for an unknown question id.
  const QuestionInstance& question(int question_id) const;
};

/// Builds a seeded synthetic multi-hop world. Throws std::invalid_argument
/// when the config is inconsistent (e.g. vocabulary too small).
World generate_world(const WorldConfig& cfg);

std::vector<int> retrieve(std::string_view query, const Corpus& corpus, int top_k);

/// Evidence-sufficiency oracle: true iff the question is answerable and all
/// gold documents are in the state's retrieved sets.
bool verifier(const EpisodeState& state, const QuestionInstance& question);

/// Applies one action. Throws std::logic_error on terminal states or when
/// state.t >= t_max.
StepOutcome step(const EpisodeState& state, const Action& action, const Corpus& corpus,
                 const QuestionInstance& question, int t_max, int top_k);

/// Seeded 64-bit generator keyed by (seed, stream); the same pair always
/// yields the same sequence.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Mixes two 64-bit keys into one seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace evorag
