#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace evorag {

struct MetricPair {
  int em = 0;
  double f1 = 0.0;
};

/// SQuAD-style answer normalization: lowercase, drop punctuation, drop the
/// articles a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view text);

int exact_match(std::string_view pred, std::string_view gold);

/// Multiset token F1. Both sides empty scores 1, one side empty scores 0.
double token_f1(std::string_view pred, std::string_view gold);

MetricPair score_answer(std::string_view pred, std::string_view gold);

}  // namespace evorag
