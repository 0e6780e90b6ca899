#include "evorag/embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace evorag {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

int token_bucket(std::string_view token, int dim) {
  return static_cast<int>(fnv1a64(token) % static_cast<std::uint64_t>(dim));
}

Embedding embed_text(std::string_view text, int dim) {
  if (dim < kMinEmbedDim) {
    throw std::invalid_argument("embedding dimension must be >= " + std::to_string(kMinEmbedDim));
  }
  std::map<int, double> counts;
  for (const std::string& token : tokenize(text)) counts[token_bucket(token, dim)] += 1.0;

  Embedding v(dim);
  if (counts.empty()) return v;
  double sq = 0.0;
  for (const auto& [bucket, c] : counts) sq += c * c;
  const double norm = std::sqrt(sq);
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [bucket, c] : counts) v.insertBack(bucket) = c / norm;
  return v;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  // sqrt(x * x) == |x| in binary64, so identical inputs give exactly 1.
  const double c = a.dot(b) / std::sqrt(na * nb);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace evorag
