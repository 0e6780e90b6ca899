#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>

namespace evorag {

/// Hashed bag-of-tokens text embedding. Either unit L2 norm or all zero.
///
/// Stored sparse: a handful of tokens populate a space that is usually far
/// larger than the token count, so the logical dimension can be raised to
/// make bucket collisions rare without paying for dense storage.
using Embedding = Eigen::SparseVector<double>;

inline constexpr int kDefaultEmbedDim = 256;
inline constexpr int kMinEmbedDim = 8;

/// 64-bit FNV-1a over the raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Lowercases and splits on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Bucket of a (lowercased) token: fnv1a64(token) mod dim.
int token_bucket(std::string_view token, int dim);

/// Throws std::invalid_argument for dim < kMinEmbedDim.
Embedding embed_text(std::string_view text, int dim = kDefaultEmbedDim);

/// Cosine similarity; 0 when either side is the zero vector. Throws on
/// dimension mismatch.
double cosine(const Embedding& a, const Embedding& b);

}  // namespace evorag
