#pragma once

#include <span>
#include <vector>

#include "gradflip/tensor.hpp"

// Auto Segmentation criterion: a blank-free sequence criterion with trainable
// token-to-token transition scores.
namespace gradflip::asg {

using TokenSeq = std::vector<int>;

// Throws ValueError unless 1 <= size <= frames, every token is in
// [0, vocab) and no two adjacent tokens are equal.
void validate_target(std::span<const int> target, std::size_t frames, std::size_t vocab);

// emissions: [T, K] unnormalized scores, transitions: [K, K] with
// transitions(i, j) the score of moving from token i to token j.
//
// loss = logadd over all length-T paths - logadd over alignments of `target`.
// The result is differentiable in both emissions and transitions.
Tensor asg_loss(const Tensor& emissions, const Tensor& transitions, std::span<const int> target);

// Log partition of the full graph and of the target-constrained graph;
// exposed for tests.
double full_logadd(const Tensor& emissions, const Tensor& transitions);
double constrained_logadd(const Tensor& emissions, const Tensor& transitions,
                          std::span<const int> target);

// Highest-scoring frame path under the full graph. Among equal-score paths
// the lexicographically smallest one is returned.
TokenSeq viterbi_decode(const Tensor& emissions, const Tensor& transitions);

double path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> path);

// Merges adjacent repeats.
TokenSeq collapse(std::span<const int> path);

}  // namespace gradflip::asg
